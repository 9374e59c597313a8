//! Command-line front end: `encode`, `split`, `baseline`, `gather`,
//! `refine`, `evaluate` and `report`, plus the built-in search runner used
//! by `lsgen-candidate`.

mod builtin;
mod commands;
mod config;
mod pipeline;

use std::ffi::OsString;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, OnceLock};

use clap::{Args, Parser, Subcommand};

pub use builtin::{builtin_main, BUILTIN_ALGOS};
pub use config::{interpolate_env, RunConfig, Timeouts};
pub use pipeline::{discover_instances, BundleInfo, SplitFile, SOLVER_ALONE};

#[derive(Parser, Debug)]
#[command(name = "lsgen", version, about = "Generate, score and refine local-search preprocessors for SAT encodings")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default, Clone)]
struct GlobalArgs {
    /// JSON run configuration; `${VAR}` is taken from the environment.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Replay provider responses from this cassette.
    #[arg(long, global = true)]
    cassette: Option<PathBuf>,
    /// Record live provider responses to this cassette.
    #[arg(long, global = true, conflicts_with = "cassette")]
    record: Option<PathBuf>,
    /// Answer from a JSON script `{provider: {stream: [reply, ...]}}`
    /// instead of a live endpoint; combine with --record to make a cassette.
    #[arg(long, global = true, conflicts_with = "cassette")]
    script: Option<PathBuf>,
    /// `mini` or `external:<path>`.
    #[arg(long, global = true)]
    adapter: Option<String>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    scheme: Option<String>,
    /// Instance directories or files, replacing the configured ones.
    #[arg(long = "instances", global = true, num_args = 1..)]
    instances: Vec<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Encode one instance into formula.cnf, varmap.json and bundle.json.
    Encode {
        #[arg(long)]
        instance: PathBuf,
        /// Encoding bound; the scheme's heuristic when omitted.
        #[arg(long)]
        bound: Option<i64>,
    },
    /// Encode all instances, run the solver alone and split train/test.
    Split,
    /// Run the solver alone on the test set.
    Baseline,
    /// Generate candidates with each provider.
    Gather {
        #[arg(long)]
        n: Option<usize>,
    },
    /// Refine the top candidates of each provider.
    Refine {
        #[arg(long)]
        iterations: Option<u32>,
        #[arg(long)]
        k: Option<usize>,
        /// Refine these candidates instead of the top k.
        #[arg(long = "base", num_args = 1..)]
        bases: Vec<String>,
    },
    /// Run candidates and the seeded solver on the test set.
    Evaluate {
        #[arg(long = "candidates", num_args = 1..)]
        candidates: Vec<String>,
        /// Built-in searches to add, e.g. walksat.
        #[arg(long = "builtin", num_args = 1..)]
        builtins: Vec<String>,
        /// Every saved version instead of the per-lineage representatives.
        #[arg(long, conflicts_with = "candidates")]
        all_versions: bool,
    },
    /// Write Solved/New and relative-score tables.
    Report,
}

/// Failure classes mapped to exit codes 2 and 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Pipeline(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Pipeline(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Pipeline(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Pipeline(e) => write!(f, "{e:#}"),
        }
    }
}

/// Cancellation flag shared with the Ctrl-C handler, installed once.
fn cancel_flag() -> Arc<AtomicBool> {
    static FLAG: OnceLock<Arc<AtomicBool>> = OnceLock::new();
    FLAG.get_or_init(|| {
        let flag = Arc::new(AtomicBool::new(false));
        let handler = Arc::clone(&flag);
        if let Err(e) = ctrlc::set_handler(move || {
            eprintln!("interrupt: stopping running candidates and saving state");
            handler.store(true, Ordering::SeqCst);
        }) {
            log::warn!("no Ctrl-C handler: {e}");
        }
        flag
    })
    .clone()
}

fn load_config(g: &GlobalArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &g.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            RunConfig::from_json(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(w) = g.workers {
        cfg.workers = w;
    }
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(a) = &g.adapter {
        cfg.adapter = a.clone();
    }
    if let Some(o) = &g.out {
        cfg.out = o.clone();
    }
    if let Some(s) = &g.scheme {
        cfg.scheme = s.clone();
    }
    if !g.instances.is_empty() {
        cfg.instances = g.instances.clone();
    }
    if cfg.scheme.is_empty() {
        return Err(CliError::Usage("no scheme given (--scheme or \"scheme\" in the config)".into()));
    }
    cfg.validate().map_err(CliError::Usage)?;
    Ok(cfg)
}

/// Parses `args` (without the program name) and runs the command.
pub fn run(args: impl IntoIterator<Item = OsString>) -> Result<(), CliError> {
    let argv = std::iter::once(OsString::from("lsgen")).chain(args);
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return Ok(());
        }
        Err(e) => return Err(CliError::Usage(e.to_string())),
    };
    let cfg = load_config(&cli.global)?;
    // Built-in candidates read their seed from here.
    std::env::set_var("LSGEN_SEED", cfg.seed.to_string());
    let ctx = commands::Context {
        cfg,
        cassette: cli.global.cassette.clone(),
        record: cli.global.record.clone(),
        script: cli.global.script.clone(),
        cancel: cancel_flag(),
    };
    match cli.command {
        Command::Encode { instance, bound } => commands::encode(&ctx, &instance, bound),
        Command::Split => commands::split(&ctx),
        Command::Baseline => commands::baseline(&ctx),
        Command::Gather { n } => commands::gather(&ctx, n),
        Command::Refine { iterations, k, bases } => commands::refine(&ctx, iterations, k, &bases),
        Command::Evaluate {
            candidates,
            builtins,
            all_versions,
        } => commands::evaluate(&ctx, &candidates, &builtins, all_versions),
        Command::Report => commands::report(&ctx),
    }
}

/// Process entry point; returns the exit code.
pub fn main_with(args: impl IntoIterator<Item = OsString>) -> i32 {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    match run(args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
