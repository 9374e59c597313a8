use std::fs;
use std::io::Write;

use anyhow::{anyhow, bail, Context, Result};

use crate::cnf::{parse_dimacs, write_literals};
use crate::encodings::{Dataset, Graph, VarMap};
use crate::localsearch::{bddt_level_search, coloring_native_search, gsat, tabu_sampled, walksat, SearchParams};

pub const BUILTIN_ALGOS: [&str; 5] = ["walksat", "gsat", "tabu", "coloring-native", "bddt-level"];

/// Fraction of the soft limit a built-in search may use.
const BUDGET_SHARE: f64 = 0.9;

fn env_u64(name: &str) -> Result<Option<u64>> {
    match std::env::var(name) {
        Ok(v) => v.parse().map(Some).with_context(|| format!("{name}={v} is not an integer")),
        Err(_) => Ok(None),
    }
}

fn search(args: &[String]) -> Result<String> {
    let [algo, instance, cnf, varmap, soft] = args else {
        bail!("usage: lsgen-candidate <{}> <instance> <formula.cnf> <varmap.json> <seconds>", BUILTIN_ALGOS.join("|"));
    };
    let soft: f64 = soft.parse().with_context(|| format!("bad time limit `{soft}`"))?;
    let f = parse_dimacs(&fs::read(cnf).with_context(|| format!("reading {cnf}"))?)?;
    let vm = VarMap::from_json(&fs::read_to_string(varmap).with_context(|| format!("reading {varmap}"))?)?;
    let p = SearchParams {
        seed: env_u64("LSGEN_SEED")?.unwrap_or(0),
        soft_timeout: soft * BUDGET_SHARE,
        max_flips: env_u64("LSGEN_MAX_FLIPS")?,
        ..SearchParams::default()
    };
    let outcome = match algo.as_str() {
        "walksat" => walksat(&f, &p),
        "gsat" => gsat(&f, &p),
        "tabu" => tabu_sampled(&f, &p, &vm),
        "coloring-native" => {
            let g = Graph::parse(&fs::read_to_string(instance)?)?;
            let k = vm.meta_u64("k").ok_or_else(|| anyhow!("varmap has no `k`"))? as usize;
            coloring_native_search(&g, k, &vm, &p)
        }
        "bddt-level" => {
            let data = Dataset::parse_csv(&fs::read_to_string(instance)?)?;
            bddt_level_search(&f, &data, &vm, &p)
        }
        other => bail!("unknown search `{other}`; expected one of {}", BUILTIN_ALGOS.join(", ")),
    };
    Ok(write_literals(&outcome.assignment.to_literals()))
}

/// Entry point of `lsgen-candidate`: follows the candidate protocol with a
/// built-in search named by the first argument.
pub fn builtin_main(args: &[String]) -> i32 {
    match search(args) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(out.as_bytes()).and_then(|_| stdout.flush()).is_err() {
                return 1;
            }
            0
        }
        Err(e) => {
            eprintln!("Error: {e:#}");
            1
        }
    }
}
