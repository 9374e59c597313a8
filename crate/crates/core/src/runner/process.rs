//! Child processes with a wall-clock limit, killed as a whole process group.

use std::io::Read;
use std::os::unix::process::CommandExt;
use std::process::{Command, ExitStatus, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::thread;
use std::time::{Duration, Instant};

const POLL: Duration = Duration::from_millis(5);

#[derive(Debug)]
pub(crate) struct ProcessOutcome {
    /// `None` when the process was killed.
    pub exit: Option<ExitStatus>,
    pub stdout: String,
    pub stderr: String,
    pub elapsed: Duration,
    pub timed_out: bool,
    pub interrupted: bool,
}

fn kill_group(pid: u32) {
    // SAFETY: kill(2) has no memory-safety preconditions; a negative pid
    // addresses the process group created for the child.
    unsafe {
        libc::kill(-(pid as libc::pid_t), libc::SIGKILL);
    }
}

fn drain(mut src: impl Read + Send + 'static) -> thread::JoinHandle<String> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = src.read_to_end(&mut buf);
        String::from_utf8_lossy(&buf).into_owned()
    })
}

/// Runs `cmd` in a fresh process group, killing the group at `limit` or
/// when `cancel` becomes set. Any process left in the group after the child
/// exits is killed as well.
pub(crate) fn run_with_limit(
    mut cmd: Command,
    limit: Duration,
    cancel: Option<&AtomicBool>,
) -> std::io::Result<ProcessOutcome> {
    cmd.stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .process_group(0);
    let start = Instant::now();
    let mut child = cmd.spawn()?;
    let pid = child.id();
    let out = drain(child.stdout.take().expect("piped stdout"));
    let err = drain(child.stderr.take().expect("piped stderr"));

    let mut timed_out = false;
    let mut interrupted = false;
    let exit = loop {
        if let Some(status) = child.try_wait()? {
            break Some(status);
        }
        if start.elapsed() >= limit {
            timed_out = true;
        } else if cancel.is_some_and(|c| c.load(Ordering::SeqCst)) {
            interrupted = true;
        } else {
            thread::sleep(POLL.min(limit.saturating_sub(start.elapsed())));
            continue;
        }
        kill_group(pid);
        let _ = child.wait();
        break None;
    };
    let elapsed = start.elapsed();
    // Grandchildren may still hold the pipes open.
    kill_group(pid);
    let stdout = out.join().unwrap_or_default();
    let stderr = err.join().unwrap_or_default();
    Ok(ProcessOutcome {
        exit,
        stdout,
        stderr,
        elapsed,
        timed_out,
        interrupted,
    })
}
