use std::sync::OnceLock;

use regex::Regex;

use super::SOURCE_FILE;

fn error_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^(?:[A-Za-z_][\w.]*(?:Error|Exception|Exit|Interrupt|Warning)|[Ee]rror|panic|fatal)\s*:\s*(.*)$")
            .expect("valid regex")
    })
}

fn location() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#"File "([^"]*)", line (\d+)|([^\s:"]+):(\d+)(?::\d+)?:|\bline (\d+)"#).expect("valid regex"))
}

/// Line numbers mentioned in `text`, each with whether it refers to the
/// candidate's own source file.
fn locations(text: &str) -> Vec<(u32, bool)> {
    location()
        .captures_iter(text)
        .filter_map(|c| {
            let (file, num) = match (c.get(1), c.get(2), c.get(3), c.get(4), c.get(5)) {
                (Some(f), Some(n), ..) => (Some(f.as_str()), n),
                (_, _, Some(f), Some(n), _) => (Some(f.as_str()), n),
                (.., Some(n)) => (None, n),
                _ => return None,
            };
            let own = file.is_some_and(|f| f.ends_with(SOURCE_FILE));
            num.as_str().parse().ok().map(|n| (n, own))
        })
        .collect()
}

/// Message and source line of the last error reported in a trace.
///
/// The message is the text after the last `SomethingError:`-style prefix,
/// or the last non-empty line. The line is the last location before that
/// message, preferring locations in the candidate's own file.
pub fn extract_error_context(stderr: &str, exit_code: Option<i32>) -> (String, Option<u32>) {
    let lines: Vec<&str> = stderr.lines().map(str::trim_end).filter(|l| !l.trim().is_empty()).collect();
    if lines.is_empty() {
        let message = match exit_code {
            Some(code) => format!("process exited with code {code}"),
            None => "process killed by a signal".to_string(),
        };
        return (message, None);
    }
    let (idx, message) = lines
        .iter()
        .enumerate()
        .rev()
        .find_map(|(i, l)| error_line().captures(l.trim()).map(|c| (i, c[1].trim().to_string())))
        .unwrap_or_else(|| (lines.len() - 1, lines[lines.len() - 1].trim().to_string()));
    let found = locations(&lines[..=idx].join("\n"));
    let line = found
        .iter()
        .rev()
        .find(|(_, own)| *own)
        .or(found.last())
        .map(|&(n, _)| n);
    (message, line)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn python_trace() {
        let trace = "Traceback (most recent call last):\n  File \"/tmp/x/candidate\", line 12, in <module>\n    foo()\nNameError: name 'foo' is not defined\n";
        assert_eq!(
            extract_error_context(trace, Some(1)),
            ("name 'foo' is not defined".to_string(), Some(12))
        );
    }

    #[test]
    fn bare_error_prefix() {
        let trace = "at line 12\nError: name 'foo' is not defined";
        assert_eq!(
            extract_error_context(trace, Some(1)),
            ("name 'foo' is not defined".to_string(), Some(12))
        );
    }

    #[test]
    fn empty_stderr() {
        assert_eq!(extract_error_context("", Some(3)), ("process exited with code 3".to_string(), None));
        assert_eq!(extract_error_context("\n \n", None).1, None);
    }

    #[test]
    fn last_error_wins() {
        let trace = "Traceback (most recent call last):\n  File \"/w/candidate\", line 3, in f\nKeyError: 5\n\nDuring handling of the above exception, another exception occurred:\n\nTraceback (most recent call last):\n  File \"/w/candidate\", line 9, in <module>\n  File \"/usr/lib/python3/random.py\", line 300, in choice\nIndexError: list index out of range\n";
        assert_eq!(
            extract_error_context(trace, Some(1)),
            ("list index out of range".to_string(), Some(9))
        );
    }

    #[test]
    fn syntax_error() {
        let trace = "  File \"/w/candidate\", line 4\n    x = (\n        ^\nSyntaxError: '(' was never closed\n";
        assert_eq!(
            extract_error_context(trace, Some(1)),
            ("'(' was never closed".to_string(), Some(4))
        );
    }

    #[test]
    fn unstructured_output_uses_last_line() {
        assert_eq!(extract_error_context("something odd\nsegfault", Some(139)), ("segfault".to_string(), None));
    }
}
