use std::fmt::Write as _;

use super::{CnfError, CnfFormula, Lit};

fn parse_err(line: usize, msg: impl Into<String>) -> CnfError {
    CnfError::Parse {
        line,
        msg: msg.into(),
    }
}

/// Parses DIMACS CNF. Clauses may span lines; duplicate literals and
/// tautologies are kept as written.
pub fn parse_dimacs(text: &[u8]) -> Result<CnfFormula, CnfError> {
    let text = std::str::from_utf8(text).map_err(|e| parse_err(0, format!("invalid UTF-8: {e}")))?;
    let mut header: Option<(u32, usize)> = None;
    let mut formula = CnfFormula::empty(0);
    let mut current: Vec<Lit> = Vec::new();
    let mut clause_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with('%') {
            // SATLIB end-of-data marker.
            break;
        }
        if line.starts_with('p') {
            if header.is_some() {
                return Err(parse_err(line_no, "duplicate problem line"));
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 || fields[0] != "p" || fields[1] != "cnf" {
                return Err(parse_err(line_no, format!("malformed header `{line}`")));
            }
            let vars = fields[2]
                .parse::<u32>()
                .map_err(|_| parse_err(line_no, format!("bad variable count `{}`", fields[2])))?;
            let clauses = fields[3]
                .parse::<usize>()
                .map_err(|_| parse_err(line_no, format!("bad clause count `{}`", fields[3])))?;
            header = Some((vars, clauses));
            formula = CnfFormula::empty(vars);
            continue;
        }
        let Some((num_vars, _)) = header else {
            return Err(parse_err(line_no, "clause before `p cnf` header"));
        };
        for token in line.split_whitespace() {
            let value: i64 = token
                .parse()
                .map_err(|_| parse_err(line_no, format!("bad literal `{token}`")))?;
            if value == 0 {
                if current.is_empty() {
                    return Err(parse_err(line_no, "zero-length clause"));
                }
                formula
                    .push_clause(&current)
                    .map_err(|e| parse_err(clause_line, e.to_string()))?;
                current.clear();
                continue;
            }
            if value.unsigned_abs() > num_vars as u64 {
                return Err(parse_err(
                    line_no,
                    format!("literal {value} exceeds declared {num_vars} variables"),
                ));
            }
            if current.is_empty() {
                clause_line = line_no;
            }
            current.push(Lit(value as i32));
        }
    }

    let last_line = text.lines().count();
    let Some((_, expected)) = header else {
        return Err(parse_err(last_line, "missing `p cnf` header"));
    };
    if !current.is_empty() {
        return Err(parse_err(last_line, "last clause is not terminated by 0"));
    }
    if formula.num_clauses() != expected {
        return Err(parse_err(
            last_line,
            format!(
                "header declares {expected} clauses but {} were read",
                formula.num_clauses()
            ),
        ));
    }
    Ok(formula)
}

pub fn write_dimacs(f: &CnfFormula) -> Vec<u8> {
    let mut out = String::with_capacity(16 + f.num_literals() * 4);
    let _ = writeln!(out, "p cnf {} {}", f.num_vars(), f.num_clauses());
    for clause in f.clauses() {
        for lit in clause {
            let _ = write!(out, "{lit} ");
        }
        out.push_str("0\n");
    }
    out.into_bytes()
}

/// Parses whitespace-separated signed literals terminated by a single `0`.
///
/// This is the grammar of candidate output and of phase files. Tokens after
/// the terminator are rejected.
pub fn parse_literal_stream(text: &str) -> Result<Vec<Lit>, String> {
    let mut lits = Vec::new();
    let mut tokens = text.split_whitespace();
    for token in tokens.by_ref() {
        let value: i32 = token
            .parse()
            .map_err(|_| format!("bad literal `{token}`"))?;
        if value == 0 {
            return match tokens.next() {
                None => Ok(lits),
                Some(extra) => Err(format!("unexpected `{extra}` after terminator")),
            };
        }
        lits.push(Lit::from_dimacs(value).ok_or_else(|| format!("bad literal `{token}`"))?);
    }
    Err("no terminator".to_string())
}

/// One literal per line followed by `0`, the inverse of [`parse_literal_stream`].
pub fn write_literals(lits: &[Lit]) -> String {
    let mut out = String::with_capacity(lits.len() * 5 + 2);
    for lit in lits {
        let _ = writeln!(out, "{lit}");
    }
    out.push_str("0\n");
    out
}
