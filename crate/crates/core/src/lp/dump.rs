//! Plain-text LP dump for offline cross-checking.
//!
//! Layout (one item per line, whitespace separated):
//!
//! ```text
//! LP <n_vars> <n_eq> <n_ineq>
//! OBJ <c_0> ... <c_{n-1}>
//! BOUND <j> <lower> <upper>          (n lines)
//! EQ <rhs> <j>:<a_j> ...             (nonzeros only)
//! LE <rhs> <j>:<a_j> ...
//! END
//! ```
//!
//! Numbers use Rust's shortest round-trip formatting; `inf` marks an
//! unbounded upper limit.

use std::fmt::Write as _;

use super::{Constraint, LpProblem};
use crate::error::{Error, Result};

pub fn write_dump(p: &LpProblem) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "LP {} {} {}",
        p.n_vars,
        p.eq_constraints.len(),
        p.ineq_constraints.len()
    );
    out.push_str("OBJ");
    for c in &p.objective {
        let _ = write!(out, " {c}");
    }
    out.push('\n');
    for (j, (lo, hi)) in p.var_bounds.iter().enumerate() {
        let _ = writeln!(out, "BOUND {j} {lo} {hi}");
    }
    let rows = p
        .eq_constraints
        .iter()
        .map(|r| ("EQ", r))
        .chain(p.ineq_constraints.iter().map(|r| ("LE", r)));
    for (tag, row) in rows {
        let _ = write!(out, "{tag} {}", row.rhs);
        for (j, a) in row.coeffs.iter().enumerate() {
            if *a != 0.0 {
                let _ = write!(out, " {j}:{a}");
            }
        }
        out.push('\n');
    }
    out.push_str("END\n");
    out
}

pub fn parse_dump(text: &str) -> Result<LpProblem> {
    let bad = |line: usize, msg: &str| Error::MalformedLp(format!("dump line {}: {msg}", line + 1));
    let num = |line: usize, s: &str| -> Result<f64> {
        s.parse::<f64>().map_err(|_| bad(line, &format!("bad number {s:?}")))
    };
    let mut lines = text.lines().enumerate();
    let (l0, header) = lines.next().ok_or_else(|| bad(0, "empty dump"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 4 || h[0] != "LP" {
        return Err(bad(l0, "expected `LP n_vars n_eq n_ineq`"));
    }
    let dims: Vec<usize> = h[1..]
        .iter()
        .map(|s| s.parse().map_err(|_| bad(l0, "bad dimension")))
        .collect::<Result<_>>()?;
    let (n, n_eq, n_le) = (dims[0], dims[1], dims[2]);
    let mut p = LpProblem::new(n);

    for (ln, line) in lines {
        let mut it = line.split_whitespace();
        match it.next() {
            Some("OBJ") => {
                p.objective = it.map(|s| num(ln, s)).collect::<Result<_>>()?;
            }
            Some("BOUND") => {
                let j: usize = it
                    .next()
                    .and_then(|s| s.parse().ok())
                    .filter(|&j| j < n)
                    .ok_or_else(|| bad(ln, "bad bound index"))?;
                let lo = num(ln, it.next().ok_or_else(|| bad(ln, "missing lower"))?)?;
                let hi = num(ln, it.next().ok_or_else(|| bad(ln, "missing upper"))?)?;
                p.var_bounds[j] = (lo, hi);
            }
            Some(tag @ ("EQ" | "LE")) => {
                let rhs = num(ln, it.next().ok_or_else(|| bad(ln, "missing rhs"))?)?;
                let mut coeffs = vec![0.0; n];
                for term in it {
                    let (j, a) = term.split_once(':').ok_or_else(|| bad(ln, "bad term"))?;
                    let j: usize = j
                        .parse()
                        .ok()
                        .filter(|&j| j < n)
                        .ok_or_else(|| bad(ln, "bad column"))?;
                    coeffs[j] = num(ln, a)?;
                }
                let row = Constraint { coeffs, rhs };
                if tag == "EQ" {
                    p.eq_constraints.push(row);
                } else {
                    p.ineq_constraints.push(row);
                }
            }
            Some("END") => break,
            Some(other) => return Err(bad(ln, &format!("unknown record {other:?}"))),
            None => {}
        }
    }
    if p.eq_constraints.len() != n_eq || p.ineq_constraints.len() != n_le {
        return Err(Error::MalformedLp("row counts do not match header".into()));
    }
    p.validate()?;
    Ok(p)
}
