//! Plain-text problem dump for cross-checking against other solvers.
//!
//! ```text
//! num_vars 2
//! block_dims 3 1
//! num_equalities 1
//! objective 1 0
//! block 0 constant
//! <3 rows, row-major>
//! block 0 coeff 1
//! <3 rows, row-major>
//! equality 1 0:1 1:-1
//! ```
//!
//! Numbers use Rust's shortest round-trip formatting, so a dump reads back
//! bit-for-bit.

use std::fmt::Write as _;
use std::path::Path;

use super::{Equality, LmiBlock, SdpProblem, SymSparse};
use crate::error::{Error, Result};
use crate::linalg::RMat;

pub fn to_text(problem: &SdpProblem) -> String {
    let mut out = String::new();
    let join = |v: &mut dyn Iterator<Item = String>| v.collect::<Vec<_>>().join(" ");
    let _ = writeln!(out, "num_vars {}", problem.num_vars);
    let _ = writeln!(out, "block_dims {}", join(&mut problem.blocks.iter().map(|b| b.dim.to_string())));
    let _ = writeln!(out, "num_equalities {}", problem.equalities.len());
    let _ = writeln!(out, "objective {}", join(&mut problem.objective.iter().map(|v| format!("{v:?}"))));
    let write_matrix = |out: &mut String, m: &RMat| {
        for i in 0..m.nrows() {
            let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:?}", m[(i, j)])).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
    };
    for (b, blk) in problem.blocks.iter().enumerate() {
        let _ = writeln!(out, "block {b} constant");
        write_matrix(&mut out, &blk.constant);
        for (var, f) in &blk.coeffs {
            let _ = writeln!(out, "block {b} coeff {var}");
            write_matrix(&mut out, &f.to_dense(blk.dim));
        }
    }
    for eq in &problem.equalities {
        let terms: Vec<String> = eq.coeffs.iter().map(|(i, a)| format!("{i}:{a:?}")).collect();
        let _ = writeln!(out, "equality {:?} {}", eq.rhs, terms.join(" "));
    }
    out
}

pub fn write_problem(problem: &SdpProblem, path: &Path) -> Result<()> {
    std::fs::write(path, to_text(problem))
        .map_err(|e| Error::Io { path: path.display().to_string(), msg: e.to_string() })
}

pub fn read_problem(path: &Path) -> Result<SdpProblem> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io { path: path.display().to_string(), msg: e.to_string() })?;
    from_text(&text)
}

fn parse_num<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Parse(format!("bad number `{s}`")))
}

pub fn from_text(text: &str) -> Result<SdpProblem> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let mut header = |key: &str| -> Result<Vec<String>> {
        let line = lines.next().ok_or_else(|| Error::Parse(format!("missing `{key}`")))?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(key) {
            return Err(Error::Parse(format!("expected `{key}`, got `{line}`")));
        }
        Ok(parts.map(str::to_string).collect())
    };
    let num_vars: usize = parse_num(&header("num_vars")?.join(""))?;
    let dims: Vec<usize> = header("block_dims")?.iter().map(|s| parse_num(s)).collect::<Result<_>>()?;
    let num_eq: usize = parse_num(&header("num_equalities")?.join(""))?;
    let objective: Vec<f64> = header("objective")?.iter().map(|s| parse_num(s)).collect::<Result<_>>()?;

    let mut problem = SdpProblem::new(objective);
    problem.num_vars = num_vars;
    problem.blocks = dims.iter().map(|&d| LmiBlock::new(d)).collect();
    let rest: Vec<&str> = lines.collect();
    let mut k = 0;
    let read_matrix = |k: &mut usize, n: usize| -> Result<RMat> {
        let mut m = RMat::zeros(n, n);
        for i in 0..n {
            let row = rest.get(*k).ok_or_else(|| Error::Parse("truncated matrix".into()))?;
            *k += 1;
            let vals: Vec<f64> = row.split_whitespace().map(parse_num).collect::<Result<_>>()?;
            if vals.len() != n {
                return Err(Error::Parse(format!("matrix row has {} entries, expected {n}", vals.len())));
            }
            for (j, v) in vals.into_iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        Ok(m)
    };
    while k < rest.len() {
        let parts: Vec<&str> = rest[k].split_whitespace().collect();
        k += 1;
        match parts.as_slice() {
            ["block", b, "constant"] => {
                let b: usize = parse_num(b)?;
                let dim = dims.get(b).copied().ok_or_else(|| Error::Parse(format!("no block {b}")))?;
                problem.blocks[b].constant = read_matrix(&mut k, dim)?;
            }
            ["block", b, "coeff", var] => {
                let b: usize = parse_num(b)?;
                let var: usize = parse_num(var)?;
                let dim = dims.get(b).copied().ok_or_else(|| Error::Parse(format!("no block {b}")))?;
                let f = SymSparse::from_dense(&read_matrix(&mut k, dim)?);
                problem.blocks[b].coeffs.push((var, f));
            }
            ["equality", rhs, terms @ ..] => {
                let coeffs = terms
                    .iter()
                    .map(|t| {
                        let (i, a) = t.split_once(':').ok_or_else(|| Error::Parse(format!("bad term `{t}`")))?;
                        Ok((parse_num(i)?, parse_num(a)?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                problem.equalities.push(Equality { coeffs, rhs: parse_num(rhs)? });
            }
            _ => return Err(Error::Parse(format!("unexpected line `{}`", rest[k - 1]))),
        }
    }
    if problem.equalities.len() != num_eq {
        return Err(Error::Parse(format!("expected {num_eq} equalities, found {}", problem.equalities.len())));
    }
    problem.validate()?;
    Ok(problem)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_roundtrips() {
        let mut p = SdpProblem::new(vec![1.0, -0.1]);
        let mut blk = LmiBlock::new(2);
        blk.add_constant(1, 0, 1.0 / 3.0);
        blk.add(0, 0, 0, 1.0);
        blk.add(1, 1, 0, 0.7);
        p.blocks.push(blk);
        let mut scalar = LmiBlock::new(1);
        scalar.add(1, 0, 0, 1.0);
        p.blocks.push(scalar);
        p.add_equality(vec![(0, 1.0), (1, -1.0)], 0.25);

        let back = from_text(&to_text(&p)).unwrap();
        assert_eq!(back.num_vars, p.num_vars);
        assert_eq!(back.objective, p.objective);
        assert_eq!(back.equalities, p.equalities);
        for (a, b) in back.blocks.iter().zip(&p.blocks) {
            assert_eq!(a.constant, b.constant);
            for ((va, fa), (vb, fb)) in a.coeffs.iter().zip(&b.coeffs) {
                assert_eq!(va, vb);
                assert_eq!(fa.to_dense(a.dim), fb.to_dense(b.dim));
            }
        }
    }

    #[test]
    fn truncated_dump_is_rejected() {
        assert!(from_text("num_vars 1\nblock_dims 2\nnum_equalities 0\nobjective 1\nblock 0 constant\n1 0\n").is_err());
    }
}
