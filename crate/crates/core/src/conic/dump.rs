//! Plain-text sparse-triplet form of a [`ConicProgram`].
//!
//! ```text
//! conic-triplet v1
//! vars <n>
//! rows <m>
//! cones <k>
//! <nonneg|soc|psd> <size>          (k lines, in variable order)
//! objective <nnz>
//! <col> <value>                    (nnz lines)
//! a <nnz>
//! <row> <col> <value>              (nnz lines)
//! b <m>
//! <value>                          (m lines)
//! names <count>
//! <start> <len> <name>             (count lines; name runs to end of line)
//! end
//! ```
//!
//! Indices are 0-based. `psd <n>` is a cone of order `n` occupying
//! `n(n+1)/2` variables in `svec` order (lower triangle by columns,
//! off-diagonals scaled by √2). Values are written with `{:e}`, the shortest
//! decimal that parses back to the same `f64`, so a dump round-trips exactly.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use super::{Cone, ConicProgram, VarBlock};
use crate::error::{Error, Result};

pub const HEADER: &str = "conic-triplet v1";

pub fn to_triplet_text(prog: &ConicProgram) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{HEADER}");
    let _ = writeln!(out, "vars {}", prog.num_vars);
    let _ = writeln!(out, "rows {}", prog.num_rows());
    let _ = writeln!(out, "cones {}", prog.cones.len());
    for c in &prog.cones {
        let _ = match *c {
            Cone::NonNegative(n) => writeln!(out, "nonneg {n}"),
            Cone::SecondOrder(d) => writeln!(out, "soc {d}"),
            Cone::Psd(n) => writeln!(out, "psd {n}"),
        };
    }
    let _ = writeln!(out, "objective {}", prog.objective.len());
    for &(j, v) in &prog.objective {
        let _ = writeln!(out, "{j} {v:e}");
    }
    let _ = writeln!(out, "a {}", prog.a.len());
    for &(i, j, v) in &prog.a {
        let _ = writeln!(out, "{i} {j} {v:e}");
    }
    let _ = writeln!(out, "b {}", prog.b.len());
    for v in &prog.b {
        let _ = writeln!(out, "{v:e}");
    }
    let _ = writeln!(out, "names {}", prog.names.len());
    for (name, blk) in &prog.names {
        let _ = writeln!(out, "{} {} {}", blk.start, blk.len, name);
    }
    out.push_str("end\n");
    out
}

struct Lines<'a> {
    inner: core::iter::Enumerate<core::str::Lines<'a>>,
}

fn parse_err(line: usize, what: &str) -> Error {
    Error::InvalidParameter(format!("triplet dump line {}: {}", line + 1, what))
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, &'a str)> {
        self.inner
            .next()
            .map(|(i, l)| (i, l.trim_end()))
            .ok_or_else(|| Error::InvalidParameter("triplet dump ended early".to_string()))
    }

    fn keyed(&mut self, key: &str) -> Result<usize> {
        let (i, l) = self.next()?;
        let mut it = l.split_whitespace();
        if it.next() != Some(key) {
            return Err(parse_err(i, &format!("expected `{key}`")));
        }
        it.next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| parse_err(i, "expected a count"))
    }

    fn fields<const K: usize>(&mut self) -> Result<(usize, [&'a str; K])> {
        let (i, l) = self.next()?;
        let mut out = [""; K];
        let mut it = l.split_whitespace();
        for slot in out.iter_mut() {
            *slot = it.next().ok_or_else(|| parse_err(i, "missing field"))?;
        }
        if it.next().is_some() {
            return Err(parse_err(i, "trailing fields"));
        }
        Ok((i, out))
    }
}

fn num<T: core::str::FromStr>(line: usize, s: &str) -> Result<T> {
    s.parse().map_err(|_| parse_err(line, &format!("cannot parse `{s}`")))
}

pub fn parse_triplet_text(text: &str) -> Result<ConicProgram> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (i, head) = lines.next()?;
    if head != HEADER {
        return Err(parse_err(i, "bad header"));
    }
    let num_vars = lines.keyed("vars")?;
    let rows = lines.keyed("rows")?;
    let k = lines.keyed("cones")?;
    let mut cones = Vec::with_capacity(k);
    for _ in 0..k {
        let (i, [kind, size]) = lines.fields::<2>()?;
        let size: usize = num(i, size)?;
        cones.push(match kind {
            "nonneg" => Cone::NonNegative(size),
            "soc" => Cone::SecondOrder(size),
            "psd" => Cone::Psd(size),
            _ => return Err(parse_err(i, "unknown cone kind")),
        });
    }
    let nnz = lines.keyed("objective")?;
    let mut objective = Vec::with_capacity(nnz);
    for _ in 0..nnz {
        let (i, [j, v]) = lines.fields::<2>()?;
        objective.push((num(i, j)?, num(i, v)?));
    }
    let nnz = lines.keyed("a")?;
    let mut a = Vec::with_capacity(nnz);
    for _ in 0..nnz {
        let (i, [r, c, v]) = lines.fields::<3>()?;
        a.push((num(i, r)?, num(i, c)?, num(i, v)?));
    }
    let m = lines.keyed("b")?;
    if m != rows {
        return Err(Error::DimensionMismatch { expected: rows, found: m });
    }
    let mut b = Vec::with_capacity(m);
    for _ in 0..m {
        let (i, [v]) = lines.fields::<1>()?;
        b.push(num(i, v)?);
    }
    let count = lines.keyed("names")?;
    let mut names = Vec::with_capacity(count);
    for _ in 0..count {
        let (i, l) = lines.next()?;
        let mut it = l.splitn(3, ' ');
        let start = num(i, it.next().unwrap_or(""))?;
        let len = num(i, it.next().unwrap_or(""))?;
        let name = it.next().ok_or_else(|| parse_err(i, "missing name"))?;
        names.push((name.to_string(), VarBlock { start, len }));
    }
    let (i, end) = lines.next()?;
    if end != "end" {
        return Err(parse_err(i, "expected `end`"));
    }
    let prog = ConicProgram {
        num_vars,
        cones,
        objective,
        a,
        b,
        names,
    };
    prog.validate()?;
    Ok(prog)
}
