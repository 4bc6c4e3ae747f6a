//! Real conic programs in standard form and a dense interior-point solver.
//!
//! ```text
//! minimize    cᵀx
//! subject to  A x = b,   x ∈ K = K₁ × K₂ × …
//! ```
//!
//! Each `Kᵢ` is a nonnegative orthant, a second-order cone
//! `{(t, u) : ‖u‖ ≤ t}`, or a PSD cone stored in `svec` form. Every variable
//! lives in exactly one cone; cones occupy consecutive slices in the order
//! they were added.

mod cones;
pub mod complexity;
pub mod dump;
mod ipm;
pub mod rank_one;
pub mod svec;

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

pub use complexity::{complexity_estimate, ComplexityEstimate};
pub use ipm::solve;
pub use rank_one::{extract_rank_one, randomize_rank_one, RankOne};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Cone {
    /// `n` independent nonnegative variables.
    NonNegative(usize),
    /// Second-order cone of total dimension `d` (first entry is the bound).
    SecondOrder(usize),
    /// PSD matrices of order `n`, `n(n+1)/2` packed variables.
    Psd(usize),
}

impl Cone {
    pub fn dim(&self) -> usize {
        match *self {
            Cone::NonNegative(n) | Cone::SecondOrder(n) => n,
            Cone::Psd(n) => svec::packed_len(n),
        }
    }

    /// Barrier degree.
    pub fn degree(&self) -> usize {
        match *self {
            Cone::NonNegative(n) => n,
            Cone::SecondOrder(_) => 1,
            Cone::Psd(n) => n,
        }
    }
}

/// A contiguous slice of variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VarBlock {
    pub start: usize,
    pub len: usize,
}

impl VarBlock {
    pub fn at(&self, i: usize) -> usize {
        debug_assert!(i < self.len);
        self.start + i
    }

    pub fn slice<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        &x[self.start..self.start + self.len]
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConicProgram {
    pub num_vars: usize,
    pub cones: Vec<Cone>,
    /// Sparse objective `(column, value)`; duplicates are summed.
    pub objective: Vec<(usize, f64)>,
    /// Sparse constraint matrix `(row, column, value)`; duplicates are summed.
    pub a: Vec<(usize, usize, f64)>,
    pub b: Vec<f64>,
    /// Human-readable names for variable slices.
    pub names: Vec<(String, VarBlock)>,
}

impl ConicProgram {
    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    pub fn blocks(&self) -> Vec<(Cone, VarBlock)> {
        let mut start = 0;
        self.cones
            .iter()
            .map(|&c| {
                let blk = VarBlock { start, len: c.dim() };
                start += c.dim();
                (c, blk)
            })
            .collect()
    }

    pub fn objective_dense(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.num_vars];
        for &(j, v) in &self.objective {
            c[j] += v;
        }
        c
    }

    pub fn count_cones(&self, pred: impl Fn(&Cone) -> bool) -> usize {
        self.cones.iter().filter(|c| pred(c)).count()
    }

    pub fn validate(&self) -> crate::Result<()> {
        use crate::error::Error;
        let covered: usize = self.cones.iter().map(Cone::dim).sum();
        if covered != self.num_vars {
            return Err(Error::DimensionMismatch {
                expected: self.num_vars,
                found: covered,
            });
        }
        let m = self.b.len();
        for &(i, j, v) in &self.a {
            if i >= m {
                return Err(Error::IndexOutOfRange { index: i, limit: m });
            }
            if j >= self.num_vars {
                return Err(Error::IndexOutOfRange {
                    index: j,
                    limit: self.num_vars,
                });
            }
            if !v.is_finite() {
                return Err(crate::error::invalid("non-finite constraint coefficient"));
            }
        }
        for &(j, _) in &self.objective {
            if j >= self.num_vars {
                return Err(Error::IndexOutOfRange {
                    index: j,
                    limit: self.num_vars,
                });
            }
        }
        for c in &self.cones {
            if let Cone::SecondOrder(0) = c {
                return Err(crate::error::invalid("second-order cone of dimension 0"));
            }
        }
        Ok(())
    }

    /// Evaluates `cᵀx`.
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().map(|&(j, v)| v * x[j]).sum()
    }
}

/// Incremental construction of a [`ConicProgram`].
#[derive(Debug, Clone, Default)]
pub struct ConicBuilder {
    prog: ConicProgramParts,
}

#[derive(Debug, Clone, Default)]
struct ConicProgramParts {
    num_vars: usize,
    cones: Vec<Cone>,
    objective: Vec<(usize, f64)>,
    a: Vec<(usize, usize, f64)>,
    b: Vec<f64>,
    names: Vec<(String, VarBlock)>,
}

impl ConicBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_cone(&mut self, cone: Cone) -> VarBlock {
        let blk = VarBlock {
            start: self.prog.num_vars,
            len: cone.dim(),
        };
        self.prog.num_vars += cone.dim();
        self.prog.cones.push(cone);
        blk
    }

    pub fn add_named_cone(&mut self, cone: Cone, name: impl Into<String>) -> VarBlock {
        let blk = self.add_cone(cone);
        self.prog.names.push((name.into(), blk));
        blk
    }

    /// Adds the row `Σ coef·x = rhs` and returns its index.
    pub fn add_equality(&mut self, terms: &[(usize, f64)], rhs: f64) -> usize {
        let row = self.prog.b.len();
        for &(j, v) in terms {
            if v != 0.0 {
                self.prog.a.push((row, j, v));
            }
        }
        self.prog.b.push(rhs);
        row
    }

    pub fn add_objective(&mut self, col: usize, coef: f64) {
        if coef != 0.0 {
            self.prog.objective.push((col, coef));
        }
    }

    pub fn num_rows(&self) -> usize {
        self.prog.b.len()
    }

    pub fn num_vars(&self) -> usize {
        self.prog.num_vars
    }

    pub fn build(self) -> ConicProgram {
        let p = self.prog;
        ConicProgram {
            num_vars: p.num_vars,
            cones: p.cones,
            objective: p.objective,
            a: p.a,
            b: p.b,
            names: p.names,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
    IterationLimit,
}

impl core::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::NumericalFailure => "numerical_failure",
            SolveStatus::IterationLimit => "iteration_limit",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolveOptions {
    pub tol_feas: f64,
    pub tol_gap: f64,
    pub max_iters: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol_feas: 1e-8,
            tol_gap: 1e-8,
            max_iters: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolveReport {
    pub status: SolveStatus,
    /// `cᵀx` at the returned point.
    pub objective: f64,
    /// `bᵀy`, a lower bound on the optimum when `y` is dual feasible.
    pub dual_objective: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub s: Vec<f64>,
    /// `‖Ax − b‖∞ / (1 + ‖b‖∞)`.
    pub primal_residual: f64,
    /// `‖Aᵀy + s − c‖∞ / (1 + ‖c‖∞)`.
    pub dual_residual: f64,
    /// `|cᵀx − bᵀy| / max(1, |cᵀx|)`.
    pub gap: f64,
    pub iterations: usize,
}

impl SolveReport {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    /// Whether the point is accurate to `tol` even if the solver stopped
    /// short of its own tolerances.
    pub fn is_accurate_to(&self, tol: f64) -> bool {
        matches!(
            self.status,
            SolveStatus::Optimal | SolveStatus::NumericalFailure | SolveStatus::IterationLimit
        ) && self.primal_residual <= tol
            && self.dual_residual <= tol
            && self.gap <= tol
    }
}
