//! Homogeneous self-dual interior-point method with Nesterov–Todd scaling
//! and a Mehrotra predictor–corrector.
//!
//! The embedding variables are `(x, y, s, τ, κ)`; the iterate converges to a
//! solution `(x/τ, y/τ, s/τ)` or, when `τ → 0`, to an infeasibility
//! certificate. Directions come from a dense LU of the scaled KKT system,
//! which is small for every problem in this crate.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

use super::cones::{identity, is_interior, jordan, jordan_div, max_step, scaling, Scaling};
use super::{Cone, ConicProgram, SolveOptions, SolveReport, SolveStatus, VarBlock};
use crate::error::Result;

const STEP_FRACTION: f64 = 0.99;
const MIN_STEP: f64 = 1e-11;

struct Problem {
    blocks: Vec<(Cone, VarBlock)>,
    a: DMatrix<f64>,
    at: DMatrix<f64>,
    b: DVector<f64>,
    c: DVector<f64>,
    degree: usize,
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dense_a(prog: &ConicProgram) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(prog.num_rows(), prog.num_vars);
    for &(i, j, v) in &prog.a {
        a[(i, j)] += v;
    }
    a
}

struct Scalings {
    per_block: Vec<Scaling>,
    lambda: DVector<f64>,
}

impl Scalings {
    fn compute(p: &Problem, x: &DVector<f64>, s: &DVector<f64>) -> Option<Self> {
        let mut per_block = Vec::with_capacity(p.blocks.len());
        let mut lambda = DVector::zeros(x.len());
        for &(cone, blk) in &p.blocks {
            let r = blk.start..blk.start + blk.len;
            let (sc, lam) = scaling(cone, &x.as_slice()[r.clone()], &s.as_slice()[r.clone()])?;
            lambda.as_mut_slice()[r].copy_from_slice(&lam);
            per_block.push(sc);
        }
        Some(Self { per_block, lambda })
    }

    fn map(&self, p: &Problem, u: &DVector<f64>, f: impl Fn(&Scaling, &[f64]) -> Vec<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(u.len());
        for (sc, &(_, blk)) in self.per_block.iter().zip(&p.blocks) {
            let r = blk.start..blk.start + blk.len;
            out.as_mut_slice()[r.clone()].copy_from_slice(&f(sc, &u.as_slice()[r]));
        }
        out
    }

    fn w(&self, p: &Problem, u: &DVector<f64>) -> DVector<f64> {
        self.map(p, u, |sc, v| sc.w(v))
    }
    fn wt(&self, p: &Problem, u: &DVector<f64>) -> DVector<f64> {
        self.map(p, u, |sc, v| sc.wt(v))
    }
    fn winv(&self, p: &Problem, u: &DVector<f64>) -> DVector<f64> {
        self.map(p, u, |sc, v| sc.winv(v))
    }
    fn winvt(&self, p: &Problem, u: &DVector<f64>) -> DVector<f64> {
        self.map(p, u, |sc, v| sc.winvt(v))
    }
}

fn blockwise(p: &Problem, u: &DVector<f64>, v: &DVector<f64>, f: impl Fn(Cone, &[f64], &[f64]) -> Vec<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(u.len());
    for &(cone, blk) in &p.blocks {
        let r = blk.start..blk.start + blk.len;
        let z = f(cone, &u.as_slice()[r.clone()], &v.as_slice()[r.clone()]);
        out.as_mut_slice()[r].copy_from_slice(&z);
    }
    out
}

/// Factorization of the reduced Newton system
///
/// ```text
/// [ −(WᵀW)⁻¹  Aᵀ ] [dx]   [r₁]
/// [   A       0  ] [dy] = [r₂]
/// ```
///
/// in its scaled form: with `u = W⁻ᵀ dx` and `B = A Wᵀ` the matrix becomes
/// `[−I Bᵀ; B 0]`, whose conditioning grows like `‖W‖²` rather than `‖W‖⁴`.
/// The bottom-right block carries a small static regularization; solutions
/// are refined against the unregularized matrix.
struct Kkt<'a> {
    p: &'a Problem,
    sc: &'a Scalings,
    k: DMatrix<f64>,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    n: usize,
}

impl<'a> Kkt<'a> {
    fn new(p: &'a Problem, sc: &'a Scalings) -> Self {
        let n = p.a.ncols();
        let m = p.a.nrows();
        // Column i of Bᵀ is W applied to row i of A.
        let mut bt = DMatrix::zeros(n, m);
        for i in 0..m {
            let row = p.at.column(i).into_owned();
            bt.set_column(i, &sc.w(p, &row));
        }
        let mut k = DMatrix::zeros(n + m, n + m);
        k.view_mut((0, 0), (n, n)).fill_with_identity();
        k.view_mut((0, 0), (n, n)).neg_mut();
        k.view_mut((0, n), (n, m)).copy_from(&bt);
        k.view_mut((n, 0), (m, n)).copy_from(&bt.transpose());
        let mut kr = k.clone();
        for i in n..n + m {
            kr[(i, i)] += 1e-14;
        }
        Self { p, sc, lu: kr.lu(), k, n }
    }

    /// Solves for `(dx, dy)` given the two right-hand sides.
    fn solve(&self, r1: &DVector<f64>, r2: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
        let mut rhs = DVector::zeros(self.k.nrows());
        rhs.rows_mut(0, self.n).copy_from(&self.sc.w(self.p, r1));
        rhs.rows_mut(self.n, r2.len()).copy_from(r2);
        let mut z = self.lu.solve(&rhs)?;
        let scale = 1.0 + inf_norm(&rhs);
        for _ in 0..5 {
            let res = &rhs - &self.k * &z;
            if inf_norm(&res) <= 1e-15 * scale {
                break;
            }
            z += self.lu.solve(&res)?;
        }
        if z.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let u = z.rows(0, self.n).into_owned();
        let dx = self.sc.wt(self.p, &u);
        let dy = z.rows(self.n, r2.len()).into_owned();
        Some((dx, dy))
    }
}

struct Direction {
    dx: DVector<f64>,
    dy: DVector<f64>,
    ds: DVector<f64>,
    dtau: f64,
    dkappa: f64,
}

struct Iterate {
    x: DVector<f64>,
    y: DVector<f64>,
    s: DVector<f64>,
    tau: f64,
    kappa: f64,
}

struct Residuals {
    rp: DVector<f64>,
    rd: DVector<f64>,
    rg: f64,
}

/// Solves the Newton system for a given complementarity target.
///
/// `xi` is `λ⧵r_c` for the cone part and `rtau` the target for `τκ`;
/// `(dx1, dy1)` is the response to a unit change in `τ`.
#[allow(clippy::too_many_arguments)]
fn direction(
    p: &Problem,
    it: &Iterate,
    res: &Residuals,
    sc: &Scalings,
    kkt: &Kkt,
    dx1: &DVector<f64>,
    dy1: &DVector<f64>,
    eta: f64,
    xi: &DVector<f64>,
    rtau: f64,
) -> Option<Direction> {
    let r1 = -(&res.rd * eta) - sc.winv(p, xi);
    let r2 = -(&res.rp * eta);
    let (dx2, dy2) = kkt.solve(&r1, &r2)?;
    let num = -eta * res.rg - p.c.dot(&dx2) + p.b.dot(&dy2) - rtau / it.tau;
    let den = p.c.dot(dx1) - p.b.dot(dy1) - it.kappa / it.tau;
    let dtau = num / den;
    if !dtau.is_finite() {
        return None;
    }
    let dy = dy1 * dtau + dy2;
    let dx = dx1 * dtau + dx2;
    let ds = -(&res.rd * eta) - &p.at * &dy + &p.c * dtau;
    let dkappa = (rtau - it.kappa * dtau) / it.tau;
    Some(Direction { dx, dy, ds, dtau, dkappa })
}

fn step_length(p: &Problem, it: &Iterate, d: &Direction) -> f64 {
    let mut alpha = f64::INFINITY;
    for &(cone, blk) in &p.blocks {
        let r = blk.start..blk.start + blk.len;
        alpha = alpha.min(max_step(cone, &it.x.as_slice()[r.clone()], &d.dx.as_slice()[r.clone()]));
        alpha = alpha.min(max_step(cone, &it.s.as_slice()[r.clone()], &d.ds.as_slice()[r]));
    }
    if d.dtau < 0.0 {
        alpha = alpha.min(-it.tau / d.dtau);
    }
    if d.dkappa < 0.0 {
        alpha = alpha.min(-it.kappa / d.dkappa);
    }
    alpha
}

fn stays_interior(p: &Problem, it: &Iterate, d: &Direction, alpha: f64) -> bool {
    if !(it.tau + alpha * d.dtau > 0.0 && it.kappa + alpha * d.dkappa > 0.0) {
        return false;
    }
    let x = &it.x + &d.dx * alpha;
    let s = &it.s + &d.ds * alpha;
    p.blocks.iter().all(|&(cone, blk)| {
        let r = blk.start..blk.start + blk.len;
        is_interior(cone, &x.as_slice()[r.clone()]) && is_interior(cone, &s.as_slice()[r])
    })
}

/// Solves `prog`; see the module docs for the algorithm.
pub fn solve(prog: &ConicProgram, opts: &SolveOptions) -> Result<SolveReport> {
    prog.validate()?;
    let n = prog.num_vars;
    let a0 = dense_a(prog);
    let b0 = DVector::from_column_slice(&prog.b);
    let c0 = DVector::from_vec(prog.objective_dense());
    let rows = b0.len();

    // Row equilibration and scalar scaling of b and c.
    let mut row_scale = vec![1.0; rows];
    let mut a = a0.clone();
    let mut b = b0.clone();
    for i in 0..rows {
        let nrm = a.row(i).norm();
        if nrm > 0.0 {
            row_scale[i] = 1.0 / nrm;
            a.row_mut(i).scale_mut(1.0 / nrm);
            b[i] /= nrm;
        }
    }
    let sb = inf_norm(&b).max(1.0);
    let sc_c = inf_norm(&c0).max(1.0);
    b /= sb;
    let c = &c0 / sc_c;
    let blocks = prog.blocks();
    let degree = prog.cones.iter().map(Cone::degree).sum::<usize>();
    let p = Problem {
        at: a.transpose(),
        a,
        b,
        c,
        blocks,
        degree,
    };

    let mut e = DVector::zeros(n);
    for &(cone, blk) in &p.blocks {
        identity(cone, &mut e.as_mut_slice()[blk.start..blk.start + blk.len]);
    }
    let mut it = Iterate {
        x: e.clone(),
        y: DVector::zeros(rows),
        s: e.clone(),
        tau: 1.0,
        kappa: 1.0,
    };

    let b0_norm = inf_norm(&b0);
    let c0_norm = inf_norm(&c0);
    let unscale = |it: &Iterate| {
        let x = &it.x * (sb / it.tau);
        let y = DVector::from_iterator(rows, (0..rows).map(|i| it.y[i] * row_scale[i] * sc_c / it.tau));
        let s = &it.s * (sc_c / it.tau);
        (x, y, s)
    };
    let measure = |x: &DVector<f64>, y: &DVector<f64>, s: &DVector<f64>| {
        let pres = inf_norm(&(&a0 * x - &b0)) / (1.0 + b0_norm);
        let dres = inf_norm(&(a0.tr_mul(y) + s - &c0)) / (1.0 + c0_norm);
        let pobj = c0.dot(x);
        let dobj = b0.dot(y);
        let gap = (pobj - dobj).abs() / pobj.abs().max(1.0);
        (pres, dres, pobj, dobj, gap)
    };

    let report = |status: SolveStatus, it: &Iterate, iters: usize| -> SolveReport {
        let (x, y, s) = unscale(it);
        let (pres, dres, pobj, dobj, gap) = measure(&x, &y, &s);
        SolveReport {
            status,
            objective: pobj,
            dual_objective: dobj,
            x: x.as_slice().to_vec(),
            y: y.as_slice().to_vec(),
            s: s.as_slice().to_vec(),
            primal_residual: pres,
            dual_residual: dres,
            gap,
            iterations: iters,
        }
    };

    let mut best: Option<(f64, Iterate, usize)> = None;
    let mut stalls = 0;
    for iter in 0..=opts.max_iters {
        let res = Residuals {
            rp: &p.a * &it.x - &p.b * it.tau,
            rd: &p.at * &it.y + &it.s - &p.c * it.tau,
            rg: p.c.dot(&it.x) - p.b.dot(&it.y) + it.kappa,
        };
        let (xh, yh, shat) = unscale(&it);
        let (pres, dres, _, _, gap) = measure(&xh, &yh, &shat);
        if pres <= opts.tol_feas && dres <= opts.tol_feas && gap <= opts.tol_gap {
            return Ok(report(SolveStatus::Optimal, &it, iter));
        }
        let merit = pres.max(dres).max(gap);
        if merit.is_finite() && best.as_ref().is_none_or(|(m, _, _)| merit < *m) {
            best = Some((
                merit,
                Iterate {
                    x: it.x.clone(),
                    y: it.y.clone(),
                    s: it.s.clone(),
                    tau: it.tau,
                    kappa: it.kappa,
                },
                iter,
            ));
        }

        // Infeasibility certificates, measured on the scaled data.
        let by = p.b.dot(&it.y);
        let cx = p.c.dot(&it.x);
        if it.tau < it.kappa {
            if by > 0.0 && inf_norm(&(&p.at * &it.y + &it.s)) / by <= opts.tol_feas {
                let mut r = report(SolveStatus::Infeasible, &it, iter);
                let yc = DVector::from_iterator(rows, (0..rows).map(|i| it.y[i] * row_scale[i] / by));
                r.y = yc.as_slice().to_vec();
                r.x.clear();
                return Ok(r);
            }
            if cx < 0.0 && inf_norm(&(&p.a * &it.x)) / -cx <= opts.tol_feas {
                let mut r = report(SolveStatus::Unbounded, &it, iter);
                r.x = (&it.x * (1.0 / -cx)).as_slice().to_vec();
                return Ok(r);
            }
        }
        if iter == opts.max_iters {
            break;
        }

        let Some(sc) = Scalings::compute(&p, &it.x, &it.s) else {
            return Ok(finish(SolveStatus::NumericalFailure, best, &it, iter, &report));
        };
        let kkt = Kkt::new(&p, &sc);
        let Some((dx1, dy1)) = kkt.solve(&p.c, &p.b) else {
            return Ok(finish(SolveStatus::NumericalFailure, best, &it, iter, &report));
        };
        let mu = (it.x.dot(&it.s) + it.tau * it.kappa) / (p.degree as f64 + 1.0);
        let lam = &sc.lambda;

        // Predictor.
        let xi_a = -lam.clone();
        let Some(da) = direction(&p, &it, &res, &sc, &kkt, &dx1, &dy1, 1.0, &xi_a, -it.tau * it.kappa) else {
            return Ok(finish(SolveStatus::NumericalFailure, best, &it, iter, &report));
        };
        let alpha_a = step_length(&p, &it, &da).min(1.0);
        let sigma = (1.0 - alpha_a).powi(3).clamp(0.0, 1.0);

        // Corrector.
        let mut target = e.clone() * (sigma * mu);
        target -= blockwise(&p, lam, lam, jordan);
        let wdx = sc.winvt(&p, &da.dx);
        let wds = sc.w(&p, &da.ds);
        target -= blockwise(&p, &wdx, &wds, jordan);
        let xi = blockwise(&p, lam, &target, jordan_div);
        let rtau = sigma * mu - it.tau * it.kappa - da.dtau * da.dkappa;
        let Some(d) = direction(&p, &it, &res, &sc, &kkt, &dx1, &dy1, 1.0 - sigma, &xi, rtau) else {
            return Ok(finish(SolveStatus::NumericalFailure, best, &it, iter, &report));
        };
        let mut alpha = (STEP_FRACTION * step_length(&p, &it, &d)).min(1.0);
        // Rounding in the step-length computation can land exactly on the
        // boundary; back off until the trial point is strictly interior.
        while alpha > MIN_STEP && !stays_interior(&p, &it, &d, alpha) {
            alpha *= 0.8;
        }
        if !(alpha > MIN_STEP) {
            stalls += 1;
            if stalls >= 3 {
                return Ok(finish(SolveStatus::NumericalFailure, best, &it, iter, &report));
            }
            continue;
        }
        it.x += &d.dx * alpha;
        it.y += &d.dy * alpha;
        it.s += &d.ds * alpha;
        it.tau += d.dtau * alpha;
        it.kappa += d.dkappa * alpha;
        if !(it.tau > 0.0 && it.kappa > 0.0) || it.x.iter().any(|v| !v.is_finite()) {
            return Ok(finish(SolveStatus::NumericalFailure, best, &it, iter, &report));
        }
    }
    Ok(finish(SolveStatus::IterationLimit, best, &it, opts.max_iters, &report))
}

fn finish(
    status: SolveStatus,
    best: Option<(f64, Iterate, usize)>,
    it: &Iterate,
    iter: usize,
    report: &dyn Fn(SolveStatus, &Iterate, usize) -> SolveReport,
) -> SolveReport {
    let mut r = match best {
        Some((_, b, _)) => report(status, &b, iter),
        None => report(status, it, iter),
    };
    r.iterations = iter;
    r
}
