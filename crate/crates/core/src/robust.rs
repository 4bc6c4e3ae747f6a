//! Outage-constrained power minimization under covariance uncertainty.
//!
//! User `l` sees `C_l = Ĉ_l + Δ_l` with `Δ_l` Hermitian and entrywise
//! Gaussian. With `B_k = W_k/γ_k − Σ_{m>k} W_m` the chance constraint
//! `Pr{Tr(B_k C_l) ≥ σ²} ≥ 1 − ρ_k` becomes, for a Gaussian `Tr(B_k Δ_l)`,
//!
//! ```text
//! Φ_kl = Tr(B_k Ĉ_l) − σ² ≥ q_k ‖vec(B_k ⊙ Σ)‖,   q_k = √2 erf⁻¹(1 − 2ρ_k),
//! ```
//!
//! for every `l ≥ k`. The solver receives the second-order cone form of this
//! constraint multiplied through by `γ_k`; the equivalent linear matrix
//! inequality `C_kl ⪰ 0` of order `M² + 1` is available as
//! [`RobustForm::Lmi`] and as a numeric block through [`build_robust_lmi`].

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use rand_distr::{Distribution, StandardNormal};

use crate::channel::{sample_hermitian_error, sample_uncertainty, stream_rng, Stream, UncertaintyModel};
use crate::conic::rank_one::{DEFAULT_CANDIDATES, RANK_ONE_TOL};
use crate::conic::svec::{entry_scale, packed_len};
use crate::conic::{extract_rank_one, randomize_rank_one, solve, Cone, ConicBuilder, ConicProgram, SolveOptions, SolveStatus};
use crate::error::{invalid, Error, Result};
use crate::linalg::{outer, quad_form, trace_product, CMatrix, CVec, HermitianMatrix};
use crate::model::{scale_directions, BeamformerSet, SystemConfig};
use crate::sdr::{LiftedVars, RecoveryMethod};

/// A design counts as meeting its target when `η ≥ 1 − SATISFACTION_TOL`.
pub const SATISFACTION_TOL: f64 = 1e-6;
/// Width of the satisfaction-ratio histogram bins.
pub const ETA_BIN_WIDTH: f64 = 0.05;
/// Upper edge of the satisfaction-ratio histogram.
pub const ETA_MAX: f64 = 2.0;

const FRAC_2_SQRT_PI: f64 = core::f64::consts::FRAC_2_SQRT_PI;

/// Inverse error function on `(−1, 1)`.
///
/// A single-precision rational approximation refined by Halley steps on
/// `erf`.
pub fn erf_inverse(y: f64) -> Result<f64> {
    if !(y.abs() < 1.0) {
        return Err(invalid("erf_inverse needs |y| < 1"));
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    let mut w = -((1.0 - y) * (1.0 + y)).ln();
    let p = if w < 5.0 {
        w -= 2.5;
        [
            3.432_739_39e-7,
            -3.523_387_7e-6,
            -4.391_506_54e-6,
            2.185_808_7e-4,
            -1.253_725_03e-3,
            -4.177_681_64e-3,
            0.246_640_727,
            1.501_409_41,
        ]
        .iter()
        .fold(2.810_226_36e-8, |p, c| c + p * w)
    } else {
        w = w.sqrt() - 3.0;
        [
            1.009_505_58e-4,
            1.349_343_22e-3,
            -3.673_428_44e-3,
            5.739_507_73e-3,
            -7.622_461_3e-3,
            9.438_870_47e-3,
            1.001_674_06,
            2.832_976_82,
        ]
        .iter()
        .fold(-2.002_142_57e-4, |p, c| c + p * w)
    };
    let mut x = p * y;
    for _ in 0..4 {
        let f = libm::erf(x) - y;
        if f == 0.0 {
            break;
        }
        let u = f / (FRAC_2_SQRT_PI * (-x * x).exp());
        x -= u / (1.0 + x * u);
    }
    Ok(x)
}

/// `√2 erf⁻¹(1 − 2ρ)`, the standard-normal `(1 − ρ)` quantile.
pub fn outage_quantile(rho: f64) -> Result<f64> {
    if !(rho > 0.0 && rho < 0.5) {
        return Err(invalid("outage probability must lie in (0, 0.5)"));
    }
    Ok(core::f64::consts::SQRT_2 * erf_inverse(1.0 - 2.0 * rho)?)
}

/// `σ_ij` read from the upper triangle.
fn sigma_at(error_std: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    error_std[(i.min(j), i.max(j))]
}

fn check_square(error_std: &DMatrix<f64>, m: usize) -> Result<()> {
    if error_std.nrows() != m || error_std.ncols() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: error_std.nrows().max(error_std.ncols()),
        });
    }
    Ok(())
}

/// `‖Y ⊙ Σ‖_F`, the standard deviation the design assigns to `Tr(Y Δ)`.
pub fn gaussian_trace_std(y: &CMatrix, error_std: &DMatrix<f64>) -> Result<f64> {
    check_square(error_std, y.nrows())?;
    if y.ncols() != y.nrows() {
        return Err(Error::DimensionMismatch {
            expected: y.nrows(),
            found: y.ncols(),
        });
    }
    let m = y.nrows();
    let mut acc = 0.0;
    for i in 0..m {
        for j in 0..m {
            acc += (y[(i, j)] * sigma_at(error_std, i, j)).norm_sqr();
        }
    }
    Ok(acc.sqrt())
}

/// Empirical standard deviation of `Tr(Y Δ)` over `num_samples` Hermitian
/// draws divided by [`gaussian_trace_std`].
pub fn trace_calibration_ratio(y: &CMatrix, error_std: &DMatrix<f64>, num_samples: usize, seed: u64) -> Result<f64> {
    let analytic = gaussian_trace_std(y, error_std)?;
    if analytic == 0.0 || num_samples < 2 {
        return Err(invalid("calibration needs a nonzero analytic deviation and two samples"));
    }
    let mut rng = stream_rng(seed, 0, 0, Stream::Uncertainty);
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..num_samples {
        let d = sample_hermitian_error(&mut rng, error_std);
        let t = trace_product(y, &d);
        sum += t;
        sq += t * t;
    }
    let n = num_samples as f64;
    let var = (sq - sum * sum / n) / (n - 1.0);
    Ok(var.max(0.0).sqrt() / analytic)
}

/// `B_k = W_k/γ_k − Σ_{m>k} W_m`.
fn b_matrix(w: &[HermitianMatrix], k: usize, gamma: f64) -> CMatrix {
    let mut b = w[k].matrix() / Complex64::new(gamma, 0.0);
    for wm in &w[k + 1..] {
        b -= wm.matrix();
    }
    b
}

fn check_lmi_inputs(w: &[HermitianMatrix], k: usize, c_hat: &HermitianMatrix, error_std: &DMatrix<f64>, gamma: f64) -> Result<()> {
    if k >= w.len() {
        return Err(Error::IndexOutOfRange { index: k, limit: w.len() });
    }
    let m = c_hat.order();
    check_square(error_std, m)?;
    if let Some(bad) = w.iter().find(|x| x.order() != m) {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: bad.order(),
        });
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(invalid("the outage constraint needs a positive SINR target"));
    }
    Ok(())
}

/// Both sides of the cone form at numeric `W`: `(Φ_kl, q_k ‖vec(B_k ⊙ Σ)‖)`.
pub fn robust_soc_sides(
    w: &[HermitianMatrix],
    k: usize,
    c_hat: &HermitianMatrix,
    error_std: &DMatrix<f64>,
    gamma: f64,
    noise_variance: f64,
    rho: f64,
) -> Result<(f64, f64)> {
    check_lmi_inputs(w, k, c_hat, error_std, gamma)?;
    let q = outage_quantile(rho)?;
    let b = b_matrix(w, k, gamma);
    let phi = trace_product(&b, c_hat.matrix()) - noise_variance;
    Ok((phi, q * gaussian_trace_std(&b, error_std)?))
}

/// The block `C_kl` of order `M² + 1` at numeric `W`:
/// `[[Φ/q · I, vec(−B ⊙ Σ)], [vec(−B ⊙ Σ)ᴴ, Φ/q]]`, with `vec` stacking
/// columns.
pub fn build_robust_lmi(
    w: &[HermitianMatrix],
    k: usize,
    c_hat: &HermitianMatrix,
    error_std: &DMatrix<f64>,
    gamma: f64,
    noise_variance: f64,
    rho: f64,
) -> Result<HermitianMatrix> {
    check_lmi_inputs(w, k, c_hat, error_std, gamma)?;
    let q = outage_quantile(rho)?;
    let m = c_hat.order();
    let b = b_matrix(w, k, gamma);
    let t = (trace_product(&b, c_hat.matrix()) - noise_variance) / q;
    let n = m * m + 1;
    let mut c = CMatrix::zeros(n, n);
    for a in 0..n {
        c[(a, a)] = Complex64::new(t, 0.0);
    }
    for j in 0..m {
        for i in 0..m {
            let v = -b[(i, j)] * sigma_at(error_std, i, j);
            c[(j * m + i, n - 1)] = v;
            c[(n - 1, j * m + i)] = v.conj();
        }
    }
    Ok(HermitianMatrix::symmetrized(c))
}

/// Real affine expression over solver variables.
#[derive(Debug, Clone, Default)]
struct Affine {
    terms: Vec<(usize, f64)>,
    constant: f64,
}

impl Affine {
    fn add(&mut self, other: &Affine, f: f64) {
        self.terms.extend(other.terms.iter().map(|&(j, v)| (j, v * f)));
        self.constant += other.constant * f;
    }

    fn scaled(mut self, f: f64) -> Self {
        for t in &mut self.terms {
            t.1 *= f;
        }
        self.constant *= f;
        self
    }

    /// Row `self = x[col]`.
    fn bind(&self, b: &mut ConicBuilder, col: usize) {
        let mut terms = self.terms.clone();
        terms.push((col, -1.0));
        b.add_equality(&terms, -self.constant);
    }
}

/// Hermitian `H` with `Tr(H W) = Re W_ij`.
fn select_re(m: usize, i: usize, j: usize) -> CMatrix {
    let mut h = CMatrix::zeros(m, m);
    if i == j {
        h[(i, i)] = Complex64::new(1.0, 0.0);
    } else {
        h[(i, j)] = Complex64::new(0.5, 0.0);
        h[(j, i)] = Complex64::new(0.5, 0.0);
    }
    h
}

/// Hermitian `H` with `Tr(H W) = Im W_ij`, `i ≠ j`.
fn select_im(m: usize, i: usize, j: usize) -> CMatrix {
    let mut h = CMatrix::zeros(m, m);
    h[(i, j)] = Complex64::new(0.0, 0.5);
    h[(j, i)] = Complex64::new(0.0, -0.5);
    h
}

/// Affine pieces of one outage constraint, multiplied by `γ_k`:
/// `γΦ = Tr(W_k Ĉ) − γ Σ_{m>k} Tr(W_m Ĉ) − γσ²` and the entries
/// `(i, j, Re, Im)` of `γ B_k ⊙ Σ` for `i ≤ j` with `σ_ij > 0`.
struct OutageExprs {
    phi: Affine,
    entries: Vec<(usize, usize, Affine, Affine)>,
}

fn outage_exprs<F>(tr: &F, n: usize, k: usize, c_hat: &CMatrix, error_std: &DMatrix<f64>, gamma: f64, noise: f64) -> OutageExprs
where
    F: Fn(usize, &CMatrix) -> Affine,
{
    let combo = |h: &CMatrix| {
        let mut a = tr(k, h);
        for m in k + 1..n {
            a.add(&tr(m, h), -gamma);
        }
        a
    };
    let mut phi = combo(c_hat);
    phi.constant -= gamma * noise;
    let mdim = c_hat.nrows();
    let mut entries = Vec::new();
    for j in 0..mdim {
        for i in 0..=j {
            let s = error_std[(i, j)];
            if s == 0.0 {
                continue;
            }
            let re = combo(&select_re(mdim, i, j)).scaled(s);
            let im = if i == j {
                Affine::default()
            } else {
                combo(&select_im(mdim, i, j)).scaled(s)
            };
            entries.push((i, j, re, im));
        }
    }
    OutageExprs { phi, entries }
}

/// Encoding of the outage constraints handed to the solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum RobustForm {
    /// `γΦ ≥ q‖vec(γB ⊙ Σ)‖` as a second-order cone of dimension `1 + M²`.
    #[default]
    Soc,
    /// `γ C_kl ⪰ 0`, realified to a PSD block of order `2(M² + 1)`.
    Lmi,
}

fn add_soc_form(b: &mut ConicBuilder, ex: &OutageExprs, q: f64) {
    if ex.entries.is_empty() {
        let blk = b.add_cone(Cone::NonNegative(1));
        ex.phi.bind(b, blk.at(0));
        return;
    }
    let mut parts: Vec<Affine> = Vec::new();
    for (i, j, re, im) in &ex.entries {
        if i == j {
            parts.push(re.clone().scaled(q));
        } else {
            parts.push(re.clone().scaled(q * core::f64::consts::SQRT_2));
            parts.push(im.clone().scaled(q * core::f64::consts::SQRT_2));
        }
    }
    let blk = b.add_cone(Cone::SecondOrder(1 + parts.len()));
    ex.phi.bind(b, blk.at(0));
    for (e, p) in parts.iter().enumerate() {
        p.bind(b, blk.at(e + 1));
    }
}

fn add_lmi_form(b: &mut ConicBuilder, ex: &OutageExprs, q: f64, m: usize) {
    // Complex entries of γC: diagonal t = γΦ/q, last column v_a = −(γB ⊙ Σ)_ij
    // at a = j·M + i. Lower-triangle entries of B ⊙ Σ are conjugates.
    let n = m * m + 1;
    let t = ex.phi.clone().scaled(1.0 / q);
    let mut col_re = vec![Affine::default(); n - 1];
    let mut col_im = vec![Affine::default(); n - 1];
    for (i, j, re, im) in &ex.entries {
        col_re[j * m + i] = re.clone().scaled(-1.0);
        col_im[j * m + i] = im.clone().scaled(-1.0);
        if i != j {
            col_re[i * m + j] = re.clone().scaled(-1.0);
            col_im[i * m + j] = im.clone();
        }
    }
    // Realified entry (r, c), r ≥ c, of [[Re C, −Im C], [Im C, Re C]].
    let entry = |r: usize, c: usize| -> Affine {
        let (br, bc) = (r / n, c / n);
        let (i, j) = (r % n, c % n);
        let (re, im) = if i == j {
            (t.clone(), Affine::default())
        } else if j == n - 1 {
            (col_re[i].clone(), col_im[i].clone())
        } else if i == n - 1 {
            (col_re[j].clone(), col_im[j].clone().scaled(-1.0))
        } else {
            (Affine::default(), Affine::default())
        };
        match (br, bc) {
            (0, 0) | (1, 1) => re,
            (0, 1) => im.scaled(-1.0),
            _ => im,
        }
    };
    let blk = b.add_cone(Cone::Psd(2 * n));
    let mut idx = 0;
    for c in 0..2 * n {
        for r in c..2 * n {
            entry(r, c).scaled(entry_scale(r, c)).bind(b, blk.at(idx));
            idx += 1;
        }
    }
    debug_assert_eq!(idx, packed_len(2 * n));
}

/// The robust semidefinite relaxation with its variable layout.
#[derive(Debug, Clone)]
pub struct RobustProgram {
    pub program: ConicProgram,
    /// Number of `(k, l ≥ k)` outage constraints.
    pub outage_constraints: usize,
    pub(crate) vars: LiftedVars,
}

impl RobustProgram {
    pub fn decode(&self, x: &[f64]) -> Vec<HermitianMatrix> {
        self.vars.decode(x)
    }
}

fn check_model(model: &UncertaintyModel, min_sinrs: &[f64], noise_variance: f64) -> Result<Vec<f64>> {
    model.validate()?;
    let n = model.num_users();
    if min_sinrs.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: min_sinrs.len(),
        });
    }
    if min_sinrs.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
        return Err(invalid("SINR targets must be finite and nonnegative"));
    }
    if !(noise_variance > 0.0 && noise_variance.is_finite()) {
        return Err(invalid("noise_variance must be positive"));
    }
    model.outage.iter().map(|&r| outage_quantile(r)).collect()
}

fn add_outage_constraints<F>(
    b: &mut ConicBuilder,
    model: &UncertaintyModel,
    min_sinrs: &[f64],
    noise: f64,
    q: &[f64],
    form: RobustForm,
    tr: F,
) -> usize
where
    F: Fn(usize, &CMatrix) -> Affine,
{
    let n = model.num_users();
    let m = model.num_antennas();
    let mut count = 0;
    for k in 0..n {
        if min_sinrs[k] <= 0.0 {
            continue;
        }
        for l in k..n {
            let ex = outage_exprs(&tr, n, k, model.nominal[l].matrix(), &model.error_std, min_sinrs[k], noise);
            match form {
                RobustForm::Soc => add_soc_form(b, &ex, q[k]),
                RobustForm::Lmi => add_lmi_form(b, &ex, q[k], m),
            }
            count += 1;
        }
    }
    count
}

/// Variable scales `s_k² = max(γ_k, 1) σ² / Tr Ĉ_k`.
fn nominal_scales(model: &UncertaintyModel, min_sinrs: &[f64], noise: f64) -> Vec<f64> {
    model
        .nominal
        .iter()
        .zip(min_sinrs)
        .map(|(c, g)| {
            let tr = c.trace();
            if tr > 0.0 {
                (g.max(1.0) * noise / tr).sqrt()
            } else {
                1.0
            }
        })
        .collect()
}

/// `min Σ Tr W_k` subject to every outage constraint and `W_k ⪰ 0`.
pub fn build_robust_program(
    model: &UncertaintyModel,
    min_sinrs: &[f64],
    noise_variance: f64,
    form: RobustForm,
) -> Result<RobustProgram> {
    let q = check_model(model, min_sinrs, noise_variance)?;
    let scales = nominal_scales(model, min_sinrs, noise_variance);
    let mut b = ConicBuilder::new();
    let vars = LiftedVars::new(&mut b, &scales, model.num_antennas());
    let tr = |k: usize, h: &CMatrix| Affine {
        terms: vars.trace_terms(k, h, 1.0),
        constant: 0.0,
    };
    let outage_constraints = add_outage_constraints(&mut b, model, min_sinrs, noise_variance, &q, form, tr);
    Ok(RobustProgram {
        program: b.build(),
        outage_constraints,
        vars,
    })
}

/// Least powers `p_k` such that `W_k = p_k d_k d_kᴴ / ‖d_k‖²` meets every
/// outage constraint, or `None` if the directions admit none.
pub fn robust_powers_for_directions(
    model: &UncertaintyModel,
    directions: &[CVec],
    min_sinrs: &[f64],
    noise_variance: f64,
) -> Result<Option<Vec<f64>>> {
    let q = check_model(model, min_sinrs, noise_variance)?;
    let n = model.num_users();
    if directions.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: directions.len(),
        });
    }
    let units: Vec<CVec> = directions
        .iter()
        .map(|d| {
            let nd = crate::linalg::norm(d);
            if nd > 0.0 {
                d.iter().map(|z| z / nd).collect()
            } else {
                d.clone()
            }
        })
        .collect();
    let scales: Vec<f64> = nominal_scales(model, min_sinrs, noise_variance).iter().map(|s| s * s).collect();
    let mut b = ConicBuilder::new();
    let p = b.add_named_cone(Cone::NonNegative(n), "p");
    for k in 0..n {
        b.add_objective(p.at(k), scales[k]);
    }
    let tr = |k: usize, h: &CMatrix| Affine {
        terms: vec![(p.at(k), scales[k] * quad_form(h, &units[k]))],
        constant: 0.0,
    };
    add_outage_constraints(&mut b, model, min_sinrs, noise_variance, &q, RobustForm::Soc, tr);
    let prog = b.build();
    let rep = solve(&prog, &SolveOptions::default())?;
    if !rep.is_accurate_to(1e-6) {
        return Ok(None);
    }
    Ok(Some((0..n).map(|k| scales[k] * rep.x[p.at(k)].max(0.0)).collect()))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RobustDesignResult {
    pub matrices: Vec<HermitianMatrix>,
    pub rank_one_gaps: Vec<f64>,
    pub beamformers: BeamformerSet,
    /// `Σ Tr W_k` of the relaxation.
    pub total_power: f64,
    /// Total power of the recovered beamformers.
    pub recovered_power: f64,
    /// Minimum eigenvalue of `C_kl` at the returned `W`, indexed `[k][l − k]`
    /// (empty for users without a rate target).
    pub lmi_margins: Vec<Vec<f64>>,
    pub recovery: RecoveryMethod,
    pub solver_iterations: usize,
}

impl RobustDesignResult {
    pub fn min_lmi_margin(&self) -> f64 {
        self.lmi_margins.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Options for [`solve_robust_powermin_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustOptions {
    pub form: RobustForm,
    pub solver: SolveOptions,
    pub candidates: usize,
}

impl Default for RobustOptions {
    fn default() -> Self {
        Self {
            form: RobustForm::Soc,
            solver: SolveOptions::default(),
            candidates: DEFAULT_CANDIDATES,
        }
    }
}

pub fn solve_robust_powermin(model: &UncertaintyModel, config: &SystemConfig) -> Result<RobustDesignResult> {
    solve_robust_powermin_with(model, config, &RobustOptions::default())
}

/// Designs against the nominal covariances only (`Σ = 0`).
pub fn solve_nonrobust_powermin(model: &UncertaintyModel, config: &SystemConfig) -> Result<RobustDesignResult> {
    let m = model.num_antennas();
    solve_robust_powermin(&model.with_error_std(DMatrix::zeros(m, m)), config)
}

pub fn solve_robust_powermin_with(
    model: &UncertaintyModel,
    config: &SystemConfig,
    opts: &RobustOptions,
) -> Result<RobustDesignResult> {
    config.validate()?;
    if config.num_users != model.num_users() || config.num_antennas != model.num_antennas() {
        return Err(Error::DimensionMismatch {
            expected: config.num_users,
            found: model.num_users(),
        });
    }
    let gam = config.min_sinrs()?;
    let noise = config.noise_variance;
    let prog = build_robust_program(model, &gam, noise, opts.form)?;
    let rep = solve(&prog.program, &opts.solver)?;
    if rep.status == SolveStatus::Infeasible {
        return Err(Error::Solver(SolveStatus::Infeasible));
    }
    if !rep.is_accurate_to(1e-6) {
        return Err(Error::Solver(match rep.status {
            SolveStatus::Optimal => SolveStatus::NumericalFailure,
            s => s,
        }));
    }
    let matrices = prog.decode(&rep.x);
    let total_power = matrices.iter().map(HermitianMatrix::trace).sum();
    let extracted = matrices
        .iter()
        .map(|w| extract_rank_one(w.matrix()))
        .collect::<Result<Vec<_>>>()?;
    let rank_one_gaps: Vec<f64> = extracted.iter().map(|r| r.gap).collect();

    let rescale = |dirs: &[CVec]| -> Option<BeamformerSet> {
        match robust_powers_for_directions(model, dirs, &gam, noise) {
            Ok(Some(p)) => Some(scale_directions(dirs, &p)),
            _ => None,
        }
    };
    let (beamformers, recovery) = if rank_one_gaps.iter().all(|g| *g <= RANK_ONE_TOL) {
        let dirs: Vec<CVec> = extracted.into_iter().map(|r| r.vector).collect();
        let w = rescale(&dirs).unwrap_or_else(|| BeamformerSet::new(dirs));
        (w, RecoveryMethod::Eigenvector)
    } else {
        let mut rng = stream_rng(config.rng_seed, 0, 0, Stream::Randomization);
        let mats: Vec<CMatrix> = matrices.iter().map(|m| m.matrix().clone()).collect();
        let w = randomize_rank_one(&mats, opts.candidates, &mut rng, rescale)?;
        (w, RecoveryMethod::Randomization)
    };

    let n = model.num_users();
    let mut lmi_margins = Vec::with_capacity(n);
    for k in 0..n {
        let mut row = Vec::new();
        if gam[k] > 0.0 {
            for l in k..n {
                let c = build_robust_lmi(&matrices, k, &model.nominal[l], &model.error_std, gam[k], noise, model.outage[k])?;
                row.push(c.min_eigenvalue());
            }
        }
        lmi_margins.push(row);
    }
    Ok(RobustDesignResult {
        matrices,
        rank_one_gaps,
        recovered_power: beamformers.total_power(),
        beamformers,
        total_power,
        lmi_margins,
        recovery,
        solver_iterations: rep.iterations,
    })
}

/// How the covariance error enters the Monte-Carlo evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum OutageLaw {
    /// `C_l = Ĉ_l + Δ_l` with Hermitian `Δ_l` drawn per user.
    Hermitian,
    /// `Tr(B_k Δ_l)` replaced by `‖B_k ⊙ Σ‖_F u_kl`, `u_kl ~ N(0, 1)`
    /// independent per constraint. The shift enters the signal term as
    /// `γ_k ‖B_k ⊙ Σ‖_F u_kl`, which leaves `SINR_k^l ≥ γ_k` equivalent to
    /// the perturbed constraint `Tr(B_k C_l) ≥ σ²`.
    ScalarSurrogate,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OutageReport {
    pub law: OutageLaw,
    pub num_samples: usize,
    /// Fraction of samples with `η_k ≥ 1` per user.
    pub satisfaction: Vec<f64>,
    /// Binomial standard error of each fraction.
    pub std_error: Vec<f64>,
    /// `η_k` per user and sample, from `SINR_k^k` at user `k`'s own receiver.
    pub eta: Vec<Vec<f64>>,
    /// As `satisfaction`, with the rate taken over the whole decoding chain
    /// `min_{l ≥ k} SINR_k^l`.
    pub chain_satisfaction: Vec<f64>,
    pub chain_std_error: Vec<f64>,
    pub chain_eta: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HistogramBin {
    pub left: f64,
    pub right: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EtaHistogram {
    pub bins: Vec<HistogramBin>,
    /// Values at or above the last edge.
    pub overflow: usize,
}

/// Bins of width [`ETA_BIN_WIDTH`] over `[0, ETA_MAX)`.
pub fn eta_histogram(values: &[f64]) -> EtaHistogram {
    let nb = libm::round(ETA_MAX / ETA_BIN_WIDTH) as usize;
    let mut bins: Vec<HistogramBin> = (0..nb)
        .map(|i| HistogramBin {
            left: i as f64 * ETA_BIN_WIDTH,
            right: (i + 1) as f64 * ETA_BIN_WIDTH,
            count: 0,
        })
        .collect();
    let mut overflow = 0;
    for &v in values {
        let i = (v.max(0.0) / ETA_BIN_WIDTH).floor() as usize;
        match bins.get_mut(i) {
            Some(b) => b.count += 1,
            None => overflow += 1,
        }
    }
    EtaHistogram { bins, overflow }
}

/// Fraction satisfied plus binomial standard error.
pub(crate) fn satisfaction_of(eta: &[f64]) -> (f64, f64) {
    let n = eta.len() as f64;
    let p = eta.iter().filter(|e| **e >= 1.0 - SATISFACTION_TOL).count() as f64 / n;
    (p, (p * (1.0 - p) / n).sqrt())
}

/// Monte-Carlo satisfaction of `beams` under covariance errors.
///
/// `η_k` is the achieved rate at user `k` over its target. Sample `s` of
/// trial `trial` uses the streams keyed by `(seed, trial, s)`. Quadratic
/// forms under sampled covariances are clipped at zero.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_outage(
    beams: &BeamformerSet,
    model: &UncertaintyModel,
    target_rates: &[f64],
    noise_variance: f64,
    num_samples: usize,
    seed: u64,
    trial: u64,
    law: OutageLaw,
) -> Result<OutageReport> {
    model.validate()?;
    let n = model.num_users();
    if beams.num_users() != n || target_rates.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: if beams.num_users() != n { beams.num_users() } else { target_rates.len() },
        });
    }
    if num_samples == 0 {
        return Err(invalid("num_samples must be at least 1"));
    }
    if target_rates.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(invalid("outage evaluation needs positive target rates"));
    }
    let gam: Vec<f64> = target_rates.iter().map(|r| (2.0).powf(*r) - 1.0).collect();
    let lifted: Vec<CMatrix> = (0..n).map(|k| outer(beams.beam(k))).collect();
    // Nominal quadratic forms g[l][m] = w_mᴴ Ĉ_l w_m and surrogate deviations.
    let nominal: Vec<Vec<f64>> = model
        .nominal
        .iter()
        .map(|c| (0..n).map(|m| quad_form(c.matrix(), beams.beam(m))).collect())
        .collect();
    let dev: Vec<f64> = (0..n)
        .map(|k| {
            let mut b = lifted[k].clone() / Complex64::new(gam[k], 0.0);
            for wm in &lifted[k + 1..] {
                b -= wm;
            }
            gaussian_trace_std(&b, &model.error_std)
        })
        .collect::<Result<_>>()?;

    let mut eta = vec![Vec::with_capacity(num_samples); n];
    let mut chain_eta = vec![Vec::with_capacity(num_samples); n];
    for s in 0..num_samples as u64 {
        let g: Vec<Vec<f64>> = match law {
            OutageLaw::Hermitian => {
                let deltas = sample_uncertainty(model, seed, trial, s);
                (0..n)
                    .map(|l| (0..n).map(|m| nominal[l][m] + quad_form(&deltas[l], beams.beam(m))).collect())
                    .collect()
            }
            OutageLaw::ScalarSurrogate => nominal.clone(),
        };
        let mut rng = stream_rng(seed, trial, s, Stream::Surrogate);
        for k in 0..n {
            let mut worst = f64::INFINITY;
            let mut own = 0.0;
            for l in k..n {
                let interference: f64 = (k + 1..n).map(|m| g[l][m].max(0.0)).sum();
                let signal = match law {
                    OutageLaw::Hermitian => g[l][k],
                    OutageLaw::ScalarSurrogate => {
                        let u: f64 = StandardNormal.sample(&mut rng);
                        g[l][k] + gam[k] * dev[k] * u
                    }
                };
                let sinr = signal.max(0.0) / (interference + noise_variance);
                if l == k {
                    own = sinr;
                }
                worst = worst.min(sinr);
            }
            eta[k].push(libm::log2(1.0 + own) / target_rates[k]);
            chain_eta[k].push(libm::log2(1.0 + worst) / target_rates[k]);
        }
    }
    let (satisfaction, std_error) = eta.iter().map(|e| satisfaction_of(e)).unzip();
    let (chain_satisfaction, chain_std_error) = chain_eta.iter().map(|e| satisfaction_of(e)).unzip();
    Ok(OutageReport {
        law,
        num_samples,
        satisfaction,
        std_error,
        eta,
        chain_satisfaction,
        chain_std_error,
        chain_eta,
    })
}
