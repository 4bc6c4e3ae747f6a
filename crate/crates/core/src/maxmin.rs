//! Max-min rate fairness under a total power budget.
//!
//! The minimum rate is quasi-concave, so the optimum is bracketed by
//! bisection. Each candidate rate `α` is tested by running the convexified
//! power-minimization loop at the uniform target `α` with the SIC ordering
//! chain imposed, and accepting `α` when the converged point fits the budget
//! and passes an exact check of rates and ordering.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::beam::{scales_from, BeamDecoder, BeamProgram, Lin};
use crate::conic::{solve, ConicProgram, SolveStatus};
use crate::error::{invalid, Error, Result};
use crate::linalg::{inner, norm};
use crate::model::{
    gain_table, min_powers_for_directions, scale_directions, sinr_table_from_gains, BeamformerSet,
    ChannelSet, SystemConfig,
};
use crate::sca::{check_inputs, nominal_scales, ScaOptions};

/// Slack allowed when certifying a rate against the exact SINR formula; it
/// absorbs the conic solver's residuals.
pub const RATE_CERT_TOL: f64 = 1e-7;
/// Relative slack on the ordering chain `|h_kᴴw_m|² ≥ |h_kᴴw_n|²`.
pub const ORDER_CERT_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct BisectionOptions {
    /// Stop once `t_max − t_min` is at most this (bits/s/Hz).
    pub tolerance: f64,
    /// Inner loop run at every candidate rate; only `max_iters`,
    /// `tolerance` and `solver` are used.
    pub inner: ScaOptions,
    pub t_min: f64,
    /// Defaults to `log2(1 + P^max ‖h_N‖² / σ²)`.
    pub t_max: Option<f64>,
    /// Inner iterations spent settling the final certified point at the
    /// returned rate; 0 returns it as found.
    pub settle_iters: usize,
    /// Stopping tolerance of the settling loop.
    pub settle_tolerance: f64,
}

impl Default for BisectionOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-3,
            inner: ScaOptions {
                max_iters: 15,
                ..ScaOptions::default()
            },
            t_min: 0.0,
            t_max: None,
            settle_iters: 100,
            settle_tolerance: 1e-9,
        }
    }
}

/// One bisection round. The interval fields describe the bracket after the
/// round; `length` is tracked separately so that it halves exactly.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BisectionStep {
    pub iteration: usize,
    pub alpha: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub length: f64,
    /// Power of the converged feasibility subproblem, if it was solvable.
    pub subproblem_power: Option<f64>,
    pub certified: bool,
    pub inner_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MaxMinResult {
    /// Balanced rate `R*`, the last certified `t_min`.
    pub rate: f64,
    pub beamformers: BeamformerSet,
    pub achieved_rates: Vec<f64>,
    pub total_power: f64,
    pub log: Vec<BisectionStep>,
    /// No candidate rate could be certified; `rate` is 0 and the beams are zero.
    pub degenerate: bool,
    /// Subproblem solutions that broke the exact ordering chain.
    pub ordering_violations: usize,
}

/// The convexified feasibility problem at one candidate rate.
#[derive(Debug, Clone)]
pub struct FeasibilitySubproblem {
    pub program: ConicProgram,
    /// Linearized rate constraints, one per `(k, l ≥ k)`.
    pub rate_constraints: usize,
    /// Linearized ordering constraints, one per `(k, m < n)`.
    pub ordering_constraints: usize,
    decoder: BeamDecoder,
}

impl FeasibilitySubproblem {
    pub fn decode(&self, x: &[f64]) -> BeamformerSet {
        self.decoder.decode(x)
    }
}

/// Builds the power-minimizing program whose feasible set is an inner
/// approximation of `{min_k R_k ≥ α}` around `w_ref`:
///
/// * `(2^α − 1)(Σ_{m>k} |h_lᴴw_m|² + σ²) ≤ g_l(w_k)` for every `k` and `l ≥ k`;
/// * `|h_kᴴw_n|² ≤ g_k(w_m)` for every `k` and `m < n`;
///
/// where `g` is the Taylor under-estimator at `w_ref`. Both families are
/// rotated cones. At `α = 0` the rate constraints are vacuous and omitted.
pub fn build_feasibility_subproblem(
    channels: &ChannelSet,
    alpha: f64,
    noise_variance: f64,
    w_ref: &BeamformerSet,
) -> Result<FeasibilitySubproblem> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::NegativeInput(alpha));
    }
    let n = channels.num_users();
    let gamma = alpha.exp2() - 1.0;
    let gams = vec![gamma; n];
    check_inputs(channels, &gams, noise_variance, w_ref)?;
    let sigma = noise_variance.sqrt();
    let scales = scales_from(w_ref, &nominal_scales(channels, &gams, noise_variance));
    let mut bp = BeamProgram::new(n, channels.num_antennas(), &scales);
    let mut rate_constraints = 0;
    let mut ordering_constraints = 0;
    let rg = gamma.sqrt();
    for k in 0..n {
        if gamma == 0.0 {
            break;
        }
        for l in k..n {
            let h = channels.channel(l);
            let bound = bp
                .linearized_gain(h, k, inner(h, w_ref.beam(k)))
                .scaled(1.0 / noise_variance);
            let mut entries = Vec::with_capacity(2 * (n - k) + 1);
            for m in k + 1..n {
                let (re, im) = bp.projection(h, m);
                entries.push(re.scaled(rg / sigma));
                entries.push(im.scaled(rg / sigma));
            }
            entries.push(Lin::constant(rg));
            bp.add_rotated(&bound, &entries);
            rate_constraints += 1;
        }
    }
    for k in 0..n {
        let h = channels.channel(k);
        for nn in 1..n {
            let (re, im) = bp.projection(h, nn);
            let entries = [re.scaled(1.0 / sigma), im.scaled(1.0 / sigma)];
            for m in 0..nn {
                let bound = bp
                    .linearized_gain(h, m, inner(h, w_ref.beam(m)))
                    .scaled(1.0 / noise_variance);
                bp.add_rotated(&bound, &entries);
                ordering_constraints += 1;
            }
        }
    }
    let (program, decoder) = bp.finish();
    Ok(FeasibilitySubproblem {
        program,
        rate_constraints,
        ordering_constraints,
        decoder,
    })
}

/// Whether the ordering chain holds at every receiver, relative to the
/// largest gain seen there.
fn ordering_holds(channels: &ChannelSet, beams: &BeamformerSet) -> bool {
    gain_table(channels, beams).iter().all(|row| {
        let top = row.iter().copied().fold(0.0, f64::max);
        row.windows(2).all(|p| p[1] - p[0] <= ORDER_CERT_TOL * top)
    })
}

/// Exact check of a candidate at rate `alpha` and budget `budget`.
fn certify(channels: &ChannelSet, beams: &BeamformerSet, noise: f64, alpha: f64, budget: f64) -> Result<bool> {
    if !beams.is_finite() || beams.total_power() > budget {
        return Ok(false);
    }
    let min_rate = exact_rates(channels, beams, noise).into_iter().fold(f64::INFINITY, f64::min);
    Ok(min_rate >= alpha - RATE_CERT_TOL && ordering_holds(channels, beams))
}

/// `R_k = log2(1 + min_{l ≥ k} SINR_k^l)` for every user.
fn exact_rates(channels: &ChannelSet, beams: &BeamformerSet, noise: f64) -> Vec<f64> {
    sinr_table_from_gains(&gain_table(channels, beams), noise)
        .iter()
        .map(|row| (1.0 + row.iter().copied().fold(f64::INFINITY, f64::min)).log2())
        .collect()
}

struct InnerOutcome {
    beams: Option<BeamformerSet>,
    iterations: usize,
    violations: usize,
}

/// Inner convexification loop at rate `alpha` from `start`.
fn inner_loop(
    channels: &ChannelSet,
    alpha: f64,
    noise: f64,
    start: &BeamformerSet,
    opts: &ScaOptions,
) -> Result<InnerOutcome> {
    let mut w = start.clone();
    let mut accepted = false;
    let mut iterations = 0;
    let mut violations = 0;
    for t in 1..=opts.max_iters {
        let sub = build_feasibility_subproblem(channels, alpha, noise, &w)?;
        let rep = solve(&sub.program, &opts.solver)?;
        iterations = t;
        if rep.status == SolveStatus::Infeasible || !rep.is_accurate_to(1e-6) {
            break;
        }
        let cand = sub.decode(&rep.x);
        if !ordering_holds(channels, &cand) {
            violations += 1;
        }
        if accepted && cand.total_power() > w.total_power() {
            break;
        }
        let change = cand.max_change(&w);
        w = cand;
        accepted = true;
        if change <= opts.tolerance {
            break;
        }
    }
    Ok(InnerOutcome {
        beams: accepted.then_some(w),
        iterations,
        violations,
    })
}

/// Least-power beams along `dirs` meeting rate `alpha` at every decoder.
fn repowered(channels: &ChannelSet, dirs: &BeamformerSet, noise: f64, alpha: f64) -> Option<BeamformerSet> {
    let gams = vec![alpha.exp2() - 1.0; channels.num_users()];
    let p = min_powers_for_directions(channels, &dirs.beams, noise, &gams)?;
    Some(scale_directions(&dirs.beams, &p))
}

/// Bisection over the balanced rate.
pub fn solve_maxmin(channels: &ChannelSet, config: &SystemConfig, options: &BisectionOptions) -> Result<MaxMinResult> {
    config.validate()?;
    let budget = config.power_budget.ok_or(Error::MissingPowerBudget)?;
    if channels.num_users() != config.num_users || channels.num_antennas() != config.num_antennas {
        return Err(Error::DimensionMismatch {
            expected: config.num_users,
            found: channels.num_users(),
        });
    }
    if !(options.tolerance > 0.0) || options.inner.max_iters == 0 {
        return Err(invalid("need a positive rate tolerance and at least one inner iteration"));
    }
    let n = channels.num_users();
    let m = channels.num_antennas();
    let noise = config.noise_variance;
    let strongest = channels.gain(n - 1);
    let t_max = options
        .t_max
        .unwrap_or_else(|| (budget * strongest / noise).ln_1p() / core::f64::consts::LN_2);
    let mut lo = options.t_min;
    if !(lo >= 0.0 && t_max.is_finite()) {
        return Err(invalid("bisection bracket must be finite with t_min ≥ 0"));
    }
    let mut len = t_max - lo;
    let degenerate = |log: Vec<BisectionStep>, violations: usize| -> Result<MaxMinResult> {
        let beams = BeamformerSet::zeros(n, m);
        Ok(MaxMinResult {
            rate: 0.0,
            achieved_rates: vec![0.0; n],
            total_power: 0.0,
            beamformers: beams,
            log,
            degenerate: true,
            ordering_violations: violations,
        })
    };
    if !(len > 0.0) {
        if len == 0.0 {
            return degenerate(Vec::new(), 0);
        }
        return Err(invalid("t_min must be below t_max"));
    }

    let mut warm = {
        let share = (budget / n as f64).sqrt();
        BeamformerSet::new(
            channels
                .channels()
                .iter()
                .map(|h| {
                    let nh = norm(h);
                    h.iter().map(|z| z * (share / nh)).collect()
                })
                .collect(),
        )
    };
    let mut best: Option<BeamformerSet> = None;
    let mut log = Vec::new();
    let mut violations = 0;
    let mut iteration = 0;
    while len > options.tolerance {
        iteration += 1;
        let alpha = lo + len / 2.0;
        let mut starts = Vec::with_capacity(2);
        starts.extend(repowered(channels, &warm, noise, alpha));
        starts.extend(repowered(channels, &BeamformerSet::new(channels.channels().to_vec()), noise, alpha));
        let mut power = None;
        let mut found = None;
        let mut inner_iterations = 0;
        for start in &starts {
            let out = inner_loop(channels, alpha, noise, start, &options.inner)?;
            inner_iterations += out.iterations;
            violations += out.violations;
            // The matched-filter start is only a fallback for when the warm
            // start yields no solvable subproblem.
            let Some(w) = out.beams else { continue };
            power = Some(w.total_power());
            if certify(channels, &w, noise, alpha, budget)? {
                found = Some(w);
            }
            break;
        }
        let certified = found.is_some();
        if let Some(w) = found {
            lo = alpha;
            warm = w.clone();
            best = Some(w);
        }
        len /= 2.0;
        log.push(BisectionStep {
            iteration,
            alpha,
            t_min: lo,
            t_max: lo + len,
            length: len,
            subproblem_power: power,
            certified,
            inner_iterations,
        });
    }
    let Some(mut beams) = best else {
        return degenerate(log, violations);
    };
    if options.settle_iters > 0 {
        let settle = ScaOptions {
            max_iters: options.settle_iters,
            tolerance: options.settle_tolerance,
            ..options.inner.clone()
        };
        let out = inner_loop(channels, lo, noise, &beams, &settle)?;
        violations += out.violations;
        if let Some(w) = out.beams {
            if w.total_power() <= beams.total_power() && certify(channels, &w, noise, lo, budget)? {
                beams = w;
            }
        }
    }
    Ok(MaxMinResult {
        rate: lo,
        achieved_rates: exact_rates(channels, &beams, noise),
        total_power: beams.total_power(),
        beamformers: beams,
        log,
        degenerate: false,
        ordering_violations: violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn two_users() -> ChannelSet {
        ChannelSet::from_channels(vec![
            vec![c(0.4, 0.1), c(-0.2, 0.3)],
            vec![c(1.0, -0.5), c(0.6, 0.9)],
        ])
        .unwrap()
    }

    #[test]
    fn ordering_constraint_count() {
        let ch = ChannelSet::from_channels(vec![
            vec![c(0.3, 0.0), c(0.1, 0.2)],
            vec![c(0.5, -0.4), c(0.2, 0.1)],
            vec![c(1.0, 0.3), c(-0.7, 0.5)],
        ])
        .unwrap();
        let w = BeamformerSet::new(ch.channels().to_vec());
        let sub = build_feasibility_subproblem(&ch, 1.0, 0.1, &w).unwrap();
        assert_eq!(sub.ordering_constraints, 9);
        assert_eq!(sub.rate_constraints, 6);
    }

    #[test]
    fn zero_rate_with_zero_reference_needs_no_power() {
        let ch = two_users();
        let sub = build_feasibility_subproblem(&ch, 0.0, 0.1, &BeamformerSet::zeros(2, 2)).unwrap();
        assert_eq!(sub.rate_constraints, 0);
        let rep = solve(&sub.program, &Default::default()).unwrap();
        assert!(rep.is_optimal());
        assert!(sub.decode(&rep.x).total_power() < 1e-7);
    }

    #[test]
    fn single_user_reaches_capacity() {
        let ch = ChannelSet::from_channels(vec![vec![c(0.6, -0.2), c(0.1, 0.5)]]).unwrap();
        let cfg = SystemConfig::uniform(2, 1, 0.1, 1.0).with_power_budget(2.0);
        let res = solve_maxmin(&ch, &cfg, &BisectionOptions::default()).unwrap();
        let capacity = (1.0 + 2.0 * ch.gain(0) / 0.1).log2();
        assert!(!res.degenerate);
        assert!(res.rate <= capacity && capacity - res.rate <= 1e-3);
        assert!(res.total_power <= 2.0 + 1e-8);
    }

    #[test]
    fn bracket_halves_exactly_and_stays_certified() {
        let ch = two_users();
        let cfg = SystemConfig::uniform(2, 2, 0.1, 1.0).with_power_budget(3.0);
        let res = solve_maxmin(&ch, &cfg, &BisectionOptions::default()).unwrap();
        let initial = 2.0 * res.log[0].length;
        assert!((initial - (1.0 + 3.0 * ch.gain(1) / 0.1).log2()).abs() < 1e-12);
        for (i, step) in res.log.iter().enumerate() {
            assert_eq!(step.length, initial / (1u64 << (i + 1)) as f64);
        }
        assert!(res.log.last().unwrap().length <= 1e-3);
        assert!(res.total_power <= 3.0 + 1e-8);
        let min_rate = res.achieved_rates.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(min_rate >= res.rate - 1e-3);
        assert!(ordering_holds(&ch, &res.beamformers));
        assert_eq!(res.ordering_violations, 0);
    }

    #[test]
    fn rate_grows_with_budget() {
        let ch = two_users();
        let mut last = 0.0;
        for p in [0.5, 1.0, 2.0, 4.0] {
            let cfg = SystemConfig::uniform(2, 2, 0.1, 1.0).with_power_budget(p);
            let r = solve_maxmin(&ch, &cfg, &BisectionOptions::default()).unwrap().rate;
            assert!(r >= last - 1e-3);
            last = r;
        }
    }

    #[test]
    fn requires_budget() {
        let ch = two_users();
        let cfg = SystemConfig::uniform(2, 2, 0.1, 1.0);
        assert!(matches!(
            solve_maxmin(&ch, &cfg, &BisectionOptions::default()),
            Err(Error::MissingPowerBudget)
        ));
    }
}
