//! Power minimization by successive convex approximation.
//!
//! Each iteration replaces the non-convex decodability constraints at the
//! stronger users by their first-order (Taylor) under-estimators around the
//! current point and solves the resulting SOCP. The current point is always
//! feasible for the next subproblem, so the total power never increases.

use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::beam::{scales_from, BeamDecoder, BeamProgram, Lin};
use crate::channel::{complex_gaussian_vec, stream_rng, Stream};
use crate::conic::{solve, ConicProgram, SolveOptions, SolveStatus};
use crate::error::{Error, Result};
use crate::linalg::{align_phase, inner, CVec};
use crate::model::{
    min_powers_for_directions, qos_shortfall, scale_directions, BeamformerSet, ChannelSet, SystemConfig,
};

/// First-order under-estimator `g(w) = 2 Re(a* hᴴw) − |a|²` of `|hᴴw|²`
/// around a reference with `hᴴw_ref = a`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorBound {
    h: CVec,
    a: Complex64,
}

impl TaylorBound {
    pub fn eval(&self, w: &[Complex64]) -> Result<f64> {
        if w.len() != self.h.len() {
            return Err(Error::DimensionMismatch {
                expected: self.h.len(),
                found: w.len(),
            });
        }
        Ok(2.0 * (self.a.conj() * inner(&self.h, w)).re - self.a.norm_sqr())
    }

    /// `|hᴴ w_ref|²`, the value (and tangent point) at the reference.
    pub fn reference_gain(&self) -> f64 {
        self.a.norm_sqr()
    }
}

pub fn taylor_linearize(h: &[Complex64], w_ref: &[Complex64]) -> Result<TaylorBound> {
    if h.len() != w_ref.len() {
        return Err(Error::DimensionMismatch {
            expected: h.len(),
            found: w_ref.len(),
        });
    }
    Ok(TaylorBound {
        h: h.to_vec(),
        a: inner(h, w_ref),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScaInit {
    /// Directions `h_k`, least powers meeting every SINR target.
    MatchedFilter,
    /// Random Gaussian directions, least powers meeting every SINR target.
    Random { seed: u64 },
    /// A caller-supplied starting point; it must be feasible.
    Provided(BeamformerSet),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaOptions {
    pub max_iters: usize,
    /// Stop when `max_k ‖w_k⁺ − w_k‖∞` falls to this value.
    pub tolerance: f64,
    pub init: ScaInit,
    pub solver: SolveOptions,
}

impl Default for ScaOptions {
    fn default() -> Self {
        Self {
            max_iters: 30,
            tolerance: 1e-4,
            init: ScaInit::MatchedFilter,
            solver: SolveOptions::default(),
        }
    }
}

/// Iteration history; index 0 is the starting point.
#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScaTrace {
    pub total_power: Vec<f64>,
    /// Worst relative SINR shortfall of each iterate (0 when feasible).
    pub max_shortfall: Vec<f64>,
    /// `max_k ‖Δw_k‖∞` for iterations 1, 2, …
    pub changes: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Whether the default start had to be replaced (random or SDR start).
    pub init_fallback: bool,
}

/// One convexified subproblem.
#[derive(Debug, Clone)]
pub struct ScaSubproblem {
    pub program: ConicProgram,
    /// Second-order cones imposing the own-decoder SINR constraints.
    pub own_decoder_constraints: usize,
    /// Linearized constraints at the stronger decoders.
    pub linearized_constraints: usize,
    /// `Im(h_kᴴ w_k) = 0` equalities.
    pub phase_equalities: usize,
    decoder: BeamDecoder,
}

impl ScaSubproblem {
    pub fn total_constraints(&self) -> usize {
        self.own_decoder_constraints + self.linearized_constraints + self.phase_equalities
    }

    pub fn decode(&self, x: &[f64]) -> BeamformerSet {
        self.decoder.decode(x)
    }
}

pub(crate) fn check_inputs(channels: &ChannelSet, min_sinrs: &[f64], noise: f64, w_ref: &BeamformerSet) -> Result<()> {
    let n = channels.num_users();
    if min_sinrs.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: min_sinrs.len(),
        });
    }
    if w_ref.num_users() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: w_ref.num_users(),
        });
    }
    for w in &w_ref.beams {
        if w.len() != channels.num_antennas() {
            return Err(Error::DimensionMismatch {
                expected: channels.num_antennas(),
                found: w.len(),
            });
        }
    }
    if min_sinrs.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
        return Err(Error::NegativeInput(min_sinrs.iter().copied().fold(0.0, f64::min)));
    }
    if !(noise > 0.0) {
        return Err(crate::error::invalid("noise variance must be positive"));
    }
    Ok(())
}

/// Per-user single-user power `γσ²/‖h‖²`, used to size variables.
pub(crate) fn nominal_scales(channels: &ChannelSet, min_sinrs: &[f64], noise: f64) -> Vec<f64> {
    (0..channels.num_users())
        .map(|k| (min_sinrs[k].max(1.0) * noise / channels.gain(k)).sqrt())
        .collect()
}

/// Builds the SOCP linearized around `w_ref`.
///
/// The own-decoder constraint of user `k` is the exact cone
/// `√γ_k ‖(h_kᴴw_{k+1}, …, h_kᴴw_N, σ)‖ ≤ Re(h_kᴴw_k)` with `Im(h_kᴴw_k) = 0`.
/// At each stronger user `l > k` the constraint
/// `γ_k(Σ_{m>k} |h_lᴴw_m|² + σ²) ≤ g_l(w_k)` is a rotated cone. Users with a
/// zero target get no stronger-decoder constraints (they would only force
/// `g_l ≥ 0`).
pub fn build_sca_subproblem(
    channels: &ChannelSet,
    min_sinrs: &[f64],
    noise_variance: f64,
    w_ref: &BeamformerSet,
) -> Result<ScaSubproblem> {
    check_inputs(channels, min_sinrs, noise_variance, w_ref)?;
    let n = channels.num_users();
    let sigma = noise_variance.sqrt();
    let scales = scales_from(w_ref, &nominal_scales(channels, min_sinrs, noise_variance));
    let mut bp = BeamProgram::new(n, channels.num_antennas(), &scales);
    let mut own = 0;
    let mut linearized = 0;
    let mut phase = 0;
    for k in 0..n {
        let g = min_sinrs[k];
        let rg = g.sqrt();
        let interference = |bp: &BeamProgram, l: usize| -> Vec<Lin> {
            let mut e = Vec::with_capacity(2 * (n - k));
            for m in k + 1..n {
                let (re, im) = bp.projection(channels.channel(l), m);
                e.push(re.scaled(rg / sigma));
                e.push(im.scaled(rg / sigma));
            }
            e.push(Lin::constant(rg));
            e
        };
        let (re, im) = bp.projection(channels.channel(k), k);
        let entries = interference(&bp, k);
        bp.add_soc(re.scaled(1.0 / sigma), &entries);
        bp.add_zero(&im);
        own += 1;
        phase += 1;
        if g == 0.0 {
            continue;
        }
        for l in k + 1..n {
            let a = inner(channels.channel(l), w_ref.beam(k));
            let bound = bp
                .linearized_gain(channels.channel(l), k, a)
                .scaled(1.0 / noise_variance);
            let entries = interference(&bp, l);
            bp.add_rotated(&bound, &entries);
            linearized += 1;
        }
    }
    let (program, decoder) = bp.finish();
    Ok(ScaSubproblem {
        program,
        own_decoder_constraints: own,
        linearized_constraints: linearized,
        phase_equalities: phase,
        decoder,
    })
}

/// Least-power beamformers along the directions of `beams`.
pub(crate) fn polish(channels: &ChannelSet, beams: &BeamformerSet, noise: f64, min_sinrs: &[f64]) -> Option<BeamformerSet> {
    let p = min_powers_for_directions(channels, &beams.beams, noise, min_sinrs)?;
    Some(scale_directions(&beams.beams, &p))
}

fn aligned(channels: &ChannelSet, beams: BeamformerSet) -> BeamformerSet {
    BeamformerSet::new(
        beams
            .beams
            .iter()
            .enumerate()
            .map(|(k, w)| align_phase(channels.channel(k), w))
            .collect(),
    )
}

/// Feasible starting point; the flag reports whether a fallback was used.
pub fn initial_point(
    channels: &ChannelSet,
    config: &SystemConfig,
    init: &ScaInit,
) -> Result<(BeamformerSet, bool)> {
    let gam = config.min_sinrs()?;
    let noise = config.noise_variance;
    let random = |seed: u64| {
        let mut rng = stream_rng(seed, 0, 0, Stream::Initialization);
        let dirs: Vec<CVec> = (0..channels.num_users())
            .map(|_| complex_gaussian_vec(&mut rng, channels.num_antennas()))
            .collect();
        polish(channels, &BeamformerSet::new(dirs), noise, &gam)
    };
    match init {
        ScaInit::Provided(w) => {
            check_inputs(channels, &gam, noise, w)?;
            if qos_shortfall(channels, w, noise, &gam)? > 1e-6 {
                return Err(crate::error::invalid("provided starting point is infeasible"));
            }
            Ok((aligned(channels, w.clone()), false))
        }
        ScaInit::Random { seed } => match random(*seed) {
            Some(w) => Ok((aligned(channels, w), false)),
            None => Err(Error::InfeasibleSubproblem { iteration: 0 }),
        },
        ScaInit::MatchedFilter => {
            let mf = BeamformerSet::new(channels.channels().to_vec());
            if let Some(w) = polish(channels, &mf, noise, &gam) {
                return Ok((aligned(channels, w), false));
            }
            if let Some(w) = random(config.rng_seed) {
                return Ok((aligned(channels, w), true));
            }
            let sdr = crate::sdr::solve_powermin_sdr(channels, config)?;
            Ok((aligned(channels, sdr.beamformers), true))
        }
    }
}

/// Runs the SCA loop from the configured starting point.
///
/// Every accepted iterate is re-powered along its own directions so that it
/// meets the original SINR constraints exactly; a subproblem solution with
/// more power than the current point is rejected, which ends the loop.
pub fn solve_powermin_sca(
    channels: &ChannelSet,
    config: &SystemConfig,
    options: &ScaOptions,
) -> Result<(BeamformerSet, ScaTrace)> {
    config.validate()?;
    if options.max_iters == 0 || !(options.tolerance > 0.0) {
        return Err(crate::error::invalid("need max_iters ≥ 1 and a positive tolerance"));
    }
    let gam = config.min_sinrs()?;
    let noise = config.noise_variance;
    let (mut w, init_fallback) = initial_point(channels, config, &options.init)?;
    let mut trace = ScaTrace {
        init_fallback,
        ..ScaTrace::default()
    };
    trace.total_power.push(w.total_power());
    trace.max_shortfall.push(qos_shortfall(channels, &w, noise, &gam)?);
    for t in 1..=options.max_iters {
        let sub = build_sca_subproblem(channels, &gam, noise, &w)?;
        let rep = solve(&sub.program, &options.solver)?;
        trace.iterations = t;
        match rep.status {
            SolveStatus::Infeasible => return Err(Error::InfeasibleSubproblem { iteration: t }),
            _ if rep.is_accurate_to(1e-6) => {}
            _ => break,
        }
        let raw = aligned(channels, sub.decode(&rep.x));
        let cand = match polish(channels, &raw, noise, &gam) {
            Some(p) => p,
            None if qos_shortfall(channels, &raw, noise, &gam)? <= 1e-6 => raw,
            None => break,
        };
        let cand = if cand.total_power() <= w.total_power() { cand } else { w.clone() };
        let change = cand.max_change(&w);
        w = cand;
        trace.total_power.push(w.total_power());
        trace.max_shortfall.push(qos_shortfall(channels, &w, noise, &gam)?);
        trace.changes.push(change);
        if change <= options.tolerance {
            trace.converged = true;
            break;
        }
    }
    Ok((w, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn tangent_at_reference() {
        let h = vec![c(0.3, -1.0), c(0.5, 0.2)];
        let w = vec![c(1.0, 0.5), c(-0.2, 0.1)];
        let g = taylor_linearize(&h, &w).unwrap();
        assert!((g.eval(&w).unwrap() - inner(&h, &w).norm_sqr()).abs() < 1e-14);
    }

    #[test]
    fn hand_evaluated_bound() {
        let h = vec![c(1.0, 0.0), c(0.0, 0.0)];
        let g = taylor_linearize(&h, &[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert_eq!(g.eval(&[c(0.0, 0.0), c(1.0, 0.0)]).unwrap(), -1.0);
    }

    #[test]
    fn single_user_matches_closed_form() {
        let ch = ChannelSet::from_channels(vec![vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]]).unwrap();
        let cfg = SystemConfig::uniform(3, 1, 1.0, 1.0);
        let (w, trace) = solve_powermin_sca(&ch, &cfg, &ScaOptions::default()).unwrap();
        assert!((w.total_power() - 1.0).abs() < 1e-9);
        assert!(trace.converged);
    }

    #[test]
    fn constraint_counts() {
        let ch = ChannelSet::from_channels(vec![
            vec![c(0.5, 0.1), c(0.2, -0.3)],
            vec![c(1.0, 0.0), c(0.4, 0.8)],
        ])
        .unwrap();
        let w = BeamformerSet::new(ch.channels().to_vec());
        let sub = build_sca_subproblem(&ch, &[1.0, 1.0], 0.1, &w).unwrap();
        assert_eq!(sub.own_decoder_constraints, 2);
        assert_eq!(sub.linearized_constraints, 1);
        assert_eq!(sub.total_constraints(), 5);
    }
}
