//! Orthogonal multiple access and zero-forcing comparators.
//!
//! OMA gives every user an equal share `ν = 1/N` of the time/frequency
//! resource and beams to it by maximum-ratio transmission inside its slice,
//! so a rate `R` over the slice needs an SNR of `2^{N R} − 1`. Powers are
//! reported as time averages `Σ ν p_k`.
//!
//! Zero-forcing serves all users at once with the normalized columns of the
//! channel pseudo-inverse and no successive interference cancellation.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;
use rand_distr::{Distribution, StandardNormal};

use crate::channel::{sample_uncertainty, stream_rng, Stream, UncertaintyModel};
use crate::error::{invalid, Error, Result};
use crate::linalg::{hermitian_eigen, norm_sqr, quad_form, CMatrix, CVec};
use crate::model::{rate_to_min_sinr, BeamformerSet, ChannelSet, SystemConfig};
use crate::robust::{gaussian_trace_std, satisfaction_of, solve_robust_powermin, OutageLaw, OutageReport};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OmaDesign {
    /// Beamformer of each user inside its own slice (`‖w_k‖² = p_k`).
    pub beamformers: BeamformerSet,
    pub shares: Vec<f64>,
    /// Transmit power of each user while its slice is active.
    pub slice_powers: Vec<f64>,
    /// `Σ ν_k p_k`.
    pub average_power: f64,
}

impl OmaDesign {
    fn from_directions(directions: Vec<CVec>, slice_powers: Vec<f64>) -> Self {
        let n = slice_powers.len();
        let shares = vec![1.0 / n as f64; n];
        let average_power = slice_powers.iter().zip(&shares).map(|(p, s)| p * s).sum();
        Self {
            beamformers: crate::model::scale_directions(&directions, &slice_powers),
            shares,
            slice_powers,
            average_power,
        }
    }

    /// Rate of each user: `ν_k log2(1 + |h_kᴴ w_k|² / σ²)`.
    pub fn rates(&self, channels: &ChannelSet, noise_variance: f64) -> Vec<f64> {
        (0..self.shares.len())
            .map(|k| {
                let g = crate::linalg::inner(channels.channel(k), self.beamformers.beam(k)).norm_sqr();
                self.shares[k] * libm::log2(1.0 + g / noise_variance)
            })
            .collect()
    }
}

/// SNR needed inside a slice of share `1/N` to carry `rate` overall.
fn slice_snr(rate: f64, num_users: usize) -> Result<f64> {
    rate_to_min_sinr(rate * num_users as f64)
}

fn check_config(channels: &ChannelSet, config: &SystemConfig) -> Result<()> {
    config.validate()?;
    if channels.num_users() != config.num_users {
        return Err(Error::DimensionMismatch {
            expected: config.num_users,
            found: channels.num_users(),
        });
    }
    if channels.num_antennas() != config.num_antennas {
        return Err(Error::DimensionMismatch {
            expected: config.num_antennas,
            found: channels.num_antennas(),
        });
    }
    Ok(())
}

/// Equal-share OMA meeting every target rate with least power.
pub fn solve_powermin_oma(channels: &ChannelSet, config: &SystemConfig) -> Result<OmaDesign> {
    check_config(channels, config)?;
    let n = channels.num_users();
    let powers = (0..n)
        .map(|k| Ok(slice_snr(config.target_rates[k], n)? * config.noise_variance / channels.gain(k)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(OmaDesign::from_directions(channels.channels().to_vec(), powers))
}

/// Largest common OMA rate within the power budget, by bisection on the rate.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OmaMaxMin {
    pub rate: f64,
    pub design: OmaDesign,
    pub iterations: usize,
}

pub fn solve_maxmin_oma(channels: &ChannelSet, config: &SystemConfig, tolerance: f64) -> Result<OmaMaxMin> {
    check_config(channels, config)?;
    let budget = config.power_budget.ok_or(Error::MissingPowerBudget)?;
    if !(tolerance > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    let n = channels.num_users();
    let inv_gain: f64 = (0..n).map(|k| 1.0 / channels.gain(k)).sum();
    let avg_power = |r: f64| -> f64 { (libm::exp2(n as f64 * r) - 1.0) * config.noise_variance * inv_gain / n as f64 };
    // Every user alone with the whole budget bounds the common rate.
    let mut hi = libm::log2(1.0 + n as f64 * budget * channels.gain(n - 1) / config.noise_variance) / n as f64;
    let mut lo = 0.0;
    let mut iterations = 0;
    while hi - lo > tolerance {
        let mid = 0.5 * (lo + hi);
        if avg_power(mid) <= budget {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let powers = (0..n)
        .map(|k| (libm::exp2(n as f64 * lo) - 1.0) * config.noise_variance / channels.gain(k))
        .collect();
    Ok(OmaMaxMin {
        rate: lo,
        design: OmaDesign::from_directions(channels.channels().to_vec(), powers),
        iterations,
    })
}

/// Unit zero-forcing directions and their effective gains `|h_kᴴ u_k|²`.
pub fn zf_directions(channels: &ChannelSet) -> Result<(Vec<CVec>, Vec<f64>)> {
    let (n, m) = (channels.num_users(), channels.num_antennas());
    if m < n {
        return Err(Error::RankDeficient { users: n, antennas: m });
    }
    // Rows of `h` are h_kᴴ; the pseudo-inverse is hᴴ (h hᴴ)⁻¹.
    let h = CMatrix::from_fn(n, m, |k, i| channels.channel(k)[i].conj());
    let gram = &h * h.adjoint();
    let (eig, _) = hermitian_eigen(&gram);
    let (top, bottom) = (eig[0], eig[n - 1]);
    if !(bottom > 1e-12 * top) {
        return Err(Error::RankDeficient { users: n, antennas: m });
    }
    let pinv = h.adjoint() * gram.try_inverse().ok_or(Error::RankDeficient { users: n, antennas: m })?;
    let mut dirs = Vec::with_capacity(n);
    let mut gains = Vec::with_capacity(n);
    for k in 0..n {
        let d: CVec = pinv.column(k).iter().copied().collect();
        let nd = norm_sqr(&d);
        gains.push(1.0 / nd);
        let s = 1.0 / nd.sqrt();
        dirs.push(d.iter().map(|z| z * s).collect());
    }
    Ok((dirs, gains))
}

/// Zero-forcing beamformers meeting every target with equality.
pub fn solve_powermin_zf(channels: &ChannelSet, config: &SystemConfig) -> Result<BeamformerSet> {
    check_config(channels, config)?;
    let (dirs, gains) = zf_directions(channels)?;
    let gam = config.min_sinrs()?;
    let powers: Vec<f64> = (0..gam.len()).map(|k| gam[k] * config.noise_variance / gains[k]).collect();
    Ok(crate::model::scale_directions(&dirs, &powers))
}

/// Zero-forcing max-min: equal SNR `P / (σ² Σ 1/g_k)` for every user.
pub fn solve_maxmin_zf(channels: &ChannelSet, config: &SystemConfig) -> Result<(f64, BeamformerSet)> {
    check_config(channels, config)?;
    let budget = config.power_budget.ok_or(Error::MissingPowerBudget)?;
    let (dirs, gains) = zf_directions(channels)?;
    let inv: f64 = gains.iter().map(|g| 1.0 / g).sum();
    let snr = budget / (config.noise_variance * inv);
    let powers: Vec<f64> = gains.iter().map(|g| snr * config.noise_variance / g).collect();
    Ok((libm::log2(1.0 + snr), crate::model::scale_directions(&dirs, &powers)))
}

/// Single-user model for user `k`'s slice.
fn slice_model(model: &UncertaintyModel, k: usize, error_std: DMatrix<f64>) -> UncertaintyModel {
    UncertaintyModel {
        nominal: vec![model.nominal[k].clone()],
        error_std,
        outage: vec![model.outage[k]],
    }
}

fn oma_covariance_design(model: &UncertaintyModel, config: &SystemConfig, robust: bool) -> Result<OmaDesign> {
    model.validate()?;
    config.validate()?;
    let n = model.num_users();
    if config.num_users != n || config.target_rates.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: config.num_users,
        });
    }
    let m = model.num_antennas();
    let mut dirs = Vec::with_capacity(n);
    let mut powers = Vec::with_capacity(n);
    for k in 0..n {
        let sigma = if robust { model.error_std.clone() } else { DMatrix::zeros(m, m) };
        let sub = slice_model(model, k, sigma);
        let mut cfg = SystemConfig::uniform(m, 1, config.noise_variance, config.target_rates[k] * n as f64);
        cfg.rng_seed = config.rng_seed;
        let res = solve_robust_powermin(&sub, &cfg)?;
        powers.push(res.recovered_power);
        dirs.push(res.beamformers.beam(0).to_vec());
    }
    Ok(OmaDesign::from_directions(dirs, powers))
}

/// OMA with each slice designed by the outage-constrained covariance method.
pub fn solve_robust_oma(model: &UncertaintyModel, config: &SystemConfig) -> Result<OmaDesign> {
    oma_covariance_design(model, config, true)
}

/// OMA designed against the nominal covariances only.
pub fn solve_nonrobust_oma(model: &UncertaintyModel, config: &SystemConfig) -> Result<OmaDesign> {
    oma_covariance_design(model, config, false)
}

/// Monte-Carlo satisfaction of an OMA design, as
/// [`crate::robust::evaluate_outage`] does for NOMA designs. Each user only
/// decodes its own slice, so the chain fields repeat the per-user ones.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_oma_outage(
    design: &OmaDesign,
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
    if design.shares.len() != n || target_rates.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: design.shares.len(),
        });
    }
    if num_samples == 0 {
        return Err(invalid("num_samples must be at least 1"));
    }
    if target_rates.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(invalid("outage evaluation needs positive target rates"));
    }
    let nominal: Vec<f64> = (0..n).map(|k| quad_form(model.nominal[k].matrix(), design.beamformers.beam(k))).collect();
    // Single-user B = W / γ, so γ‖B ⊙ Σ‖ = ‖W ⊙ Σ‖.
    let dev: Vec<f64> = (0..n)
        .map(|k| gaussian_trace_std(&crate::linalg::outer(design.beamformers.beam(k)), &model.error_std))
        .collect::<Result<_>>()?;
    let mut eta = vec![Vec::with_capacity(num_samples); n];
    for s in 0..num_samples as u64 {
        let signal: Vec<f64> = match law {
            OutageLaw::Hermitian => {
                let deltas = sample_uncertainty(model, seed, trial, s);
                (0..n).map(|k| nominal[k] + quad_form(&deltas[k], design.beamformers.beam(k))).collect()
            }
            OutageLaw::ScalarSurrogate => {
                let mut rng = stream_rng(seed, trial, s, Stream::Surrogate);
                (0..n)
                    .map(|k| {
                        let u: f64 = StandardNormal.sample(&mut rng);
                        nominal[k] + dev[k] * u
                    })
                    .collect()
            }
        };
        for k in 0..n {
            let rate = design.shares[k] * libm::log2(1.0 + signal[k].max(0.0) / noise_variance);
            eta[k].push(rate / target_rates[k]);
        }
    }
    let (satisfaction, std_error): (Vec<f64>, Vec<f64>) = eta.iter().map(|e| satisfaction_of(e)).unzip();
    Ok(OutageReport {
        law,
        num_samples,
        chain_satisfaction: satisfaction.clone(),
        chain_std_error: std_error.clone(),
        chain_eta: eta.clone(),
        satisfaction,
        std_error,
        eta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{compute_conventional_rates, compute_rates};
    use crate::sca::{solve_powermin_sca, ScaOptions};
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn symmetric_two_user_oma() {
        let ch = ChannelSet::from_channels(vec![vec![c(1.0, 0.0)], vec![c(0.0, 1.0)]]).unwrap();
        let cfg = SystemConfig::uniform(1, 2, 1.0, 1.0);
        let oma = solve_powermin_oma(&ch, &cfg).unwrap();
        assert!((oma.average_power - 3.0).abs() < 1e-12);
        let (noma, _) = solve_powermin_sca(&ch, &cfg, &ScaOptions::default()).unwrap();
        assert!(noma.total_power() <= 3.0 + 1e-6);
        for r in oma.rates(&ch, 1.0) {
            assert!((r - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_user_schemes_coincide() {
        let ch = ChannelSet::from_channels(vec![vec![c(0.3, -0.4), c(1.2, 0.1)]]).unwrap();
        let cfg = SystemConfig::uniform(2, 1, 0.1, 2.0);
        let closed = 3.0 * 0.1 / ch.gain(0);
        let oma = solve_powermin_oma(&ch, &cfg).unwrap();
        let zf = solve_powermin_zf(&ch, &cfg).unwrap();
        assert!((oma.average_power - closed).abs() < 1e-9 * closed);
        assert!((zf.total_power() - closed).abs() < 1e-9 * closed);
        let cfgp = cfg.clone().with_power_budget(2.0);
        let oma_mm = solve_maxmin_oma(&ch, &cfgp, 1e-12).unwrap();
        let (zf_rate, _) = solve_maxmin_zf(&ch, &cfgp).unwrap();
        assert!((oma_mm.rate - zf_rate).abs() < 1e-9);
    }

    #[test]
    fn zf_on_orthogonal_channels_is_mrt() {
        let ch = ChannelSet::from_channels(vec![vec![c(0.5, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(0.0, 2.0)]]).unwrap();
        let cfg = SystemConfig::uniform(2, 2, 0.5, 1.0);
        let w = solve_powermin_zf(&ch, &cfg).unwrap();
        let expect = 0.5 / 0.25 + 0.5 / 4.0;
        assert!((w.total_power() - expect).abs() < 1e-12);
    }

    #[test]
    fn zf_nulls_interference_and_meets_targets() {
        let ch = ChannelSet::from_channels(vec![
            vec![c(0.2, 0.1), c(-0.3, 0.4), c(0.1, 0.0)],
            vec![c(0.9, -0.2), c(0.1, 0.3), c(-0.5, 0.5)],
            vec![c(1.1, 0.4), c(-0.7, -0.6), c(0.3, 1.2)],
        ])
        .unwrap();
        let cfg = SystemConfig::uniform(3, 3, 0.01, 2.0);
        let w = solve_powermin_zf(&ch, &cfg).unwrap();
        for l in 0..3 {
            for k in 0..3 {
                if k != l {
                    assert!(crate::linalg::inner(ch.channel(l), w.beam(k)).norm() <= 1e-9);
                }
            }
        }
        let rep = compute_conventional_rates(&ch, &w, &cfg).unwrap();
        for r in rep.rates {
            assert!((r - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn zf_needs_enough_antennas() {
        let ch = ChannelSet::from_channels(vec![vec![c(1.0, 0.0)], vec![c(2.0, 0.0)]]).unwrap();
        let cfg = SystemConfig::uniform(1, 2, 1.0, 1.0);
        assert!(matches!(solve_powermin_zf(&ch, &cfg), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn zf_collinear_channels_cost_more_than_noma() {
        let ch = ChannelSet::from_channels(vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(1.5, 0.0), c(0.01, 0.0)]]).unwrap();
        let cfg = SystemConfig::uniform(2, 2, 0.01, 1.0);
        let zf = solve_powermin_zf(&ch, &cfg).unwrap();
        let (noma, _) = solve_powermin_sca(&ch, &cfg, &ScaOptions::default()).unwrap();
        assert!(zf.total_power() > 100.0 * noma.total_power());
        let rep = compute_rates(&ch, &noma, &cfg).unwrap();
        assert!(rep.min_rate() >= 1.0 - 1e-6);
    }

    #[test]
    fn oma_maxmin_matches_closed_form() {
        let ch = ChannelSet::from_channels(vec![vec![c(0.5, 0.0), c(0.1, 0.2)], vec![c(1.0, 1.0), c(0.0, -0.5)]]).unwrap();
        let cfg = SystemConfig::uniform(2, 2, 0.1, 1.0).with_power_budget(3.0);
        let mm = solve_maxmin_oma(&ch, &cfg, 1e-12).unwrap();
        let inv: f64 = (0..2).map(|k| 1.0 / ch.gain(k)).sum();
        let closed = (1.0 + 2.0 * 3.0 / (0.1 * inv)).log2() / 2.0;
        assert!((mm.rate - closed).abs() < 1e-10);
        assert!(mm.design.average_power <= 3.0 * (1.0 + 1e-12));
        for r in mm.design.rates(&ch, 0.1) {
            assert!((r - mm.rate).abs() < 1e-9);
        }
    }

    #[test]
    fn oma_slices_are_independent() {
        let a = ChannelSet::from_channels(vec![vec![c(0.5, 0.0)], vec![c(1.0, 0.0)]]).unwrap();
        let b = ChannelSet::from_channels(vec![vec![c(0.5, 0.0)], vec![c(3.0, 0.0)]]).unwrap();
        let cfg = SystemConfig::uniform(1, 2, 1.0, 1.5);
        let pa = solve_powermin_oma(&a, &cfg).unwrap();
        let pb = solve_powermin_oma(&b, &cfg).unwrap();
        assert_eq!(pa.slice_powers[0], pb.slice_powers[0]);
        assert_ne!(pa.slice_powers[1], pb.slice_powers[1]);
    }

    #[test]
    fn nonrobust_oma_matches_closed_form() {
        let ch = ChannelSet::from_channels(vec![vec![c(0.5, 0.1), c(0.2, 0.0)], vec![c(1.0, 0.0), c(0.0, 1.0)]]).unwrap();
        let cfg = SystemConfig::uniform(2, 2, 0.01, 1.0);
        let model = UncertaintyModel::from_channels(&ch, 0.005, 0.1).unwrap();
        let nr = solve_nonrobust_oma(&model, &cfg).unwrap();
        let closed = solve_powermin_oma(&ch, &cfg).unwrap();
        assert!((nr.average_power - closed.average_power).abs() < 1e-6 * closed.average_power);
        let rob = solve_robust_oma(&model, &cfg).unwrap();
        assert!(rob.average_power > nr.average_power);
        let rep = evaluate_oma_outage(&nr, &model, &cfg.target_rates, 0.01, 1, 0, 0, OutageLaw::Hermitian).unwrap();
        assert_eq!(rep.eta.len(), 2);
    }

    #[test]
    fn zero_uncertainty_oma_is_satisfied() {
        let ch = ChannelSet::from_channels(vec![vec![c(0.5, 0.1), c(0.2, 0.0)], vec![c(1.0, 0.0), c(0.0, 1.0)]]).unwrap();
        let cfg = SystemConfig::uniform(2, 2, 0.01, 1.0);
        let model = UncertaintyModel::from_channels(&ch, 0.0, 0.1).unwrap();
        let d = solve_nonrobust_oma(&model, &cfg).unwrap();
        for law in [OutageLaw::Hermitian, OutageLaw::ScalarSurrogate] {
            let rep = evaluate_oma_outage(&d, &model, &cfg.target_rates, 0.01, 20, 1, 0, law).unwrap();
            assert_eq!(rep.satisfaction, vec![1.0, 1.0]);
        }
    }
}
