//! System description and exact evaluation of SINRs, rates and SIC ordering.
//!
//! User indices are 0-based. Users are ordered by channel strength, so user
//! `N-1` is the strongest and decodes (and cancels) every other stream.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::linalg::{inner, norm_sqr, CVec};

/// Absolute tolerance for the SIC power-ordering chain.
pub const SIC_ORDER_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SystemConfig {
    pub num_antennas: usize,
    pub num_users: usize,
    /// Noise variance at every receiver, in W.
    pub noise_variance: f64,
    /// Per-user minimum rates in bits/s/Hz.
    pub target_rates: Vec<f64>,
    /// Total transmit power budget in W (max-min only).
    pub power_budget: Option<f64>,
    /// Per-user outage probabilities (robust design only).
    pub outage_probabilities: Option<Vec<f64>>,
    pub rng_seed: u64,
}

impl SystemConfig {
    /// `num_users` users all targeting `rate`.
    pub fn uniform(num_antennas: usize, num_users: usize, noise_variance: f64, rate: f64) -> Self {
        Self {
            num_antennas,
            num_users,
            noise_variance,
            target_rates: vec![rate; num_users],
            power_budget: None,
            outage_probabilities: None,
            rng_seed: 0,
        }
    }

    pub fn with_power_budget(mut self, p: f64) -> Self {
        self.power_budget = Some(p);
        self
    }

    pub fn with_outage(mut self, rho: f64) -> Self {
        self.outage_probabilities = Some(vec![rho; self.num_users]);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_antennas == 0 {
            return Err(invalid("num_antennas must be at least 1"));
        }
        if self.num_users == 0 {
            return Err(invalid("num_users must be at least 1"));
        }
        if !(self.noise_variance > 0.0 && self.noise_variance.is_finite()) {
            return Err(invalid("noise_variance must be positive"));
        }
        if self.target_rates.len() != self.num_users {
            return Err(Error::DimensionMismatch {
                expected: self.num_users,
                found: self.target_rates.len(),
            });
        }
        if self.target_rates.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
            return Err(invalid("target rates must be finite and nonnegative"));
        }
        if let Some(p) = self.power_budget {
            if !(p > 0.0 && p.is_finite()) {
                return Err(invalid("power_budget must be positive"));
            }
        }
        if let Some(rho) = &self.outage_probabilities {
            if rho.len() != self.num_users {
                return Err(Error::DimensionMismatch {
                    expected: self.num_users,
                    found: rho.len(),
                });
            }
            if rho.iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
                return Err(invalid("outage probabilities must lie in (0, 1)"));
            }
        }
        Ok(())
    }

    /// Minimum SINRs `2^R - 1`.
    pub fn min_sinrs(&self) -> Result<Vec<f64>> {
        self.target_rates.iter().map(|&r| rate_to_min_sinr(r)).collect()
    }
}

/// Channel vectors ordered from weakest to strongest.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChannelSet {
    channels: Vec<CVec>,
    distances: Vec<f64>,
}

impl ChannelSet {
    /// Sorts users ascending by channel norm; ties keep their input order.
    pub fn new(channels: Vec<CVec>, distances: Vec<f64>) -> Result<Self> {
        let n = channels.len();
        if n == 0 {
            return Err(invalid("at least one channel is required"));
        }
        if distances.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: distances.len(),
            });
        }
        let m = channels[0].len();
        if m == 0 {
            return Err(invalid("channels must have at least one antenna"));
        }
        for h in &channels {
            if h.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    found: h.len(),
                });
            }
            if h.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
                return Err(invalid("channel entries must be finite"));
            }
            if norm_sqr(h) == 0.0 {
                return Err(Error::ZeroVector);
            }
        }
        let norms: Vec<f64> = channels.iter().map(|h| norm_sqr(h)).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| norms[a].partial_cmp(&norms[b]).unwrap_or(core::cmp::Ordering::Equal));
        Ok(Self {
            channels: order.iter().map(|&i| channels[i].clone()).collect(),
            distances: order.iter().map(|&i| distances[i]).collect(),
        })
    }

    /// Channels without distance information (distances recorded as 0).
    pub fn from_channels(channels: Vec<CVec>) -> Result<Self> {
        let n = channels.len();
        Self::new(channels, vec![0.0; n])
    }

    pub fn num_users(&self) -> usize {
        self.channels.len()
    }

    pub fn num_antennas(&self) -> usize {
        self.channels[0].len()
    }

    pub fn channel(&self, k: usize) -> &[Complex64] {
        &self.channels[k]
    }

    pub fn channels(&self) -> &[CVec] {
        &self.channels
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn gain(&self, k: usize) -> f64 {
        norm_sqr(&self.channels[k])
    }

    pub fn is_ordered(&self) -> bool {
        self.channels.windows(2).all(|p| norm_sqr(&p[0]) <= norm_sqr(&p[1]))
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BeamformerSet {
    pub beams: Vec<CVec>,
}

impl BeamformerSet {
    pub fn new(beams: Vec<CVec>) -> Self {
        Self { beams }
    }

    pub fn zeros(num_users: usize, num_antennas: usize) -> Self {
        Self {
            beams: vec![vec![Complex64::new(0.0, 0.0); num_antennas]; num_users],
        }
    }

    pub fn num_users(&self) -> usize {
        self.beams.len()
    }

    pub fn beam(&self, k: usize) -> &[Complex64] {
        &self.beams[k]
    }

    pub fn powers(&self) -> Vec<f64> {
        self.beams.iter().map(|w| norm_sqr(w)).collect()
    }

    pub fn total_power(&self) -> f64 {
        self.beams.iter().map(|w| norm_sqr(w)).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.beams
            .iter()
            .flatten()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Largest entrywise change `max_k ‖w_k − v_k‖∞`.
    pub fn max_change(&self, other: &BeamformerSet) -> f64 {
        self.beams
            .iter()
            .zip(&other.beams)
            .map(|(a, b)| crate::linalg::max_abs_diff(a, b))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RateReport {
    /// `sinr[k][j]` is the SINR of stream `k` decoded at user `k + j`.
    pub sinr: Vec<Vec<f64>>,
    pub rates: Vec<f64>,
    pub per_user_power: Vec<f64>,
    pub total_power: f64,
    /// Achieved over target rate; `None` for users with a zero target.
    pub satisfaction: Vec<Option<f64>>,
}

impl RateReport {
    pub fn sinr_at(&self, k: usize, l: usize) -> f64 {
        self.sinr[k][l - k]
    }

    pub fn min_rate(&self) -> f64 {
        self.rates.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn check_dims(channels: &ChannelSet, beams: &BeamformerSet) -> Result<()> {
    if beams.num_users() != channels.num_users() {
        return Err(Error::DimensionMismatch {
            expected: channels.num_users(),
            found: beams.num_users(),
        });
    }
    let m = channels.num_antennas();
    for w in &beams.beams {
        if w.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: w.len(),
            });
        }
    }
    Ok(())
}

/// `|h_lᴴ w_k|²` for every `(l, k)`.
pub fn gain_table(channels: &ChannelSet, beams: &BeamformerSet) -> Vec<Vec<f64>> {
    channels
        .channels()
        .iter()
        .map(|h| beams.beams.iter().map(|w| inner(h, w).norm_sqr()).collect())
        .collect()
}

fn sinr_from_gains(g: &[Vec<f64>], noise: f64, k: usize, l: usize) -> f64 {
    let interference: f64 = g[l][k + 1..].iter().sum();
    g[l][k] / (interference + noise)
}

/// SINR of stream `k` at user `l ≥ k` after cancelling streams `0..k`.
pub fn compute_sinr(
    channels: &ChannelSet,
    beams: &BeamformerSet,
    noise_variance: f64,
    k: usize,
    l: usize,
) -> Result<f64> {
    check_dims(channels, beams)?;
    let n = channels.num_users();
    if l >= n {
        return Err(Error::IndexOutOfRange { index: l, limit: n });
    }
    if k > l {
        return Err(Error::IndexOutOfRange { index: k, limit: l + 1 });
    }
    if !(noise_variance > 0.0) {
        return Err(invalid("noise variance must be positive"));
    }
    let h = channels.channel(l);
    let signal = inner(h, beams.beam(k)).norm_sqr();
    let interference: f64 = beams.beams[k + 1..]
        .iter()
        .map(|w| inner(h, w).norm_sqr())
        .sum();
    Ok(signal / (interference + noise_variance))
}

/// SINR table from precomputed gains, `out[k][j]` for decoder `k + j`.
pub fn sinr_table_from_gains(g: &[Vec<f64>], noise_variance: f64) -> Vec<Vec<f64>> {
    let n = g.len();
    (0..n)
        .map(|k| (k..n).map(|l| sinr_from_gains(g, noise_variance, k, l)).collect())
        .collect()
}

pub fn compute_rates(
    channels: &ChannelSet,
    beams: &BeamformerSet,
    config: &SystemConfig,
) -> Result<RateReport> {
    check_dims(channels, beams)?;
    if config.target_rates.len() != channels.num_users() {
        return Err(Error::DimensionMismatch {
            expected: channels.num_users(),
            found: config.target_rates.len(),
        });
    }
    let g = gain_table(channels, beams);
    let sinr = sinr_table_from_gains(&g, config.noise_variance);
    let rates: Vec<f64> = sinr
        .iter()
        .map(|row| (1.0 + row.iter().copied().fold(f64::INFINITY, f64::min)).log2())
        .collect();
    Ok(report(sinr, rates, beams, &config.target_rates))
}

fn report(sinr: Vec<Vec<f64>>, rates: Vec<f64>, beams: &BeamformerSet, targets: &[f64]) -> RateReport {
    let per_user_power = beams.powers();
    let total_power = per_user_power.iter().sum();
    let satisfaction = rates
        .iter()
        .zip(targets)
        .map(|(&r, &t)| if t > 0.0 { Some(r / t) } else { None })
        .collect();
    RateReport {
        sinr,
        rates,
        per_user_power,
        total_power,
        satisfaction,
    }
}

/// Rates without successive interference cancellation: every user treats
/// every other stream as noise. Used for the zero-forcing comparator, whose
/// streams are not decodable at other users.
pub fn compute_conventional_rates(
    channels: &ChannelSet,
    beams: &BeamformerSet,
    config: &SystemConfig,
) -> Result<RateReport> {
    check_dims(channels, beams)?;
    let g = gain_table(channels, beams);
    let n = channels.num_users();
    let sinr: Vec<Vec<f64>> = (0..n)
        .map(|k| {
            let interference: f64 = (0..n).filter(|&m| m != k).map(|m| g[k][m]).sum();
            vec![g[k][k] / (interference + config.noise_variance)]
        })
        .collect();
    let rates = sinr.iter().map(|s| (1.0 + s[0]).log2()).collect();
    Ok(report(sinr, rates, beams, &config.target_rates))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SicOrderCheck {
    pub holds: bool,
    /// Largest `|h_kᴴ w_{m+1}|² − |h_kᴴ w_m|²` over all receivers and adjacent pairs (0 if none positive).
    pub worst_violation: f64,
}

/// Checks `|h_kᴴ w_0|² ≥ |h_kᴴ w_1|² ≥ … ≥ |h_kᴴ w_{N-1}|²` at every receiver `k`.
pub fn check_sic_ordering(
    channels: &ChannelSet,
    beams: &BeamformerSet,
    tol: f64,
) -> Result<SicOrderCheck> {
    check_dims(channels, beams)?;
    let g = gain_table(channels, beams);
    let worst = g
        .iter()
        .flat_map(|row| row.windows(2).map(|p| p[1] - p[0]))
        .fold(0.0, f64::max);
    Ok(SicOrderCheck {
        holds: worst <= tol,
        worst_violation: worst,
    })
}

/// `2^R − 1`.
pub fn rate_to_min_sinr(rate: f64) -> Result<f64> {
    if rate < 0.0 || rate.is_nan() {
        return Err(Error::NegativeInput(rate));
    }
    Ok(rate.exp2() - 1.0)
}

/// `log2(1 + γ)`.
pub fn min_sinr_to_rate(sinr: f64) -> Result<f64> {
    if sinr < 0.0 || sinr.is_nan() {
        return Err(Error::NegativeInput(sinr));
    }
    Ok(sinr.ln_1p() / core::f64::consts::LN_2)
}

/// Worst relative shortfall `max(0, 1 − SINR_k^l / γ_k)` over all decoders
/// `l ≥ k` of users with `γ_k > 0`.
pub fn qos_shortfall(
    channels: &ChannelSet,
    beams: &BeamformerSet,
    noise_variance: f64,
    min_sinrs: &[f64],
) -> Result<f64> {
    check_dims(channels, beams)?;
    let g = gain_table(channels, beams);
    let sinr = sinr_table_from_gains(&g, noise_variance);
    let mut worst: f64 = 0.0;
    for (k, row) in sinr.iter().enumerate() {
        if min_sinrs[k] <= 0.0 {
            continue;
        }
        for s in row {
            worst = worst.max(1.0 - s / min_sinrs[k]);
        }
    }
    Ok(worst)
}

/// Least powers `p_k` such that beamformers `√p_k d_k/‖d_k‖` meet every SINR
/// target with the directions `d_k` held fixed.
///
/// Stream `k` is only interfered with by streams `m > k`, so the system is
/// triangular and solved from the strongest user down. Returns `None` when
/// some stream with a positive target has zero gain at a decoder.
pub fn min_powers_for_directions(
    channels: &ChannelSet,
    directions: &[CVec],
    noise_variance: f64,
    min_sinrs: &[f64],
) -> Option<Vec<f64>> {
    let n = channels.num_users();
    let g: Vec<Vec<f64>> = channels
        .channels()
        .iter()
        .map(|h| {
            directions
                .iter()
                .map(|d| {
                    let nd = norm_sqr(d);
                    if nd == 0.0 {
                        0.0
                    } else {
                        inner(h, d).norm_sqr() / nd
                    }
                })
                .collect()
        })
        .collect();
    let mut p = vec![0.0; n];
    for k in (0..n).rev() {
        if min_sinrs[k] <= 0.0 {
            continue;
        }
        let mut need: f64 = 0.0;
        for l in k..n {
            let interference: f64 = (k + 1..n).map(|m| p[m] * g[l][m]).sum();
            let required = min_sinrs[k] * (interference + noise_variance);
            if g[l][k] <= 1e-300 {
                return None;
            }
            need = need.max(required / g[l][k]);
        }
        if !need.is_finite() {
            return None;
        }
        p[k] = need;
    }
    Some(p)
}

/// Beamformers `√p_k d_k / ‖d_k‖`.
pub fn scale_directions(directions: &[CVec], powers: &[f64]) -> BeamformerSet {
    BeamformerSet::new(
        directions
            .iter()
            .zip(powers)
            .map(|(d, &p)| {
                let nd = norm_sqr(d).sqrt();
                if nd == 0.0 {
                    return d.clone();
                }
                let s = (p / (nd * nd)).sqrt();
                d.iter().map(|z| z * s).collect()
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn single_user_sinr_is_one() {
        let ch = ChannelSet::from_channels(vec![vec![c(1.0, 0.0), c(0.0, 0.0)]]).unwrap();
        let w = BeamformerSet::new(vec![vec![c(1.0, 0.0), c(0.0, 0.0)]]);
        assert_eq!(compute_sinr(&ch, &w, 1.0, 0, 0).unwrap(), 1.0);
        let cfg = SystemConfig::uniform(2, 1, 1.0, 1.0);
        let rep = compute_rates(&ch, &w, &cfg).unwrap();
        assert!((rep.rates[0] - 1.0).abs() < 1e-15);
        assert_eq!(rep.satisfaction[0], Some(rep.rates[0]));
    }

    #[test]
    fn orthogonal_interferer_contributes_nothing() {
        let ch = ChannelSet::from_channels(vec![
            vec![c(0.5, 0.0), c(0.0, 0.0)],
            vec![c(1.0, 0.0), c(0.0, 0.0)],
        ])
        .unwrap();
        let w = BeamformerSet::new(vec![
            vec![c(1.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(1.0, 0.0)],
        ]);
        assert!((compute_sinr(&ch, &w, 0.5, 0, 1).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn rate_uses_worst_decoder() {
        // stream 0 sees SINR 3 at its own receiver and 1 at the strong user
        let ch = ChannelSet::from_channels(vec![
            vec![c(3f64.sqrt(), 0.0), c(0.0, 0.0)],
            vec![c(1.0, 0.0), c(2.0, 0.0)],
        ])
        .unwrap();
        let w = BeamformerSet::new(vec![
            vec![c(1.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(0.0, 0.0)],
        ]);
        let cfg = SystemConfig::uniform(2, 2, 1.0, 1.0);
        let rep = compute_rates(&ch, &w, &cfg).unwrap();
        assert!((rep.sinr_at(0, 0) - 3.0).abs() < 1e-12);
        assert!((rep.sinr_at(0, 1) - 1.0).abs() < 1e-12);
        assert!((rep.rates[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn index_errors() {
        let ch = ChannelSet::from_channels(vec![vec![c(1.0, 0.0)]]).unwrap();
        let w = BeamformerSet::new(vec![vec![c(1.0, 0.0)]]);
        assert!(matches!(
            compute_sinr(&ch, &w, 1.0, 0, 1),
            Err(Error::IndexOutOfRange { .. })
        ));
        let bad = BeamformerSet::new(vec![vec![c(1.0, 0.0), c(0.0, 0.0)]]);
        assert!(matches!(
            compute_sinr(&ch, &bad, 1.0, 0, 0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rate_sinr_conversions() {
        assert_eq!(rate_to_min_sinr(0.0).unwrap(), 0.0);
        assert_eq!(rate_to_min_sinr(1.0).unwrap(), 1.0);
        assert_eq!(rate_to_min_sinr(2.0).unwrap(), 3.0);
        assert!((min_sinr_to_rate(3.0).unwrap() - 2.0).abs() < 1e-15);
        assert!(matches!(rate_to_min_sinr(-1.0), Err(Error::NegativeInput(_))));
        assert!(matches!(min_sinr_to_rate(-0.5), Err(Error::NegativeInput(_))));
    }

    #[test]
    fn sic_ordering_cases() {
        let ch = ChannelSet::from_channels(vec![vec![c(1.0, 0.0)]]).unwrap();
        let w = BeamformerSet::new(vec![vec![c(1.0, 0.0)]]);
        let chk = check_sic_ordering(&ch, &w, SIC_ORDER_TOL).unwrap();
        assert!(chk.holds && chk.worst_violation == 0.0);

        let ch = ChannelSet::from_channels(vec![
            vec![c(1.0, 0.0), c(0.0, 0.0)],
            vec![c(1.0, 0.0), c(0.0, 0.0)],
        ])
        .unwrap();
        let w = BeamformerSet::new(vec![
            vec![c(2f64.sqrt(), 0.0), c(0.0, 0.0)],
            vec![c(1.0, 0.0), c(0.0, 0.0)],
        ]);
        assert!(check_sic_ordering(&ch, &w, SIC_ORDER_TOL).unwrap().holds);
        let swapped = BeamformerSet::new(vec![w.beams[1].clone(), w.beams[0].clone()]);
        let chk = check_sic_ordering(&ch, &swapped, SIC_ORDER_TOL).unwrap();
        assert!(!chk.holds);
        assert!((chk.worst_violation - 1.0).abs() < 1e-12);
    }

    #[test]
    fn channel_set_sorts_stably() {
        let ch = ChannelSet::new(
            vec![vec![c(2.0, 0.0)], vec![c(0.0, 1.0)], vec![c(1.0, 0.0)]],
            vec![1.0, 2.0, 3.0],
        )
        .unwrap();
        assert!(ch.is_ordered());
        assert_eq!(ch.distances(), &[2.0, 3.0, 1.0]);
        assert!(matches!(
            ChannelSet::from_channels(vec![vec![c(0.0, 0.0)]]),
            Err(Error::ZeroVector)
        ));
    }

    #[test]
    fn back_substitution_makes_constraints_tight() {
        let ch = ChannelSet::from_channels(vec![
            vec![c(0.3, 0.1), c(-0.2, 0.4)],
            vec![c(1.0, -0.5), c(0.7, 0.2)],
        ])
        .unwrap();
        let dirs: Vec<CVec> = ch.channels().to_vec();
        let gam = [3.0, 3.0];
        let p = min_powers_for_directions(&ch, &dirs, 0.01, &gam).unwrap();
        let w = scale_directions(&dirs, &p);
        let short = qos_shortfall(&ch, &w, 0.01, &gam).unwrap();
        assert!(short < 1e-12);
        // at least one decoder of each stream is tight
        let g = gain_table(&ch, &w);
        let s = sinr_table_from_gains(&g, 0.01);
        for row in &s {
            let m = row.iter().copied().fold(f64::INFINITY, f64::min);
            assert!((m - 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn config_validation() {
        assert!(SystemConfig::uniform(2, 2, 0.01, 1.0).validate().is_ok());
        assert!(SystemConfig::uniform(0, 2, 0.01, 1.0).validate().is_err());
        assert!(SystemConfig::uniform(2, 2, 0.0, 1.0).validate().is_err());
        assert!(SystemConfig::uniform(2, 2, 0.01, 1.0).with_outage(1.0).validate().is_err());
        assert!(SystemConfig::uniform(2, 2, 0.01, -1.0).validate().is_err());
    }
}
