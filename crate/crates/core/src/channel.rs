//! Seeded channel generation and covariance-uncertainty sampling.
//!
//! Every random draw comes from a ChaCha stream keyed by
//! `(seed, trial, sub-index, stream id)`, so any trial can be regenerated in
//! isolation and in any order.

use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::linalg::{outer, CMatrix, CVec, HermitianMatrix};
use crate::model::{ChannelSet, SystemConfig};

/// Independent random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Distance = 1,
    Fading = 2,
    Uncertainty = 3,
    Randomization = 4,
    Surrogate = 5,
    Initialization = 6,
}

/// Deterministic generator for `(seed, trial, sub, stream)`.
pub fn stream_rng(seed: u64, trial: u64, sub: u64, stream: Stream) -> ChaCha20Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&trial.to_le_bytes());
    key[16..24].copy_from_slice(&sub.to_le_bytes());
    let mut rng = ChaCha20Rng::from_seed(key);
    rng.set_stream(stream as u64);
    rng
}

/// Circularly-symmetric complex Gaussian with `E|z|² = variance`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * s, im * s)
}

pub fn complex_gaussian_vec<R: Rng + ?Sized>(rng: &mut R, len: usize) -> CVec {
    (0..len).map(|_| complex_gaussian(rng, 1.0)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChannelModelParams {
    /// Cell radius in m.
    pub cell_radius: f64,
    /// Minimum user distance in m.
    pub min_distance: f64,
    /// Path-loss exponent.
    pub pathloss_exponent: f64,
}

impl Default for ChannelModelParams {
    fn default() -> Self {
        Self {
            cell_radius: 50.0,
            min_distance: 1.0,
            pathloss_exponent: 3.8,
        }
    }
}

impl ChannelModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_distance > 0.0 && self.min_distance < self.cell_radius) {
            return Err(invalid("need 0 < min_distance < cell_radius"));
        }
        if !(self.pathloss_exponent >= 0.0 && self.pathloss_exponent.is_finite()) {
            return Err(invalid("pathloss exponent must be nonnegative"));
        }
        Ok(())
    }

    /// Amplitude factor `sqrt(d^-β)`.
    pub fn amplitude(&self, distance: f64) -> f64 {
        distance.powf(-self.pathloss_exponent).sqrt()
    }
}

/// User distances, uniform over the annulus `[min_distance, cell_radius]`.
///
/// Depends only on the seed: distances stay fixed across trials.
pub fn user_distances(seed: u64, params: &ChannelModelParams, num_users: usize) -> Vec<f64> {
    let mut rng = stream_rng(seed, 0, 0, Stream::Distance);
    let (r0, r) = (params.min_distance, params.cell_radius);
    (0..num_users)
        .map(|_| {
            let u: f64 = rng.random();
            (u * (r * r - r0 * r0) + r0 * r0).sqrt()
        })
        .collect()
}

/// Channels `h_k = χ_k sqrt(d_k^-β)` with `χ_k ~ CN(0, I)`, sorted by norm.
pub fn generate_channels(
    config: &SystemConfig,
    params: &ChannelModelParams,
    trial: u64,
) -> Result<ChannelSet> {
    params.validate()?;
    let d = user_distances(config.rng_seed, params, config.num_users);
    channels_at_distances(config.rng_seed, params, &d, config.num_antennas, trial)
}

pub fn channels_at_distances(
    seed: u64,
    params: &ChannelModelParams,
    distances: &[f64],
    num_antennas: usize,
    trial: u64,
) -> Result<ChannelSet> {
    let mut rng = stream_rng(seed, trial, 0, Stream::Fading);
    let channels = distances
        .iter()
        .map(|&d| {
            let a = params.amplitude(d);
            complex_gaussian_vec(&mut rng, num_antennas)
                .into_iter()
                .map(|z| z * a)
                .collect()
        })
        .collect();
    ChannelSet::new(channels, distances.to_vec())
}

/// Nominal covariances plus entrywise error standard deviations.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct UncertaintyModel {
    pub nominal: Vec<HermitianMatrix>,
    /// `σ_ij`, real and nonnegative; only the upper triangle is used.
    /// Serialized as a list of rows.
    #[cfg_attr(feature = "serde", serde(with = "square_rows"))]
    pub error_std: DMatrix<f64>,
    pub outage: Vec<f64>,
}

#[cfg(feature = "serde")]
mod square_rows {
    use alloc::vec::Vec;

    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(serde::de::Error::custom("error_std must be a square list of rows"));
        }
        Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }
}

impl UncertaintyModel {
    /// Rank-one nominal covariances from `channels`, uniform error variance.
    pub fn from_channels(channels: &ChannelSet, error_variance: f64, outage: f64) -> Result<Self> {
        if error_variance < 0.0 {
            return Err(Error::NegativeInput(error_variance));
        }
        let m = channels.num_antennas();
        let nominal = channels
            .channels()
            .iter()
            .map(|h| nominal_covariance_from_channel(h))
            .collect::<Result<Vec<_>>>()?;
        let model = Self {
            nominal,
            error_std: DMatrix::from_element(m, m, error_variance.sqrt()),
            outage: alloc::vec![outage; channels.num_users()],
        };
        model.validate()?;
        Ok(model)
    }

    pub fn num_users(&self) -> usize {
        self.nominal.len()
    }

    pub fn num_antennas(&self) -> usize {
        self.error_std.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.error_std.nrows();
        if self.error_std.ncols() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: self.error_std.ncols(),
            });
        }
        if self.outage.len() != self.nominal.len() {
            return Err(Error::DimensionMismatch {
                expected: self.nominal.len(),
                found: self.outage.len(),
            });
        }
        for c in &self.nominal {
            if c.order() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    found: c.order(),
                });
            }
            let lam = c.min_eigenvalue();
            if lam < -1e-9 {
                return Err(Error::NotPositiveSemidefinite(lam));
            }
        }
        if self.error_std.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(invalid("error standard deviations must be nonnegative"));
        }
        if self.outage.iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
            return Err(invalid("outage probabilities must lie in (0, 1)"));
        }
        Ok(())
    }

    pub fn with_error_std(&self, error_std: DMatrix<f64>) -> Self {
        Self {
            error_std,
            ..self.clone()
        }
    }
}

/// One Hermitian error matrix: real `N(0, σ_ii²)` diagonal, `CN(0, σ_ij²)`
/// upper triangle mirrored by conjugation.
pub fn sample_hermitian_error<R: Rng + ?Sized>(rng: &mut R, error_std: &DMatrix<f64>) -> CMatrix {
    let m = error_std.nrows();
    let mut d = CMatrix::zeros(m, m);
    for i in 0..m {
        let g: f64 = StandardNormal.sample(rng);
        d[(i, i)] = Complex64::new(g * error_std[(i, i)], 0.0);
        for j in i + 1..m {
            let s = error_std[(i, j)];
            let z = complex_gaussian(rng, s * s);
            d[(i, j)] = z;
            d[(j, i)] = z.conj();
        }
    }
    d
}

/// Per-user error matrices for sample `sample` of trial `trial`.
pub fn sample_uncertainty(model: &UncertaintyModel, seed: u64, trial: u64, sample: u64) -> Vec<CMatrix> {
    let mut rng = stream_rng(seed, trial, sample, Stream::Uncertainty);
    (0..model.num_users())
        .map(|_| sample_hermitian_error(&mut rng, &model.error_std))
        .collect()
}

/// `h hᴴ`.
pub fn nominal_covariance_from_channel(h: &[Complex64]) -> Result<HermitianMatrix> {
    if h.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
        return Err(Error::ZeroVector);
    }
    Ok(HermitianMatrix::symmetrized(outer(h)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn same_seed_same_channels() {
        let cfg = SystemConfig::uniform(3, 4, 0.01, 1.0).with_seed(9);
        let p = ChannelModelParams::default();
        let a = generate_channels(&cfg, &p, 5).unwrap();
        let b = generate_channels(&cfg, &p, 5).unwrap();
        assert_eq!(a, b);
        assert!(a.is_ordered());
        let c = generate_channels(&cfg, &p, 6).unwrap();
        assert_ne!(a, c);
        let mut da = a.distances().to_vec();
        let mut dc = c.distances().to_vec();
        da.sort_by(|x, y| x.partial_cmp(y).unwrap());
        dc.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert_eq!(da, dc);
    }

    #[test]
    fn amplitude_at_ten_metres() {
        let p = ChannelModelParams::default();
        let a = p.amplitude(10.0);
        assert!((a * a - 1.584_893_192_461_113_5e-4).abs() < 1e-16);
    }

    #[test]
    fn distances_respect_annulus() {
        let p = ChannelModelParams::default();
        for d in user_distances(3, &p, 500) {
            assert!((1.0..=50.0).contains(&d));
        }
    }

    #[test]
    fn zero_std_gives_zero_error() {
        let mut rng = stream_rng(1, 2, 3, Stream::Uncertainty);
        let d = sample_hermitian_error(&mut rng, &DMatrix::zeros(3, 3));
        assert!(d.iter().all(|z| *z == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn samples_are_exactly_hermitian() {
        let mut rng = stream_rng(1, 0, 0, Stream::Uncertainty);
        let std = DMatrix::from_element(3, 3, 0.0707);
        for _ in 0..50 {
            let d = sample_hermitian_error(&mut rng, &std);
            assert_eq!(&d, &d.adjoint());
        }
    }

    #[test]
    fn nominal_covariance_is_outer_product() {
        let h = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let c = nominal_covariance_from_channel(&h).unwrap();
        assert_eq!(c.matrix()[(0, 0)], Complex64::new(1.0, 0.0));
        assert_eq!(c.trace(), 1.0);
        assert!(nominal_covariance_from_channel(&[Complex64::new(0.0, 0.0)]).is_err());
    }
}
