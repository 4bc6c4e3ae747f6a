//! Recovering beamformers from lifted solutions `W ≈ w wᴴ`.

use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::channel::complex_gaussian_vec;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_deviation, hermitian_eigen, mat_vec, psd_sqrt, CMatrix, CVec};
use crate::model::BeamformerSet;

/// Eigenvalues below `-PSD_TOL · max(1, λ₁)` reject the input.
pub const PSD_TOL: f64 = 1e-7;
/// `λ₂/λ₁` at or below which a matrix is treated as rank one.
pub const RANK_ONE_TOL: f64 = 1e-6;
/// Default number of randomization candidates.
pub const DEFAULT_CANDIDATES: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct RankOne {
    /// `√λ₁ v₁`.
    pub vector: CVec,
    /// `λ₂/λ₁`, or 0 for order-one and zero matrices.
    pub gap: f64,
    /// All eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
}

/// Principal-eigenvector extraction `w = √λ₁ v₁`.
pub fn extract_rank_one(w: &CMatrix) -> Result<RankOne> {
    let n = w.nrows();
    let scale = w.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let dev = hermitian_deviation(w);
    if dev > 1e-9 * scale {
        return Err(Error::NotHermitian(dev));
    }
    let (vals, vecs) = hermitian_eigen(w);
    let l1 = vals.first().copied().unwrap_or(0.0);
    let lmin = vals.last().copied().unwrap_or(0.0);
    if lmin < -PSD_TOL * l1.max(1.0) {
        return Err(Error::NotPositiveSemidefinite(lmin));
    }
    if l1 <= 0.0 {
        return Ok(RankOne {
            vector: alloc::vec![Complex64::new(0.0, 0.0); n],
            gap: 0.0,
            eigenvalues: vals,
        });
    }
    let gap = vals.get(1).map_or(0.0, |l2| (l2 / l1).max(0.0));
    let r = l1.sqrt();
    let vector = vecs[0].iter().map(|z| z * r).collect();
    Ok(RankOne {
        vector,
        gap,
        eigenvalues: vals,
    })
}

/// Gaussian randomization over a set of lifted solutions.
///
/// If every `W_k` is numerically rank one the extracted vectors are returned
/// as they are. Otherwise `num_candidates` direction sets `W_k^{1/2} u` with
/// `u ~ CN(0, I)` are drawn; `scale` turns a direction set into a feasible
/// beamformer set (or rejects it), and the feasible candidate with the least
/// total power wins.
pub fn randomize_rank_one<R, F>(
    w_set: &[CMatrix],
    num_candidates: usize,
    rng: &mut R,
    mut scale: F,
) -> Result<BeamformerSet>
where
    R: Rng + ?Sized,
    F: FnMut(&[CVec]) -> Option<BeamformerSet>,
{
    let extracted = w_set.iter().map(extract_rank_one).collect::<Result<Vec<_>>>()?;
    if extracted.iter().all(|r| r.gap <= RANK_ONE_TOL) {
        return Ok(BeamformerSet::new(extracted.into_iter().map(|r| r.vector).collect()));
    }
    let roots: Vec<CMatrix> = w_set.iter().map(psd_sqrt).collect();
    let mut best: Option<BeamformerSet> = None;
    for _ in 0..num_candidates {
        let dirs: Vec<CVec> = roots
            .iter()
            .map(|r| mat_vec(r, &complex_gaussian_vec(rng, r.nrows())))
            .collect();
        if let Some(cand) = scale(&dirs) {
            if best.as_ref().is_none_or(|b| cand.total_power() < b.total_power()) {
                best = Some(cand);
            }
        }
    }
    best.ok_or(Error::RandomizationFailed(num_candidates))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{stream_rng, Stream};
    use crate::linalg::outer;
    use alloc::vec;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn exact_rank_one_recovers_vector() {
        let s = core::f64::consts::FRAC_1_SQRT_2;
        let v = vec![c(s, 0.0), c(0.0, s)];
        let r = extract_rank_one(&outer(&v)).unwrap();
        assert!(r.gap < 1e-14);
        let z: Complex64 = r.vector.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
        assert!((z.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identity_has_unit_gap() {
        let r = extract_rank_one(&CMatrix::identity(2, 2)).unwrap();
        assert!((r.gap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_matrix_gives_zero_vector() {
        let r = extract_rank_one(&CMatrix::zeros(3, 3)).unwrap();
        assert_eq!(r.gap, 0.0);
        assert!(r.vector.iter().all(|z| *z == c(0.0, 0.0)));
    }

    #[test]
    fn indefinite_is_rejected() {
        let m = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0, 0.0), c(-0.1, 0.0)]));
        assert!(matches!(extract_rank_one(&m), Err(Error::NotPositiveSemidefinite(_))));
    }

    #[test]
    fn rank_one_inputs_pass_through() {
        let v = vec![c(1.0, 2.0), c(-0.5, 0.0)];
        let mut rng = stream_rng(0, 0, 0, Stream::Randomization);
        let out = randomize_rank_one(&[outer(&v)], 10, &mut rng, |_| None).unwrap();
        assert!((out.total_power() - 5.25).abs() < 1e-12);
    }

    #[test]
    fn rejecting_every_candidate_fails() {
        let mut rng = stream_rng(0, 0, 0, Stream::Randomization);
        let err = randomize_rank_one(&[CMatrix::identity(2, 2)], 7, &mut rng, |_| None).unwrap_err();
        assert_eq!(err, Error::RandomizationFailed(7));
    }
}
