//! Small dense complex linear-algebra helpers shared by the designs.
//!
//! Vectors are plain `Vec<Complex64>`; matrices go through `nalgebra`.

use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

pub type CVec = Vec<Complex64>;
pub type CMatrix = DMatrix<Complex64>;

/// Tolerance used when validating Hermitian inputs.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// `aᴴ b`.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

pub fn norm(v: &[Complex64]) -> f64 {
    norm_sqr(v).sqrt()
}

pub fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn scale(v: &[Complex64], s: Complex64) -> CVec {
    v.iter().map(|z| z * s).collect()
}

/// `h hᴴ`.
pub fn outer(h: &[Complex64]) -> CMatrix {
    let n = h.len();
    CMatrix::from_fn(n, n, |i, j| h[i] * h[j].conj())
}

/// `wᴴ A w` (real part; exact for Hermitian `A`).
pub fn quad_form(a: &CMatrix, w: &[Complex64]) -> f64 {
    let n = w.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        let mut row = Complex64::new(0.0, 0.0);
        for j in 0..n {
            row += a[(i, j)] * w[j];
        }
        acc += w[i].conj() * row;
    }
    acc.re
}

/// `Re Tr(A B)` for square matrices of equal order.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    acc
}

/// Largest entrywise deviation `|A - Aᴴ|`.
pub fn hermitian_deviation(a: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    dev
}

/// A validated Hermitian matrix.
///
/// Serialized (with the `serde` feature) in packed form: the upper triangle
/// row by row, each entry an `[re, im]` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(CMatrix);

impl HermitianMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        let scale = m.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let dev = hermitian_deviation(&m);
        if dev > HERMITIAN_TOL * scale {
            return Err(Error::NotHermitian(dev));
        }
        Ok(Self::symmetrized(m))
    }

    /// Averages `m` with its conjugate transpose; no validation.
    pub fn symmetrized(m: CMatrix) -> Self {
        let h = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
        Self(h)
    }

    pub fn zeros(n: usize) -> Self {
        Self(CMatrix::zeros(n, n))
    }

    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        (0..self.order()).map(|i| self.0[(i, i)].re).sum()
    }

    /// Upper triangle, row by row.
    pub fn packed(&self) -> Vec<Complex64> {
        let n = self.order();
        let mut out = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    pub fn from_packed(n: usize, packed: &[Complex64]) -> Result<Self> {
        if packed.len() != n * (n + 1) / 2 {
            return Err(Error::DimensionMismatch {
                expected: n * (n + 1) / 2,
                found: packed.len(),
            });
        }
        let mut m = CMatrix::zeros(n, n);
        let mut it = packed.iter();
        for i in 0..n {
            for j in i..n {
                let z = *it.next().expect("length checked");
                if i == j {
                    m[(i, i)] = Complex64::new(z.re, 0.0);
                } else {
                    m[(i, j)] = z;
                    m[(j, i)] = z.conj();
                }
            }
        }
        Ok(Self(m))
    }

    /// Eigenvalues in descending order with matching unit eigenvectors.
    pub fn eigen(&self) -> (Vec<f64>, Vec<CVec>) {
        hermitian_eigen(&self.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let (vals, _) = self.eigen();
        vals.last().copied().unwrap_or(0.0)
    }
}

#[cfg(feature = "serde")]
mod hermitian_serde {
    use super::*;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Packed {
        order: usize,
        upper: Vec<Complex64>,
    }

    impl Serialize for HermitianMatrix {
        fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
            Packed {
                order: self.order(),
                upper: self.packed(),
            }
            .serialize(s)
        }
    }

    impl<'de> Deserialize<'de> for HermitianMatrix {
        fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
            let p = Packed::deserialize(d)?;
            HermitianMatrix::from_packed(p.order, &p.upper).map_err(serde::de::Error::custom)
        }
    }
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues descending.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, Vec<CVec>) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = order
        .iter()
        .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
        .collect();
    (vals, vecs)
}

/// Principal square root of a Hermitian PSD matrix; negative eigenvalues are clipped.
pub fn psd_sqrt(m: &CMatrix) -> CMatrix {
    let n = m.nrows();
    let (vals, vecs) = hermitian_eigen(m);
    let mut out = CMatrix::zeros(n, n);
    for (lam, v) in vals.iter().zip(&vecs) {
        let r = lam.max(0.0).sqrt();
        if r == 0.0 {
            continue;
        }
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] += v[i] * v[j].conj() * r;
            }
        }
    }
    out
}

pub fn mat_vec(m: &CMatrix, v: &[Complex64]) -> CVec {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum())
        .collect()
}

/// Real symmetric `2n x 2n` realification `[[Re H, -Im H], [Im H, Re H]]`.
///
/// For Hermitian `H` and `W`, `Tr(H W) = ½ Tr(embed(H) embed(W))`, and `H ⪰ 0`
/// iff its embedding is.
pub fn embed_hermitian(h: &CMatrix) -> Result<DMatrix<f64>> {
    let n = h.nrows();
    if h.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: h.ncols(),
        });
    }
    let scale = h.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let dev = hermitian_deviation(h);
    if dev > HERMITIAN_TOL * scale {
        return Err(Error::NotHermitian(dev));
    }
    Ok(DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let (bi, bj) = (i / n, j / n);
        let z = h[(i % n, j % n)];
        match (bi, bj) {
            (0, 0) | (1, 1) => z.re,
            (0, 1) => -z.im,
            _ => z.im,
        }
    }))
}

/// Maps a real symmetric `2n x 2n` matrix back to the Hermitian matrix
/// `½(X₁₁ + X₂₂) + j·½(X₂₁ − X₁₂)`.
///
/// Inverts [`embed_hermitian`] exactly; for an arbitrary PSD `X` the result is
/// PSD and satisfies `Tr(H W) = ½ Tr(embed(H) X)`.
pub fn deembed(x: &DMatrix<f64>) -> CMatrix {
    let n = x.nrows() / 2;
    CMatrix::from_fn(n, n, |i, j| {
        let re = 0.5 * (x[(i, j)] + x[(i + n, j + n)]);
        let im = 0.5 * (x[(i + n, j)] - x[(i, j + n)]);
        Complex64::new(re, im)
    })
}

/// Rotates `w` so that `hᴴ w` is real and nonnegative.
pub fn align_phase(h: &[Complex64], w: &[Complex64]) -> CVec {
    let z = inner(h, w);
    let r = z.norm();
    if r == 0.0 {
        return w.to_vec();
    }
    let rot = z.conj() / r;
    scale(w, rot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn embed_identity() {
        let e = embed_hermitian(&CMatrix::identity(2, 2)).unwrap();
        assert_eq!(e, DMatrix::<f64>::identity(4, 4));
    }

    #[test]
    fn embed_rejects_non_hermitian() {
        let m = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(embed_hermitian(&m), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn embed_of_pauli_y_has_doubled_spectrum() {
        let m = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(0.0, 0.0)]);
        let e = embed_hermitian(&m).unwrap();
        let mut vals: Vec<f64> = e.symmetric_eigen().eigenvalues.iter().copied().collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expect = [-1.0, -1.0, 1.0, 1.0];
        for (v, e) in vals.iter().zip(expect) {
            assert!((v - e).abs() < 1e-12);
        }
    }

    #[test]
    fn deembed_roundtrip_is_exact() {
        let m = CMatrix::from_row_slice(
            2,
            2,
            &[c(0.3, 0.0), c(0.1, -0.7), c(0.1, 0.7), c(-2.0, 0.0)],
        );
        assert_eq!(deembed(&embed_hermitian(&m).unwrap()), m);
    }

    #[test]
    fn packed_roundtrip() {
        let m = HermitianMatrix::new(outer(&[c(1.0, 2.0), c(-0.5, 0.25), c(0.0, 1.0)])).unwrap();
        let back = HermitianMatrix::from_packed(3, &m.packed()).unwrap();
        assert!((back.matrix() - m.matrix()).norm() < 1e-15);
    }

    #[test]
    fn align_phase_makes_projection_real() {
        let h = vec![c(0.3, -1.0), c(2.0, 0.5)];
        let w = vec![c(-1.0, 0.2), c(0.1, 0.9)];
        let z = inner(&h, &align_phase(&h, &w));
        assert!(z.im.abs() < 1e-14 && z.re > 0.0);
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let m = outer(&[c(1.0, 1.0), c(0.5, -0.2)]) + CMatrix::identity(2, 2);
        let r = psd_sqrt(&m);
        assert!((&r * &r - &m).norm() < 1e-12);
    }
}
