//! Packed storage of real symmetric matrices.
//!
//! `svec` stacks the lower triangle column by column and multiplies the
//! off-diagonal entries by √2, so that `svec(X)ᵀ svec(Y) = Tr(X Y)`.

use alloc::vec::Vec;

use nalgebra::DMatrix;

pub const SQRT2: f64 = core::f64::consts::SQRT_2;

/// Length of the packed vector for a matrix of order `n`.
pub const fn packed_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Order `n` with `packed_len(n) == len`, if any.
pub fn order_of(len: usize) -> Option<usize> {
    let mut n = 0;
    while packed_len(n) < len {
        n += 1;
    }
    (packed_len(n) == len).then_some(n)
}

/// Position of entry `(i, j)`, `i ≥ j`, inside the packed vector.
pub fn packed_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i >= j { (i, j) } else { (j, i) };
    j * n - j * (j + 1) / 2 + i
}

/// Scale applied to entry `(i, j)` when packing.
pub fn entry_scale(i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else {
        SQRT2
    }
}

pub fn svec(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(packed_len(n));
    for j in 0..n {
        out.push(m[(j, j)]);
        for i in j + 1..n {
            out.push(SQRT2 * 0.5 * (m[(i, j)] + m[(j, i)]));
        }
    }
    out
}

pub fn smat(v: &[f64], n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    for j in 0..n {
        m[(j, j)] = v[k];
        k += 1;
        for i in j + 1..n {
            let x = v[k] / SQRT2;
            m[(i, j)] = x;
            m[(j, i)] = x;
            k += 1;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_inner_product() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, -1.0, 1.0, 3.0, 0.5, -1.0, 0.5, 1.0]);
        let b = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 2.0, 0.0, -1.0, 1.0, 2.0, 1.0, 4.0]);
        assert_eq!(smat(&svec(&a), 3), a);
        let ip: f64 = svec(&a).iter().zip(svec(&b)).map(|(x, y)| x * y).sum();
        assert!((ip - (&a * &b).trace()).abs() < 1e-12);
    }

    #[test]
    fn index_layout() {
        assert_eq!(packed_index(3, 0, 0), 0);
        assert_eq!(packed_index(3, 2, 0), 2);
        assert_eq!(packed_index(3, 1, 1), 3);
        assert_eq!(packed_index(3, 2, 1), 4);
        assert_eq!(packed_index(3, 1, 2), 4);
        assert_eq!(packed_index(3, 2, 2), 5);
        assert_eq!(order_of(10), Some(4));
        assert_eq!(order_of(7), None);
    }
}
