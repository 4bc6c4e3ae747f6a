//! Test-only oracles that share no code with the conic solver.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// A convex constraint `c(x) ≤ 0` on real variables.
#[derive(Debug, Clone)]
pub enum Constraint {
    /// `xᵀQx + qᵀx + r`, `Q ⪰ 0`.
    Quad { q2: DMatrix<f64>, q1: DVector<f64>, r: f64 },
    /// `‖A x + b‖ − (dᵀx + e)`.
    Soc { a: DMatrix<f64>, b: DVector<f64>, d: DVector<f64>, e: f64 },
}

impl Constraint {
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        match self {
            Constraint::Quad { q2, q1, r } => x.dot(&(q2 * x)) + q1.dot(x) + r,
            Constraint::Soc { a, b, d, e } => (a * x + b).norm() - d.dot(x) - e,
        }
    }

    fn derivatives(&self, x: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        match self {
            Constraint::Quad { q2, q1, .. } => (q2 * x * 2.0 + q1, q2 * 2.0),
            Constraint::Soc { a, b, d, .. } => {
                let u = a * x + b;
                let nu = u.norm();
                let atu = a.transpose() * &u;
                let g = &atu / nu - d;
                let h = (a.transpose() * a - &atu * atu.transpose() / (nu * nu)) / nu;
                (g, h)
            }
        }
    }

    /// The same constraint after the substitution `x = x0 + Z y`.
    pub fn restrict(&self, x0: &DVector<f64>, z: &DMatrix<f64>) -> Constraint {
        match self {
            Constraint::Quad { q2, q1, r } => Constraint::Quad {
                q2: z.transpose() * q2 * z,
                q1: z.transpose() * (q2 * x0 * 2.0 + q1),
                r: x0.dot(&(q2 * x0)) + q1.dot(x0) + r,
            },
            Constraint::Soc { a, b, d, e } => Constraint::Soc {
                a: a * z,
                b: a * x0 + b,
                d: z.transpose() * d,
                e: d.dot(x0) + e,
            },
        }
    }
}

/// Minimizes `xᵀPx` over `{c_i(x) ≤ 0}` by a log-barrier method with exact
/// Newton steps, started from a strictly feasible `x`.
pub fn barrier_minimize(p: &DMatrix<f64>, cons: &[Constraint], start: &DVector<f64>) -> Option<(f64, DVector<f64>)> {
    let mut x = start.clone();
    if cons.iter().any(|c| !(c.value(&x) < 0.0)) {
        return None;
    }
    let m = cons.len() as f64;
    let phi = |x: &DVector<f64>, t: f64| -> f64 {
        let mut v = t * x.dot(&(p * x));
        for c in cons {
            let s = -c.value(x);
            if !(s > 0.0) {
                return f64::INFINITY;
            }
            v -= s.ln();
        }
        v
    };
    let mut t = 1.0;
    loop {
        for _ in 0..200 {
            let mut g = p * &x * (2.0 * t);
            let mut h = p * (2.0 * t);
            for c in cons {
                let s = -c.value(&x);
                let (cg, ch) = c.derivatives(&x);
                g += &cg / s;
                h += ch / s + &cg * cg.transpose() / (s * s);
            }
            let step = match h.clone().cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => h.lu().solve(&(-&g))?,
            };
            let dec = -g.dot(&step);
            if dec / 2.0 < 1e-14 {
                break;
            }
            let f0 = phi(&x, t);
            let mut a = 1.0;
            loop {
                let cand = &x + &step * a;
                let fc = phi(&cand, t);
                if fc <= f0 - 0.25 * a * dec {
                    x = cand;
                    break;
                }
                a *= 0.5;
                if a < 1e-20 {
                    break;
                }
            }
            if a < 1e-20 {
                break;
            }
        }
        let f = x.dot(&(p * &x));
        if m / t < 1e-13 * f.max(1e-3) {
            return Some((f, x));
        }
        t *= 10.0;
    }
}

/// Orthonormal basis of the null space of the rows of `e`.
pub fn null_space(e: &DMatrix<f64>) -> DMatrix<f64> {
    let n = e.ncols();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut rows: Vec<DVector<f64>> = Vec::new();
    for r in 0..e.nrows() {
        let mut v = e.row(r).transpose();
        for u in &rows {
            v -= u * u.dot(&v);
        }
        if v.norm() > 1e-12 {
            rows.push(v.normalize());
        }
    }
    for i in 0..n {
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        for u in rows.iter().chain(basis.iter()) {
            v -= u * u.dot(&v);
        }
        if v.norm() > 1e-8 {
            basis.push(v.normalize());
        }
    }
    DMatrix::from_columns(&basis)
}

/// Real coordinates `[Re w_1, Im w_1, …, Re w_N, Im w_N]`, `2M` per user.
pub struct RealLayout {
    pub users: usize,
    pub antennas: usize,
}

impl RealLayout {
    pub fn dim(&self) -> usize {
        2 * self.users * self.antennas
    }

    pub fn pack(&self, beams: &[Vec<Complex64>]) -> DVector<f64> {
        let m = self.antennas;
        DVector::from_fn(self.dim(), |i, _| {
            let (k, r) = (i / (2 * m), i % (2 * m));
            if r < m {
                beams[k][r].re
            } else {
                beams[k][r - m].im
            }
        })
    }

    pub fn unpack(&self, x: &DVector<f64>) -> Vec<Vec<Complex64>> {
        let m = self.antennas;
        (0..self.users)
            .map(|k| (0..m).map(|i| Complex64::new(x[2 * m * k + i], x[2 * m * k + m + i])).collect())
            .collect()
    }

    /// Rows `(Re, Im)` of the map `x ↦ hᴴ w_k`.
    pub fn projection(&self, h: &[Complex64], k: usize) -> (DVector<f64>, DVector<f64>) {
        let m = self.antennas;
        let mut re = DVector::zeros(self.dim());
        let mut im = DVector::zeros(self.dim());
        for i in 0..m {
            let (a, b) = (h[i].re, h[i].im);
            // conj(h_i) w_i = (a − jb)(u + jv) = (au + bv) + j(av − bu).
            re[2 * m * k + i] = a;
            re[2 * m * k + m + i] = b;
            im[2 * m * k + i] = -b;
            im[2 * m * k + m + i] = a;
        }
        (re, im)
    }

    /// `|hᴴ w_k|²` as a quadratic form.
    pub fn gain_form(&self, h: &[Complex64], k: usize) -> DMatrix<f64> {
        let (re, im) = self.projection(h, k);
        &re * re.transpose() + &im * im.transpose()
    }

    /// Affine under-estimator `2 Re(a* hᴴw_k) − |a|²` with `a = hᴴ w_ref`:
    /// returns `(coefficients, constant)`.
    pub fn tangent(&self, h: &[Complex64], k: usize, w_ref: &[Complex64]) -> (DVector<f64>, f64) {
        let a: Complex64 = h.iter().zip(w_ref).map(|(x, y)| x.conj() * y).sum();
        let (re, im) = self.projection(h, k);
        (re * (2.0 * a.re) + im * (2.0 * a.im), -a.norm_sqr())
    }
}
