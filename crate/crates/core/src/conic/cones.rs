//! Per-cone primitives for the interior-point method: Nesterov–Todd
//! scalings, Jordan algebra products and step-length computation.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix};
#[allow(unused_imports)]
use num_traits::Float;

use super::svec::{packed_index, smat, svec};
use super::Cone;

/// Identity element `e` of the cone.
pub(super) fn identity(cone: Cone, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    match cone {
        Cone::NonNegative(_) => out.iter_mut().for_each(|v| *v = 1.0),
        Cone::SecondOrder(_) => out[0] = 1.0,
        Cone::Psd(n) => {
            for i in 0..n {
                out[packed_index(n, i, i)] = 1.0;
            }
        }
    }
}

fn soc_jdet(x: &[f64]) -> f64 {
    let t = x[0];
    let u = x[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
    (t - u) * (t + u)
}

/// Strict interior membership, in the same arithmetic the scalings use.
pub(super) fn is_interior(cone: Cone, x: &[f64]) -> bool {
    match cone {
        Cone::NonNegative(_) => x.iter().all(|&v| v > 0.0),
        Cone::SecondOrder(_) => x[0] > 0.0 && soc_jdet(x) > 0.0,
        Cone::Psd(n) => Cholesky::new(smat(x, n)).is_some(),
    }
}

/// NT scaling `W` of one cone, satisfying `W s = W⁻ᵀ x = λ`.
#[derive(Debug, Clone)]
pub(super) enum Scaling {
    Lp { w: Vec<f64> },
    /// `W = β (2 v vᵀ − J)`.
    Soc { beta: f64, v: Vec<f64> },
    /// `W(U) = rᵀ U r`.
    Psd { n: usize, r: DMatrix<f64>, rinv: DMatrix<f64> },
}

/// Computes the scaling and `λ` for the pair `(x, s)`; `None` if either
/// point is not strictly interior.
pub(super) fn scaling(cone: Cone, x: &[f64], s: &[f64]) -> Option<(Scaling, Vec<f64>)> {
    match cone {
        Cone::NonNegative(_) => {
            if x.iter().chain(s).any(|&v| !(v > 0.0)) {
                return None;
            }
            let w = x.iter().zip(s).map(|(a, b)| (a / b).sqrt()).collect();
            let lam = x.iter().zip(s).map(|(a, b)| (a * b).sqrt()).collect();
            Some((Scaling::Lp { w }, lam))
        }
        Cone::SecondOrder(d) => {
            let (xd, sd) = (soc_jdet(x), soc_jdet(s));
            if !(xd > 0.0 && sd > 0.0 && x[0] > 0.0 && s[0] > 0.0) {
                return None;
            }
            let (xn, sn) = (xd.sqrt(), sd.sqrt());
            let xb: Vec<f64> = x.iter().map(|v| v / xn).collect();
            let sb: Vec<f64> = s.iter().map(|v| v / sn).collect();
            let dot: f64 = xb.iter().zip(&sb).map(|(a, b)| a * b).sum();
            let gamma = ((1.0 + dot) / 2.0).sqrt();
            let mut wb = vec![0.0; d];
            wb[0] = (xb[0] + sb[0]) / (2.0 * gamma);
            for i in 1..d {
                wb[i] = (xb[i] - sb[i]) / (2.0 * gamma);
            }
            let beta = (xn / sn).sqrt();
            let denom = (2.0 * (wb[0] + 1.0)).sqrt();
            let mut v = wb;
            v[0] += 1.0;
            v.iter_mut().for_each(|e| *e /= denom);
            let sc = Scaling::Soc { beta, v };
            let lam = sc.w(s);
            Some((sc, lam))
        }
        Cone::Psd(n) => {
            let lx = Cholesky::new(smat(x, n))?.l();
            let ls = Cholesky::new(smat(s, n))?.l();
            let prod = ls.transpose() * &lx;
            let svd = prod.svd(true, true);
            let u = svd.u?;
            let vt = svd.v_t?;
            let sig = svd.singular_values;
            if sig.iter().any(|&g| !(g > 0.0)) {
                return None;
            }
            let mut r = &lx * vt.transpose();
            let mut rinv = u.transpose() * ls.transpose();
            for k in 0..n {
                let f = sig[k].sqrt();
                for i in 0..n {
                    r[(i, k)] /= f;
                    rinv[(k, i)] /= f;
                }
            }
            let mut lam = vec![0.0; super::svec::packed_len(n)];
            for i in 0..n {
                lam[packed_index(n, i, i)] = sig[i];
            }
            Some((Scaling::Psd { n, r, rinv }, lam))
        }
    }
}

impl Scaling {
    /// `W u`.
    pub(super) fn w(&self, u: &[f64]) -> Vec<f64> {
        match self {
            Scaling::Lp { w } => u.iter().zip(w).map(|(a, b)| a * b).collect(),
            Scaling::Soc { beta, v } => {
                let vu: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                let mut out: Vec<f64> = v.iter().map(|vi| 2.0 * vi * vu).collect();
                out[0] -= u[0];
                for i in 1..u.len() {
                    out[i] += u[i];
                }
                out.iter_mut().for_each(|e| *e *= beta);
                out
            }
            Scaling::Psd { n, r, .. } => svec(&(r.transpose() * smat(u, *n) * r)),
        }
    }

    /// `Wᵀ u`.
    pub(super) fn wt(&self, u: &[f64]) -> Vec<f64> {
        match self {
            Scaling::Psd { n, r, .. } => svec(&(r * smat(u, *n) * r.transpose())),
            _ => self.w(u),
        }
    }

    /// `W⁻¹ u`.
    pub(super) fn winv(&self, u: &[f64]) -> Vec<f64> {
        match self {
            Scaling::Lp { w } => u.iter().zip(w).map(|(a, b)| a / b).collect(),
            Scaling::Soc { beta, v } => {
                // W⁻¹ = (2 J v vᵀ J − J) / β
                let mut jv = v.clone();
                jv[1..].iter_mut().for_each(|e| *e = -*e);
                let jvu: f64 = jv.iter().zip(u).map(|(a, b)| a * b).sum();
                let mut out: Vec<f64> = jv.iter().map(|a| 2.0 * a * jvu).collect();
                out[0] -= u[0];
                for i in 1..u.len() {
                    out[i] += u[i];
                }
                out.iter_mut().for_each(|e| *e /= beta);
                out
            }
            Scaling::Psd { n, rinv, .. } => svec(&(rinv.transpose() * smat(u, *n) * rinv)),
        }
    }

    /// `W⁻ᵀ u`.
    pub(super) fn winvt(&self, u: &[f64]) -> Vec<f64> {
        match self {
            Scaling::Psd { n, rinv, .. } => svec(&(rinv * smat(u, *n) * rinv.transpose())),
            _ => self.winv(u),
        }
    }
}

/// Jordan product `u ∘ v`.
pub(super) fn jordan(cone: Cone, u: &[f64], v: &[f64]) -> Vec<f64> {
    match cone {
        Cone::NonNegative(_) => u.iter().zip(v).map(|(a, b)| a * b).collect(),
        Cone::SecondOrder(_) => {
            let mut out = Vec::with_capacity(u.len());
            out.push(u.iter().zip(v).map(|(a, b)| a * b).sum());
            for i in 1..u.len() {
                out.push(u[0] * v[i] + v[0] * u[i]);
            }
            out
        }
        Cone::Psd(n) => {
            let (a, b) = (smat(u, n), smat(v, n));
            let p = &a * &b;
            svec(&((&p + p.transpose()) * 0.5))
        }
    }
}

/// Solves `λ ∘ z = r` for `z`, with `λ` as produced by [`scaling`].
pub(super) fn jordan_div(cone: Cone, lam: &[f64], r: &[f64]) -> Vec<f64> {
    match cone {
        Cone::NonNegative(_) => r.iter().zip(lam).map(|(a, b)| a / b).collect(),
        Cone::SecondOrder(_) => {
            let l0 = lam[0];
            let l1r1: f64 = lam[1..].iter().zip(&r[1..]).map(|(a, b)| a * b).sum();
            let det = soc_jdet(lam);
            let z0 = (l0 * r[0] - l1r1) / det;
            let mut out = Vec::with_capacity(r.len());
            out.push(z0);
            for i in 1..r.len() {
                out.push((r[i] - z0 * lam[i]) / l0);
            }
            out
        }
        Cone::Psd(n) => {
            let mut out = r.to_vec();
            for j in 0..n {
                for i in j..n {
                    let li = lam[packed_index(n, i, i)];
                    let lj = lam[packed_index(n, j, j)];
                    out[packed_index(n, i, j)] *= 2.0 / (li + lj);
                }
            }
            out
        }
    }
}

/// Largest `α` (possibly infinite) with `x + α dx` in the closed cone.
pub(super) fn max_step(cone: Cone, x: &[f64], dx: &[f64]) -> f64 {
    match cone {
        Cone::NonNegative(_) => x
            .iter()
            .zip(dx)
            .filter(|(_, d)| **d < 0.0)
            .map(|(v, d)| -v / d)
            .fold(f64::INFINITY, f64::min),
        Cone::SecondOrder(_) => {
            let a = soc_quadratic(dx, dx);
            let b = soc_quadratic(x, dx);
            let c = soc_jdet(x).max(0.0);
            smallest_positive_root(a, b, c)
        }
        Cone::Psd(n) => {
            let Some(ch) = Cholesky::new(smat(x, n)) else {
                return 0.0;
            };
            let l = ch.l();
            let d = smat(dx, n);
            // L⁻¹ D L⁻ᵀ
            let Some(t) = l.solve_lower_triangular(&d) else {
                return 0.0;
            };
            let Some(m) = l.solve_lower_triangular(&t.transpose()) else {
                return 0.0;
            };
            let m = (&m + m.transpose()) * 0.5;
            let lmin = m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
            if lmin >= 0.0 {
                f64::INFINITY
            } else {
                -1.0 / lmin
            }
        }
    }
}

fn soc_quadratic(u: &[f64], v: &[f64]) -> f64 {
    u[0] * v[0] - u[1..].iter().zip(&v[1..]).map(|(a, b)| a * b).sum::<f64>()
}

/// Smallest positive root of `a α² + 2 b α + c` with `c ≥ 0`.
fn smallest_positive_root(a: f64, b: f64, c: f64) -> f64 {
    if c <= 0.0 {
        return if b < 0.0 || (b == 0.0 && a < 0.0) { 0.0 } else { f64::INFINITY };
    }
    let disc = b * b - a * c;
    if a.abs() <= 1e-300 {
        return if b < 0.0 { -c / (2.0 * b) } else { f64::INFINITY };
    }
    if disc < 0.0 {
        return f64::INFINITY;
    }
    let q = -(b + b.signum() * disc.sqrt());
    let roots = [q / a, if q != 0.0 { c / q } else { f64::INFINITY }];
    roots
        .iter()
        .copied()
        .filter(|r| *r > 0.0)
        .fold(f64::INFINITY, f64::min)
}
