//! Shared conic encoding of complex beamformer variables.
//!
//! User `k`'s beamformer is `w_k = s_k v_k` with `v_k ∈ ℂᴹ` stored as
//! `[Re v_k; Im v_k]` inside a rotated cone `[a₀, a₁, v_k]` with `a₀ − a₁ = 1`,
//! so that `a₀ + a₁ ≥ ‖v_k‖²` bounds the scaled power. The scales `s_k` keep
//! the variables near unit size when users' path losses differ by orders of
//! magnitude.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::conic::{Cone, ConicBuilder, ConicProgram, VarBlock};
use crate::linalg::CVec;
use crate::model::BeamformerSet;

/// Affine expression `Σ coef·x_col + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct Lin {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Lin {
    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn scaled(mut self, f: f64) -> Self {
        self.terms.iter_mut().for_each(|t| t.1 *= f);
        self.constant *= f;
        self
    }

    pub fn plus(mut self, other: &Lin, f: f64) -> Self {
        self.terms.extend(other.terms.iter().map(|&(j, v)| (j, v * f)));
        self.constant += other.constant * f;
        self
    }
}

pub(crate) struct BeamProgram {
    pub builder: ConicBuilder,
    users: Vec<VarBlock>,
    scales: Vec<f64>,
    antennas: usize,
}

impl BeamProgram {
    pub fn new(num_users: usize, antennas: usize, scales: &[f64]) -> Self {
        let mut builder = ConicBuilder::new();
        let mut users = Vec::with_capacity(num_users);
        for k in 0..num_users {
            let blk = builder.add_named_cone(Cone::SecondOrder(2 + 2 * antennas), alloc::format!("w{k}"));
            builder.add_equality(&[(blk.at(0), 1.0), (blk.at(1), -1.0)], 1.0);
            let s2 = scales[k] * scales[k];
            builder.add_objective(blk.at(0), s2);
            builder.add_objective(blk.at(1), s2);
            users.push(blk);
        }
        Self {
            builder,
            users,
            scales: scales.to_vec(),
            antennas,
        }
    }

    /// `(Re hᴴw_k, Im hᴴw_k)`.
    pub fn projection(&self, h: &[Complex64], k: usize) -> (Lin, Lin) {
        let blk = self.users[k];
        let m = self.antennas;
        let s = self.scales[k];
        let mut re = Lin::default();
        let mut im = Lin::default();
        for i in 0..m {
            let (hr, hi) = (h[i].re * s, h[i].im * s);
            let (vr, vi) = (blk.at(2 + i), blk.at(2 + m + i));
            re.terms.push((vr, hr));
            re.terms.push((vi, hi));
            im.terms.push((vr, -hi));
            im.terms.push((vi, hr));
        }
        (re, im)
    }

    /// Taylor under-estimator `2 Re(a* hᴴw_k) − |a|²` of `|hᴴw_k|²` at a
    /// reference with `hᴴw_ref = a`.
    pub fn linearized_gain(&self, h: &[Complex64], k: usize, a: Complex64) -> Lin {
        let (re, im) = self.projection(h, k);
        Lin::default()
            .plus(&re, 2.0 * a.re)
            .plus(&im, 2.0 * a.im)
            .plus(&Lin::constant(-a.norm_sqr()), 1.0)
    }

    fn bind(&mut self, blk: VarBlock, entries: &[Lin]) {
        for (i, e) in entries.iter().enumerate() {
            let mut terms = vec![(blk.at(i), 1.0)];
            terms.extend(e.terms.iter().map(|&(j, v)| (j, -v)));
            self.builder.add_equality(&terms, e.constant);
        }
    }

    /// `‖entries‖ ≤ bound`.
    pub fn add_soc(&mut self, bound: Lin, entries: &[Lin]) -> VarBlock {
        let blk = self.builder.add_cone(Cone::SecondOrder(1 + entries.len()));
        let mut all = Vec::with_capacity(1 + entries.len());
        all.push(bound);
        all.extend_from_slice(entries);
        self.bind(blk, &all);
        blk
    }

    /// `‖entries‖² ≤ bound`.
    pub fn add_rotated(&mut self, bound: &Lin, entries: &[Lin]) -> VarBlock {
        let b0 = bound.clone().scaled(0.5).plus(&Lin::constant(0.5), 1.0);
        let b1 = bound.clone().scaled(0.5).plus(&Lin::constant(-0.5), 1.0);
        let mut all = vec![b0, b1];
        all.extend_from_slice(entries);
        let blk = self.builder.add_cone(Cone::SecondOrder(all.len()));
        self.bind(blk, &all);
        blk
    }

    /// `expr = 0`.
    pub fn add_zero(&mut self, expr: &Lin) {
        self.builder.add_equality(&expr.terms, -expr.constant);
    }

    pub fn finish(self) -> (ConicProgram, BeamDecoder) {
        (
            self.builder.build(),
            BeamDecoder {
                users: self.users,
                scales: self.scales,
                antennas: self.antennas,
            },
        )
    }
}

/// Maps a solver point back to beamformers.
#[derive(Debug, Clone)]
pub(crate) struct BeamDecoder {
    users: Vec<VarBlock>,
    scales: Vec<f64>,
    antennas: usize,
}

impl BeamDecoder {
    pub fn decode(&self, x: &[f64]) -> BeamformerSet {
        let m = self.antennas;
        BeamformerSet::new(
            self.users
                .iter()
                .zip(&self.scales)
                .map(|(blk, &s)| {
                    (0..m)
                        .map(|i| Complex64::new(x[blk.at(2 + i)] * s, x[blk.at(2 + m + i)] * s))
                        .collect::<CVec>()
                })
                .collect(),
        )
    }
}

/// Variable scales from reference beamformers, falling back to
/// `fallback[k]` for users whose reference is (near) zero.
pub(crate) fn scales_from(beams: &BeamformerSet, fallback: &[f64]) -> Vec<f64> {
    let norms: Vec<f64> = beams.powers().iter().map(|p| libm::sqrt(*p)).collect();
    let top = norms.iter().copied().fold(0.0, f64::max);
    norms
        .iter()
        .zip(fallback)
        .map(|(&n, &f)| {
            if n > 1e-6 * top && n > 0.0 {
                n
            } else if top > 0.0 {
                f.min(top).max(1e-6 * top)
            } else {
                f
            }
        })
        .collect()
}
