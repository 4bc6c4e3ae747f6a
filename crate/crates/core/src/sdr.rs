//! Power minimization by semidefinite relaxation.
//!
//! The beamformers are lifted to `W_k = w_k w_kᴴ` and the rank constraint is
//! dropped. Each Hermitian `W_k` is stored as `s_k² · deembed(X_k)` with `X_k`
//! a real PSD matrix of order `2M`; see [`crate::linalg::deembed`].

use alloc::vec::Vec;


use crate::channel::{stream_rng, Stream};
use crate::conic::rank_one::{DEFAULT_CANDIDATES, RANK_ONE_TOL};
use crate::conic::svec::{smat, svec};
use crate::conic::{extract_rank_one, randomize_rank_one, solve, Cone, ConicBuilder, ConicProgram, SolveOptions, SolveStatus, VarBlock};
use crate::error::{Error, Result};
use crate::linalg::{deembed, embed_hermitian, outer, CMatrix, HermitianMatrix};
use crate::model::{qos_shortfall, BeamformerSet, ChannelSet, SystemConfig};
use crate::sca::{nominal_scales, polish, solve_powermin_sca, ScaInit, ScaOptions};

/// Lifted Hermitian variables `W_k = s_k² deembed(X_k)`.
#[derive(Debug, Clone)]
pub(crate) struct LiftedVars {
    pub blocks: Vec<VarBlock>,
    pub scales: Vec<f64>,
    pub antennas: usize,
}

impl LiftedVars {
    /// Adds one PSD block per user and `Σ Tr W_k` to the objective.
    pub fn new(builder: &mut ConicBuilder, scales: &[f64], antennas: usize) -> Self {
        let mut blocks = Vec::with_capacity(scales.len());
        for (k, &s) in scales.iter().enumerate() {
            let blk = builder.add_named_cone(Cone::Psd(2 * antennas), alloc::format!("W{k}"));
            let coefs = Self::coefficients(&CMatrix::identity(antennas, antennas), s);
            for (i, v) in coefs.into_iter().enumerate() {
                builder.add_objective(blk.at(i), v);
            }
            blocks.push(blk);
        }
        Self {
            blocks,
            scales: scales.to_vec(),
            antennas,
        }
    }

    /// `svec` coefficients of `X ↦ Tr(H · s² deembed(X)) = ½ s² ⟨embed(H), X⟩`.
    fn coefficients(h: &CMatrix, s: f64) -> Vec<f64> {
        let e = embed_hermitian(h).expect("caller passes Hermitian matrices");
        let f = 0.5 * s * s;
        svec(&e).into_iter().map(|v| v * f).collect()
    }

    /// Terms of `factor · Tr(H W_k)`.
    pub fn trace_terms(&self, k: usize, h: &CMatrix, factor: f64) -> Vec<(usize, f64)> {
        let blk = self.blocks[k];
        Self::coefficients(h, self.scales[k])
            .into_iter()
            .enumerate()
            .filter(|(_, v)| *v != 0.0)
            .map(|(i, v)| (blk.at(i), v * factor))
            .collect()
    }

    pub fn decode(&self, x: &[f64]) -> Vec<HermitianMatrix> {
        self.blocks
            .iter()
            .zip(&self.scales)
            .map(|(blk, &s)| {
                let xm = smat(blk.slice(x), 2 * self.antennas);
                HermitianMatrix::symmetrized(deembed(&xm) * num_complex::Complex64::new(s * s, 0.0))
            })
            .collect()
    }
}

/// The relaxed program together with its variable layout.
#[derive(Debug, Clone)]
pub struct SdrProgram {
    pub program: ConicProgram,
    /// Number of `(k, l ≥ k)` SINR constraints.
    pub sinr_constraints: usize,
    pub(crate) vars: LiftedVars,
}

impl SdrProgram {
    pub fn decode(&self, x: &[f64]) -> Vec<HermitianMatrix> {
        self.vars.decode(x)
    }
}

/// Variable scales from least-power matched-filter beamformers.
pub(crate) fn lifted_scales(channels: &ChannelSet, min_sinrs: &[f64], noise: f64) -> Vec<f64> {
    let nominal = nominal_scales(channels, min_sinrs, noise);
    let mf = BeamformerSet::new(channels.channels().to_vec());
    match polish(channels, &mf, noise, min_sinrs) {
        Some(w) => crate::beam::scales_from(&w, &nominal),
        None => nominal,
    }
}

/// `min Σ Tr W_k` s.t. `Tr(H_l W_k) ≥ γ_k (Σ_{m>k} Tr(H_l W_m) + σ²)` for
/// every `l ≥ k`, `W_k ⪰ 0`, with `H_l = h_l h_lᴴ`.
pub fn build_sdr_program(channels: &ChannelSet, min_sinrs: &[f64], noise_variance: f64) -> Result<SdrProgram> {
    let n = channels.num_users();
    if min_sinrs.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: min_sinrs.len(),
        });
    }
    if min_sinrs.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
        return Err(crate::error::invalid("SINR targets must be finite and nonnegative"));
    }
    let scales = lifted_scales(channels, min_sinrs, noise_variance);
    let mut b = ConicBuilder::new();
    let vars = LiftedVars::new(&mut b, &scales, channels.num_antennas());
    let slack = b.add_named_cone(Cone::NonNegative(n * (n + 1) / 2), "slack");
    let mut row = 0;
    for k in 0..n {
        for l in k..n {
            let h = outer(channels.channel(l));
            let mut terms = vars.trace_terms(k, &h, 1.0);
            for m in k + 1..n {
                terms.extend(vars.trace_terms(m, &h, -min_sinrs[k]));
            }
            terms.push((slack.at(row), -1.0));
            b.add_equality(&terms, min_sinrs[k] * noise_variance);
            row += 1;
        }
    }
    Ok(SdrProgram {
        program: b.build(),
        sinr_constraints: row,
        vars,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum RecoveryMethod {
    /// Principal eigenvectors of numerically rank-one matrices.
    Eigenvector,
    /// Gaussian randomization with power re-scaling.
    Randomization,
    /// Randomization failed; the SCA solution of the same instance.
    ScaFallback,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SdrSolution {
    pub matrices: Vec<HermitianMatrix>,
    pub rank_one_gaps: Vec<f64>,
    pub beamformers: BeamformerSet,
    /// `Σ Tr W_k` of the relaxation, a lower bound on the optimal power.
    pub relaxation_objective: f64,
    pub recovered_objective: f64,
    pub recovery: RecoveryMethod,
    pub solver_iterations: usize,
}

pub fn solve_powermin_sdr(channels: &ChannelSet, config: &SystemConfig) -> Result<SdrSolution> {
    solve_powermin_sdr_with(channels, config, &SolveOptions::default(), DEFAULT_CANDIDATES)
}

pub fn solve_powermin_sdr_with(
    channels: &ChannelSet,
    config: &SystemConfig,
    solver: &SolveOptions,
    candidates: usize,
) -> Result<SdrSolution> {
    config.validate()?;
    let gam = config.min_sinrs()?;
    let noise = config.noise_variance;
    let prog = build_sdr_program(channels, &gam, noise)?;
    let rep = solve(&prog.program, solver)?;
    if !rep.is_accurate_to(1e-6) {
        return Err(Error::Solver(match rep.status {
            SolveStatus::Optimal => SolveStatus::NumericalFailure,
            s => s,
        }));
    }
    let matrices = prog.decode(&rep.x);
    let relaxation_objective: f64 = matrices.iter().map(HermitianMatrix::trace).sum();
    let extracted = matrices
        .iter()
        .map(|w| extract_rank_one(w.matrix()))
        .collect::<Result<Vec<_>>>()?;
    let rank_one_gaps: Vec<f64> = extracted.iter().map(|r| r.gap).collect();

    let (beamformers, recovery) = if rank_one_gaps.iter().all(|g| *g <= RANK_ONE_TOL) {
        let w = BeamformerSet::new(extracted.into_iter().map(|r| r.vector).collect());
        let w = if qos_shortfall(channels, &w, noise, &gam)? <= 1e-6 {
            w
        } else {
            polish(channels, &w, noise, &gam).unwrap_or(w)
        };
        (w, RecoveryMethod::Eigenvector)
    } else {
        let mut rng = stream_rng(config.rng_seed, 0, 0, Stream::Randomization);
        let mats: Vec<CMatrix> = matrices.iter().map(|m| m.matrix().clone()).collect();
        match randomize_rank_one(&mats, candidates, &mut rng, |dirs| {
            polish(channels, &BeamformerSet::new(dirs.to_vec()), noise, &gam)
        }) {
            Ok(w) => (w, RecoveryMethod::Randomization),
            Err(Error::RandomizationFailed(_)) => {
                let opts = ScaOptions {
                    init: ScaInit::Random { seed: config.rng_seed },
                    ..ScaOptions::default()
                };
                let (w, _) = solve_powermin_sca(channels, config, &opts)?;
                (w, RecoveryMethod::ScaFallback)
            }
            Err(e) => return Err(e),
        }
    };
    let recovered_objective = beamformers.total_power();
    Ok(SdrSolution {
        matrices,
        rank_one_gaps,
        beamformers,
        relaxation_objective,
        recovered_objective,
        recovery,
        solver_iterations: rep.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::trace_product;
    use alloc::vec;
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn scalar_instance() {
        let ch = ChannelSet::from_channels(vec![vec![c(1.0, 0.0)]]).unwrap();
        let cfg = SystemConfig::uniform(1, 1, 1.0, 1.0);
        let sol = solve_powermin_sdr(&ch, &cfg).unwrap();
        assert!((sol.relaxation_objective - 1.0).abs() < 1e-7);
        assert!((sol.recovered_objective - 1.0).abs() < 1e-6);
        assert_eq!(sol.recovery, RecoveryMethod::Eigenvector);
    }

    #[test]
    fn two_users_have_three_constraints() {
        let ch = ChannelSet::from_channels(vec![vec![c(0.5, 0.0)], vec![c(1.0, 0.0)]]).unwrap();
        assert_eq!(build_sdr_program(&ch, &[1.0, 1.0], 1.0).unwrap().sinr_constraints, 3);
    }

    #[test]
    fn lifted_trace_matches_complex_trace() {
        let h = outer(&[c(0.3, -0.2), c(1.0, 0.5)]);
        let w = outer(&[c(-0.7, 0.1), c(0.2, 0.9)]) + outer(&[c(0.1, 0.1), c(0.0, -0.4)]);
        let mut b = ConicBuilder::new();
        let vars = LiftedVars::new(&mut b, &[1.7], 2);
        // X = embed(W)/s² gives W back after decoding
        let x = svec(&embed_hermitian(&(w.clone() / c(1.7 * 1.7, 0.0))).unwrap());
        let lifted: f64 = vars.trace_terms(0, &h, 1.0).iter().map(|&(j, v)| v * x[j]).sum();
        assert!((lifted - trace_product(&h, &w)).abs() < 1e-12);
        assert!((vars.decode(&x)[0].matrix() - &w).norm() < 1e-12);
    }
}
