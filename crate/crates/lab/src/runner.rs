//! Monte-Carlo orchestration.
//!
//! Every `(sweep point, trial)` pair is one task. A task draws the channels
//! of its trial once and runs every scheme on them, so schemes are compared
//! on identical draws. Tasks run on the rayon pool and are gathered in
//! `(point, trial)` order before any output is produced.

use std::time::Instant;

use noma_core::baselines::{
    evaluate_oma_outage, solve_maxmin_oma, solve_maxmin_zf, solve_nonrobust_oma, solve_powermin_oma,
    solve_powermin_zf, solve_robust_oma, OmaDesign,
};
use noma_core::channel::{generate_channels, ChannelModelParams, UncertaintyModel};
use noma_core::conic::SolveStatus;
use noma_core::maxmin::{solve_maxmin, BisectionOptions};
use noma_core::model::{compute_conventional_rates, compute_rates};
use noma_core::robust::{
    eta_histogram, evaluate_outage, solve_nonrobust_powermin, solve_robust_powermin, EtaHistogram, OutageReport,
};
use noma_core::sca::{solve_powermin_sca, ScaOptions};
use noma_core::sdr::solve_powermin_sdr;
use noma_core::{BeamformerSet, ChannelSet, Error as CoreError, SystemConfig};
use rayon::prelude::*;

use crate::config::{ExperimentSpec, Objective, PointConfig, RobustSection, Scheme};
use crate::error::Result;
use crate::results::{aggregate, ResultRow, TrialStatus};

/// Bisection tolerance of the OMA max-min baseline, in bits/s/Hz.
pub const OMA_RATE_TOLERANCE: f64 = 1e-6;

/// What one scheme produced on one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub row: ResultRow,
    /// Per-user satisfaction ratios of every Monte-Carlo sample.
    pub eta: Option<Vec<Vec<f64>>>,
}

/// Histogram of `η` for one user of one scheme at one sweep point, pooled
/// over all trials.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaHistogramEntry {
    pub scheme: Scheme,
    pub sweep_value: f64,
    pub user: usize,
    pub histogram: EtaHistogram,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    /// Trial rows then mean and stderr rows for each `(point, scheme)`, in
    /// sweep order then scheme order.
    pub rows: Vec<ResultRow>,
    pub histograms: Vec<EtaHistogramEntry>,
}

impl ExperimentOutput {
    /// Aggregate row of `kind` for `scheme` at `value`.
    pub fn aggregate_row(&self, scheme: Scheme, value: f64, kind: crate::results::RowKind) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.scheme == scheme && r.sweep_value == value && r.row_kind == kind)
    }
}

fn status_of(e: &CoreError) -> TrialStatus {
    match e {
        CoreError::Solver(SolveStatus::Infeasible)
        | CoreError::InfeasibleSubproblem { .. }
        | CoreError::RankDeficient { .. } => TrialStatus::Infeasible,
        CoreError::Solver(_) | CoreError::IterationLimit(_) | CoreError::RandomizationFailed(_) => {
            TrialStatus::SolverFailure
        }
        _ => TrialStatus::Error,
    }
}

struct Measured {
    status: TrialStatus,
    total_power: f64,
    powers: Vec<f64>,
    rates: Vec<f64>,
    min_rate: f64,
    iterations: usize,
    outage: Option<OutageReport>,
}

impl Measured {
    fn from_beams(beams: &BeamformerSet, rates: Vec<f64>, iterations: usize) -> Self {
        let min_rate = rates.iter().copied().fold(f64::INFINITY, f64::min);
        Self {
            status: TrialStatus::Ok,
            total_power: beams.total_power(),
            powers: beams.powers(),
            rates,
            min_rate,
            iterations,
            outage: None,
        }
    }

    fn from_oma(d: &OmaDesign, channels: &ChannelSet, noise: f64, iterations: usize) -> Self {
        let rates = d.rates(channels, noise);
        Self {
            status: TrialStatus::Ok,
            total_power: d.average_power,
            powers: d.shares.iter().zip(&d.slice_powers).map(|(s, p)| s * p).collect(),
            min_rate: rates.iter().copied().fold(f64::INFINITY, f64::min),
            rates,
            iterations,
            outage: None,
        }
    }
}

fn measure(
    scheme: Scheme,
    objective: Objective,
    point: &PointConfig,
    channels: &ChannelSet,
    robust: &RobustSection,
    trial: u64,
) -> noma_core::Result<Measured> {
    let cfg = &point.system;
    let noise = cfg.noise_variance;
    Ok(match (scheme, objective) {
        (Scheme::NomaSca, _) => {
            let (w, trace) = solve_powermin_sca(channels, cfg, &ScaOptions::default())?;
            let rates = compute_rates(channels, &w, cfg)?.rates;
            Measured::from_beams(&w, rates, trace.iterations)
        }
        (Scheme::NomaSdr, _) => {
            let sol = solve_powermin_sdr(channels, cfg)?;
            let rates = compute_rates(channels, &sol.beamformers, cfg)?.rates;
            Measured::from_beams(&sol.beamformers, rates, sol.solver_iterations)
        }
        (Scheme::NomaMaxmin, _) => {
            let res = solve_maxmin(channels, cfg, &BisectionOptions::default())?;
            let mut m = Measured::from_beams(&res.beamformers, res.achieved_rates.clone(), res.log.len());
            m.min_rate = res.rate;
            if res.degenerate {
                m.status = TrialStatus::Degenerate;
            }
            m
        }
        (Scheme::Oma, Objective::PowerMin) => Measured::from_oma(&solve_powermin_oma(channels, cfg)?, channels, noise, 0),
        (Scheme::Oma, Objective::MaxMin) => {
            let res = solve_maxmin_oma(channels, cfg, OMA_RATE_TOLERANCE)?;
            let mut m = Measured::from_oma(&res.design, channels, noise, res.iterations);
            m.min_rate = res.rate;
            m
        }
        (Scheme::Zf, Objective::PowerMin) => {
            let w = solve_powermin_zf(channels, cfg)?;
            let rates = compute_conventional_rates(channels, &w, cfg)?.rates;
            Measured::from_beams(&w, rates, 0)
        }
        (Scheme::Zf, Objective::MaxMin) => {
            let (rate, w) = solve_maxmin_zf(channels, cfg)?;
            let rates = compute_conventional_rates(channels, &w, cfg)?.rates;
            let mut m = Measured::from_beams(&w, rates, 0);
            m.min_rate = rate;
            m
        }
        (Scheme::NomaRobust | Scheme::NomaNonrobust | Scheme::OmaRobust | Scheme::OmaNonrobust, _) => {
            let model = UncertaintyModel::from_channels(channels, point.error_variance, robust.outage)?;
            measure_outage(scheme, cfg, &model, Some(channels), robust, trial)?
        }
    })
}

/// Robust or non-robust design on `model`, then its Monte-Carlo outage.
/// Nominal rates need the channel vectors and are left empty without them.
fn measure_outage(
    scheme: Scheme,
    cfg: &SystemConfig,
    model: &UncertaintyModel,
    channels: Option<&ChannelSet>,
    robust: &RobustSection,
    trial: u64,
) -> noma_core::Result<Measured> {
    let noise = cfg.noise_variance;
    let (targets, law) = (&cfg.target_rates, robust.law.into());
    let empty = |total_power: f64, powers: Vec<f64>, iterations: usize| Measured {
        status: TrialStatus::Ok,
        total_power,
        powers,
        rates: Vec::new(),
        min_rate: f64::NAN,
        iterations,
        outage: None,
    };
    let m = match scheme {
        Scheme::NomaRobust | Scheme::NomaNonrobust => {
            let res = if scheme == Scheme::NomaRobust {
                solve_robust_powermin(model, cfg)?
            } else {
                solve_nonrobust_powermin(model, cfg)?
            };
            let w = &res.beamformers;
            let mut m = match channels {
                Some(ch) => Measured::from_beams(w, compute_rates(ch, w, cfg)?.rates, res.solver_iterations),
                None => empty(w.total_power(), w.powers(), res.solver_iterations),
            };
            m.outage = Some(evaluate_outage(w, model, targets, noise, robust.samples, cfg.rng_seed, trial, law)?);
            m
        }
        _ => {
            let d = if scheme == Scheme::OmaRobust {
                solve_robust_oma(model, cfg)?
            } else {
                solve_nonrobust_oma(model, cfg)?
            };
            let mut m = match channels {
                Some(ch) => Measured::from_oma(&d, ch, noise, 0),
                None => empty(d.average_power, d.shares.iter().zip(&d.slice_powers).map(|(s, p)| s * p).collect(), 0),
            };
            m.outage = Some(evaluate_oma_outage(&d, model, targets, noise, robust.samples, cfg.rng_seed, trial, law)?);
            m
        }
    };
    Ok(m)
}

fn outcome(
    spec: &ExperimentSpec,
    scheme: Scheme,
    point: &PointConfig,
    trial: usize,
    result: noma_core::Result<Measured>,
    elapsed_ms: f64,
) -> TrialOutcome {
    let mk = |status| ResultRow::trial(scheme, spec.sweep.variable, point.value, trial, status);
    let (mut row, eta) = match result {
        Err(e) => (mk(status_of(&e)), None),
        Ok(m) => {
            let mut row = mk(m.status);
            row.total_power_w = Some(m.total_power);
            row.min_rate = match m.status {
                TrialStatus::Degenerate => Some(0.0),
                _ if m.min_rate.is_nan() => None,
                _ => Some(m.min_rate),
            };
            row.powers_w = m.powers;
            row.rates = m.rates;
            row.iterations = Some(m.iterations as f64);
            let eta = m.outage.map(|o| {
                row.satisfaction = o.satisfaction;
                row.chain_satisfaction = o.chain_satisfaction;
                o.eta
            });
            (row, eta)
        }
    };
    if spec.output.timing {
        row.wall_time_ms = Some(elapsed_ms);
    }
    TrialOutcome { row, eta }
}

/// Runs an outage scheme on a given uncertainty model instead of a channel
/// draw; the system size is taken from the model.
pub fn run_outage_scheme_on_model(
    spec: &ExperimentSpec,
    scheme: Scheme,
    point: &PointConfig,
    model: &UncertaintyModel,
    trial: usize,
) -> TrialOutcome {
    let start = Instant::now();
    let mut cfg = point.system.clone();
    cfg.num_users = model.num_users();
    cfg.num_antennas = model.num_antennas();
    cfg.target_rates = vec![cfg.target_rates[0]; cfg.num_users];
    cfg.outage_probabilities = Some(model.outage.clone());
    let result = measure_outage(scheme, &cfg, model, None, &spec.robust, trial as u64);
    outcome(spec, scheme, point, trial, result, start.elapsed().as_secs_f64() * 1e3)
}

/// Runs one scheme on one channel draw.
pub fn run_scheme(
    spec: &ExperimentSpec,
    scheme: Scheme,
    point: &PointConfig,
    channels: &ChannelSet,
    trial: usize,
) -> TrialOutcome {
    let start = Instant::now();
    let result = measure(scheme, spec.objective, point, channels, &spec.robust, trial as u64);
    outcome(spec, scheme, point, trial, result, start.elapsed().as_secs_f64() * 1e3)
}

/// Channels of trial `trial` at one sweep point.
pub fn trial_channels(spec: &ExperimentSpec, point: &PointConfig, trial: usize) -> Result<ChannelSet> {
    let params = ChannelModelParams::from(&spec.channel);
    Ok(generate_channels(&point.system, &params, trial as u64)?)
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    spec.validate()?;
    let points: Vec<PointConfig> = spec.sweep.values.iter().map(|&v| spec.point(v)).collect::<Result<_>>()?;
    let tasks: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..spec.trials).map(move |t| (p, t)))
        .collect();
    let outcomes: Vec<Vec<TrialOutcome>> = tasks
        .par_iter()
        .map(|&(p, t)| -> Result<Vec<TrialOutcome>> {
            let point = &points[p];
            let channels = trial_channels(spec, point, t)?;
            Ok(spec
                .schemes
                .iter()
                .map(|&s| run_scheme(spec, s, point, &channels, t))
                .collect())
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(tasks.len() * spec.schemes.len() + 2 * points.len() * spec.schemes.len());
    let mut histograms = Vec::new();
    for (p, point) in points.iter().enumerate() {
        let block = &outcomes[p * spec.trials..(p + 1) * spec.trials];
        for (si, &scheme) in spec.schemes.iter().enumerate() {
            let trials: Vec<ResultRow> = block.iter().map(|o| o[si].row.clone()).collect();
            let agg = aggregate(&trials);
            rows.extend(trials);
            rows.extend(agg.into_iter().flatten());
            if scheme.is_outage_scheme() {
                let n = point.system.num_users;
                for user in 0..n {
                    let pooled: Vec<f64> = block
                        .iter()
                        .filter_map(|o| o[si].eta.as_ref())
                        .flat_map(|eta| eta[user].iter().copied())
                        .collect();
                    histograms.push(EtaHistogramEntry {
                        scheme,
                        sweep_value: point.value,
                        user,
                        histogram: eta_histogram(&pooled),
                    });
                }
            }
        }
    }
    Ok(ExperimentOutput { rows, histograms })
}
