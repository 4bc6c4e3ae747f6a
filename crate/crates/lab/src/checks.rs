//! Cross-method consistency checks run by `noma experiment checks`.
//!
//! The per-instance records are public so the acceptance suite can derive
//! further properties from the same runs.

use std::fmt;
use std::time::{Duration, Instant};

use noma_core::channel::{generate_channels, ChannelModelParams};
use noma_core::maxmin::{solve_maxmin, BisectionOptions, MaxMinResult};
use noma_core::model::{compute_rates, rate_to_min_sinr};
use noma_core::sca::{solve_powermin_sca, ScaOptions, ScaTrace};
use noma_core::sdr::{solve_powermin_sdr, SdrSolution};
use noma_core::SystemConfig;

use crate::error::Result;

pub const NOISE_VARIANCE: f64 = 0.01;
pub const AGREEMENT_TOL: f64 = 5e-3;
pub const AGREEMENT_FRACTION: f64 = 0.95;
pub const AGREEMENT_TIME_LIMIT: Duration = Duration::from_secs(120);
pub const SINGLE_USER_TOL: f64 = 1e-6;
pub const ROUND_TRIP_POWER_TOL_W: f64 = 1e-3;
pub const ROUND_TRIP_TOTAL_TOL: f64 = 1e-3;
/// Slack on the max-min power budget, in W.
pub const BUDGET_SLACK_W: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub tolerance: String,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {}: {} [{}]", self.name, self.detail, self.tolerance)
    }
}

/// Instance sizes and seeds of the table checks.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckSettings {
    pub seed: u64,
    pub agreement_instances: usize,
    pub single_user_instances: usize,
    pub round_trip_instances: usize,
    /// Channel model of the agreement and single-user checks.
    pub channel: ChannelModelParams,
    /// Channel model of the round trip. Unit-gain channels keep the powers at
    /// the watt scale where an absolute tolerance is meaningful.
    pub round_trip_channel: ChannelModelParams,
    pub round_trip_budget: f64,
}

impl Default for CheckSettings {
    fn default() -> Self {
        Self {
            seed: 1,
            agreement_instances: 100,
            single_user_instances: 50,
            round_trip_instances: 50,
            channel: ChannelModelParams::default(),
            round_trip_channel: ChannelModelParams {
                pathloss_exponent: 0.0,
                ..ChannelModelParams::default()
            },
            round_trip_budget: 5.0,
        }
    }
}

/// SCA and SDR on the same `N = M = 3`, `R = 2` instance.
#[derive(Debug, Clone)]
pub struct AgreementRecord {
    pub trial: usize,
    pub sca_power: f64,
    pub sca_trace: ScaTrace,
    pub sdr: SdrSolution,
}

impl AgreementRecord {
    /// `|P_sca − P_sdr| / P_sdr`.
    pub fn relative_gap(&self) -> f64 {
        (self.sca_power - self.sdr.recovered_objective).abs() / self.sdr.recovered_objective
    }
}

pub fn agreement_config(seed: u64) -> SystemConfig {
    SystemConfig::uniform(3, 3, NOISE_VARIANCE, 2.0).with_seed(seed)
}

pub fn run_agreement(settings: &CheckSettings) -> Result<(Vec<AgreementRecord>, Duration)> {
    let cfg = agreement_config(settings.seed);
    let start = Instant::now();
    let mut out = Vec::with_capacity(settings.agreement_instances);
    for trial in 0..settings.agreement_instances {
        let ch = generate_channels(&cfg, &settings.channel, trial as u64)?;
        let (w, sca_trace) = solve_powermin_sca(&ch, &cfg, &ScaOptions::default())?;
        let sdr = solve_powermin_sdr(&ch, &cfg)?;
        out.push(AgreementRecord {
            trial,
            sca_power: w.total_power(),
            sca_trace,
            sdr,
        });
    }
    Ok((out, start.elapsed()))
}

pub fn agreement_outcome(records: &[AgreementRecord], elapsed: Duration) -> CheckOutcome {
    let agree = records.iter().filter(|r| r.relative_gap() <= AGREEMENT_TOL).count();
    let needed = (AGREEMENT_FRACTION * records.len() as f64).ceil() as usize;
    let worst = records.iter().map(AgreementRecord::relative_gap).fold(0.0, f64::max);
    CheckOutcome {
        name: "SCA/SDR agreement".into(),
        tolerance: format!(
            "rel gap <= {AGREEMENT_TOL} on >= {needed}/{}, time < {}s",
            records.len(),
            AGREEMENT_TIME_LIMIT.as_secs()
        ),
        passed: agree >= needed && elapsed < AGREEMENT_TIME_LIMIT,
        detail: format!(
            "{agree}/{} agree, worst gap {worst:.3e}, {:.1}s",
            records.len(),
            elapsed.as_secs_f64()
        ),
    }
}

/// Worst relative error of SCA and SDR against `γσ²/‖h‖²` for one user.
pub fn run_single_user(settings: &CheckSettings) -> Result<Vec<f64>> {
    let cfg = SystemConfig::uniform(3, 1, NOISE_VARIANCE, 2.0).with_seed(settings.seed);
    let gamma = rate_to_min_sinr(2.0)?;
    let mut errors = Vec::with_capacity(settings.single_user_instances);
    for trial in 0..settings.single_user_instances {
        let ch = generate_channels(&cfg, &settings.channel, trial as u64)?;
        let exact = gamma * NOISE_VARIANCE / ch.gain(0);
        let (w, _) = solve_powermin_sca(&ch, &cfg, &ScaOptions::default())?;
        let sdr = solve_powermin_sdr(&ch, &cfg)?;
        let err = [w.total_power(), sdr.recovered_objective]
            .iter()
            .map(|p| (p - exact).abs() / exact)
            .fold(0.0, f64::max);
        errors.push(err);
    }
    Ok(errors)
}

pub fn single_user_outcome(errors: &[f64]) -> CheckOutcome {
    let worst = errors.iter().copied().fold(0.0, f64::max);
    let ok = errors.iter().filter(|e| **e <= SINGLE_USER_TOL).count();
    CheckOutcome {
        name: "single-user closed form".into(),
        tolerance: format!("rel error <= {SINGLE_USER_TOL} on every instance"),
        passed: ok == errors.len(),
        detail: format!("{ok}/{} within tolerance, worst {worst:.3e}", errors.len()),
    }
}

/// Max-min design and the power-min designs at its balanced rate.
#[derive(Debug, Clone)]
pub struct RoundTripRecord {
    pub trial: usize,
    pub maxmin: MaxMinResult,
    /// Exact rates of the max-min beamformers.
    pub maxmin_rates: Vec<f64>,
    pub sdr_powers: Vec<f64>,
    pub sca_powers: Vec<f64>,
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

impl RoundTripRecord {
    /// Largest per-user power difference and relative total difference.
    pub fn sdr_errors(&self) -> (f64, f64) {
        self.errors(&self.sdr_powers)
    }

    pub fn sca_errors(&self) -> (f64, f64) {
        self.errors(&self.sca_powers)
    }

    fn errors(&self, powers: &[f64]) -> (f64, f64) {
        let pm = self.maxmin.beamformers.powers();
        let total: f64 = powers.iter().sum();
        (max_abs_diff(&pm, powers), (total - self.maxmin.total_power).abs() / self.maxmin.total_power)
    }
}

pub fn round_trip_config(seed: u64, budget: f64) -> SystemConfig {
    SystemConfig::uniform(3, 3, NOISE_VARIANCE, 1.0)
        .with_seed(seed)
        .with_power_budget(budget)
}

pub fn run_round_trip(settings: &CheckSettings) -> Result<Vec<RoundTripRecord>> {
    let cfg = round_trip_config(settings.seed, settings.round_trip_budget);
    let mut out = Vec::with_capacity(settings.round_trip_instances);
    for trial in 0..settings.round_trip_instances {
        let ch = generate_channels(&cfg, &settings.round_trip_channel, trial as u64)?;
        let maxmin = solve_maxmin(&ch, &cfg, &BisectionOptions::default())?;
        let maxmin_rates = compute_rates(&ch, &maxmin.beamformers, &cfg)?.rates;
        let rcfg = SystemConfig::uniform(3, 3, NOISE_VARIANCE, maxmin.rate).with_seed(settings.seed);
        let sdr = solve_powermin_sdr(&ch, &rcfg)?;
        let (sca, _) = solve_powermin_sca(&ch, &rcfg, &ScaOptions::default())?;
        out.push(RoundTripRecord {
            trial,
            maxmin,
            maxmin_rates,
            sdr_powers: sdr.beamformers.powers(),
            sca_powers: sca.powers(),
        });
    }
    Ok(out)
}

pub fn round_trip_outcome(records: &[RoundTripRecord]) -> CheckOutcome {
    let within = |(d, r): (f64, f64)| d <= ROUND_TRIP_POWER_TOL_W && r <= ROUND_TRIP_TOTAL_TOL;
    let ok = records.iter().filter(|r| within(r.sdr_errors())).count();
    let ok_sca = records.iter().filter(|r| within(r.sca_errors())).count();
    let worst = records.iter().map(|r| r.sdr_errors().0).fold(0.0, f64::max);
    let failed: Vec<String> = records
        .iter()
        .filter(|r| !within(r.sdr_errors()))
        .map(|r| r.trial.to_string())
        .collect();
    let mut detail = format!(
        "{ok}/{} via SDR (worst per-user {worst:.2e} W), {ok_sca}/{} via SCA",
        records.len(),
        records.len()
    );
    if !failed.is_empty() {
        detail.push_str(&format!(", failing trials {}", failed.join(",")));
    }
    CheckOutcome {
        name: "max-min/power-min round trip".into(),
        tolerance: format!(
            "per-user <= {ROUND_TRIP_POWER_TOL_W} W, total <= {ROUND_TRIP_TOTAL_TOL} rel, every instance"
        ),
        passed: ok == records.len(),
        detail,
    }
}

/// Halving, budget and certification contract of the bisection.
pub fn bisection_outcome(records: &[RoundTripRecord], budget: f64) -> CheckOutcome {
    let tol = BisectionOptions::default().tolerance;
    let mut bad = Vec::new();
    for r in records {
        let log = &r.maxmin.log;
        let halves = log
            .iter()
            .enumerate()
            .all(|(i, s)| s.length == log[0].length / (1u64 << i) as f64);
        let budget_ok = r.maxmin.total_power <= budget + BUDGET_SLACK_W;
        let min_rate = r.maxmin_rates.iter().copied().fold(f64::INFINITY, f64::min);
        let certified = min_rate >= r.maxmin.rate - tol && log.last().is_some_and(|s| s.length <= tol);
        if !(halves && budget_ok && certified) {
            bad.push(r.trial.to_string());
        }
    }
    CheckOutcome {
        name: "bisection contract".into(),
        tolerance: format!("exact halving, power <= P + {BUDGET_SLACK_W}, min rate >= R* - {tol}"),
        passed: bad.is_empty(),
        detail: if bad.is_empty() {
            format!("{}/{} instances", records.len(), records.len())
        } else {
            format!("violated on trials {}", bad.join(","))
        },
    }
}

/// Runs every table check.
pub fn emit_table_checks(settings: &CheckSettings) -> Result<Vec<CheckOutcome>> {
    let (agreement, elapsed) = run_agreement(settings)?;
    let single = run_single_user(settings)?;
    let trips = run_round_trip(settings)?;
    Ok(vec![
        agreement_outcome(&agreement, elapsed),
        single_user_outcome(&single),
        round_trip_outcome(&trips),
        bisection_outcome(&trips, settings.round_trip_budget),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_checks_run() {
        let s = CheckSettings {
            agreement_instances: 3,
            single_user_instances: 3,
            round_trip_instances: 2,
            ..CheckSettings::default()
        };
        let out = emit_table_checks(&s).unwrap();
        assert_eq!(out.len(), 4);
        assert!(out[1].passed, "{}", out[1]);
        assert!(out[3].passed, "{}", out[3]);
        assert!(out[0].to_string().starts_with("PASS") || out[0].to_string().starts_with("FAIL"));
    }
}
