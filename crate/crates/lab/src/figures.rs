//! Figure recipes and the CSV files behind each figure.
//!
//! | id | content | files |
//! |----|---------|-------|
//! | fig1 | total power vs target rate, N = 3, M ∈ {3, 6} | curves |
//! | fig2 | total power vs N at R = 2, M ∈ {3, 4, 6}, SCA and SDR | curves |
//! | fig3 | SCA power per iteration on 5 channels, N = 3, M = 6, R = 1 | traces |
//! | fig4 | SCA power per iteration from 5 random starts, N = 3, M = 5, R = 1 | traces |
//! | fig5 | max-min rate vs N at P = 10 W, M ∈ {3, 6} | curves |
//! | fig6 | max-min rate vs P for N = 5, M ∈ {5, 6} | curves |
//! | fig7 | robust power vs target rate, error variance ∈ {0, 0.002, 0.005, 0.01} | curves |
//! | fig8 | η histogram, robust NOMA, R = 3 | histogram |
//! | fig9 | η histogram, non-robust NOMA | histogram |
//! | fig10 | η histogram, robust OMA | histogram |
//! | fig11 | η histogram, non-robust OMA | histogram |
//!
//! Curve files have columns `<sweep variable>, mean_<metric>, stderr`, where
//! the metric is `power_W` or `min_rate`. Trace files have columns
//! `iteration, total_power_W, max_residual`. Histogram files have columns
//! `bin_left, bin_right, count, user_index`. Every experiment-based figure
//! also writes its full result table.
//!
//! Figures 1 to 4 use the path-loss channel model. The max-min and robust
//! figures use unit-gain Rayleigh channels: their power budgets and error
//! variances are absolute and only meaningful when the channel gains are of
//! order one.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use noma_core::channel::{generate_channels, ChannelModelParams};
use noma_core::sca::{solve_powermin_sca, ScaInit, ScaOptions};
use noma_core::SystemConfig;

use crate::config::{ChannelSection, ExperimentSpec, Objective, Scheme, SweepVariable};
use crate::error::{LabError, Result};
use crate::io::{histogram_csv, trace_csv};
use crate::results::{csv_table, to_csv_string, write_text, RowKind};
use crate::runner::{run_experiment, ExperimentOutput};

/// Number of channels or starting points drawn in the convergence figures.
pub const TRACE_COUNT: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct FigureId(u8);

impl FigureId {
    pub const COUNT: u8 = 11;

    pub fn all() -> impl Iterator<Item = FigureId> {
        (1..=Self::COUNT).map(FigureId)
    }

    pub fn number(self) -> u8 {
        self.0
    }
}

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "fig{}", self.0)
    }
}

impl FromStr for FigureId {
    type Err = LabError;

    /// Accepts `fig7`, `Fig7` or `7`.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        let digits = lower.strip_prefix("fig").unwrap_or(&lower);
        match digits.parse::<u8>() {
            Ok(n) if (1..=Self::COUNT).contains(&n) => Ok(FigureId(n)),
            _ => Err(LabError::UnknownFigure(s.to_string())),
        }
    }
}

fn unit_gain() -> ChannelSection {
    ChannelSection {
        pathloss_exponent: 0.0,
        ..ChannelSection::default()
    }
}

fn grid(start: f64, step: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| start + step * i as f64).collect()
}

fn spec(
    name: String,
    seed: u64,
    trials: Option<usize>,
    schemes: Vec<Scheme>,
    variable: SweepVariable,
    values: Vec<f64>,
) -> ExperimentSpec {
    let mut s = ExperimentSpec::new(schemes, variable, values);
    s.name = name;
    s.seed = seed;
    if let Some(t) = trials {
        s.trials = t;
    }
    s
}

/// The labelled experiments behind figure `id`; empty for the trace figures.
pub fn figure_specs(id: FigureId, seed: u64, trials: Option<usize>) -> Vec<(String, ExperimentSpec)> {
    use Scheme::*;
    use SweepVariable::*;
    let mut out = Vec::new();
    match id.0 {
        1 => {
            for m in [3, 6] {
                let mut s = spec(format!("{id}_M{m}"), seed, trials, vec![NomaSdr, Oma, Zf], TargetRate, grid(0.5, 0.5, 8));
                s.system.num_antennas = m;
                out.push((format!("M{m}"), s));
            }
        }
        2 => {
            for m in [3, 4, 6] {
                let mut s = spec(format!("{id}_M{m}"), seed, trials, vec![NomaSca, NomaSdr], NumUsers, grid(2.0, 1.0, 5));
                s.system.num_antennas = m;
                s.system.target_rate = 2.0;
                out.push((format!("M{m}"), s));
            }
        }
        5 => {
            for m in [3, 6] {
                let mut s = spec(format!("{id}_M{m}"), seed, trials, vec![NomaMaxmin, Oma, Zf], NumUsers, grid(2.0, 1.0, 5));
                s.objective = Objective::MaxMin;
                s.system.num_antennas = m;
                s.system.p_max = Some(10.0);
                s.channel = unit_gain();
                out.push((format!("M{m}"), s));
            }
        }
        6 => {
            for m in [5, 6] {
                let values = vec![2.0, 5.0, 10.0, 15.0, 20.0];
                let mut s = spec(format!("{id}_M{m}"), seed, trials, vec![NomaMaxmin, Oma, Zf], PMax, values);
                s.objective = Objective::MaxMin;
                s.system.num_antennas = m;
                s.system.num_users = 5;
                s.channel = unit_gain();
                out.push((format!("M{m}"), s));
            }
        }
        7 => {
            for var in [0.0, 0.002, 0.005, 0.01] {
                let mut s = spec(format!("{id}_var{var}"), seed, trials, vec![NomaRobust], TargetRate, grid(1.0, 0.5, 5));
                s.robust.error_variance = var;
                s.channel = unit_gain();
                out.push((format!("var{var}"), s));
            }
        }
        8..=11 => {
            let scheme = [NomaRobust, NomaNonrobust, OmaRobust, OmaNonrobust][usize::from(id.0 - 8)];
            let mut s = spec(format!("{id}"), seed, trials, vec![scheme], TargetRate, vec![3.0]);
            s.channel = unit_gain();
            out.push((scheme.name().to_string(), s));
        }
        _ => {}
    }
    out
}

/// Mean and standard error of one scheme along the sweep.
pub fn curve_csv(output: &ExperimentOutput, spec: &ExperimentSpec, scheme: Scheme) -> Result<String> {
    let metric = match spec.objective {
        Objective::PowerMin => "mean_power_W",
        Objective::MaxMin => "mean_min_rate",
    };
    let mut records = Vec::new();
    for &v in &spec.sweep.values {
        let pick = |kind| {
            output.aggregate_row(scheme, v, kind).and_then(|r| match spec.objective {
                Objective::PowerMin => r.total_power_w,
                Objective::MaxMin => r.min_rate,
            })
        };
        // Points where every trial failed have no aggregate and are skipped.
        if let (Some(mean), Some(se)) = (pick(RowKind::Mean), pick(RowKind::Stderr)) {
            records.push([v.to_string(), mean.to_string(), se.to_string()]);
        }
    }
    csv_table(&[spec.sweep.variable.name(), metric, "stderr"], records)
}

fn trace_files(id: FigureId, seed: u64) -> Result<Vec<(String, String)>> {
    let params = ChannelModelParams::default();
    let mut files = Vec::new();
    if id.0 == 3 {
        let cfg = SystemConfig::uniform(6, 3, 0.01, 1.0).with_seed(seed);
        for t in 0..TRACE_COUNT {
            let ch = generate_channels(&cfg, &params, t as u64)?;
            let (_, trace) = solve_powermin_sca(&ch, &cfg, &ScaOptions::default())?;
            files.push((format!("{id}_channel{t}.csv"), trace_csv(&trace)?));
        }
    } else {
        let cfg = SystemConfig::uniform(5, 3, 0.01, 1.0).with_seed(seed);
        let ch = generate_channels(&cfg, &params, 0)?;
        for i in 0..TRACE_COUNT {
            let opts = ScaOptions {
                init: ScaInit::Random { seed: seed.wrapping_add(i as u64) },
                ..ScaOptions::default()
            };
            let (_, trace) = solve_powermin_sca(&ch, &cfg, &opts)?;
            files.push((format!("{id}_init{i}.csv"), trace_csv(&trace)?));
        }
    }
    Ok(files)
}

/// Computes figure `id` and returns `(file name, contents)` pairs.
pub fn figure_files(id: FigureId, seed: u64, trials: Option<usize>) -> Result<Vec<(String, String)>> {
    if matches!(id.0, 3 | 4) {
        return trace_files(id, seed);
    }
    let mut files = Vec::new();
    for (label, spec) in figure_specs(id, seed, trials) {
        let output = run_experiment(&spec)?;
        files.push((format!("{}_results.csv", spec.name), to_csv_string(&output.rows)?));
        if id.0 >= 8 {
            let scheme = spec.schemes[0];
            let per_user = output.histograms.iter().map(|h| (h.user, &h.histogram));
            files.push((format!("{id}_{}_eta.csv", scheme.name()), histogram_csv(per_user)?));
        } else {
            for &scheme in &spec.schemes {
                files.push((format!("{id}_{label}_{}.csv", scheme.name()), curve_csv(&output, &spec, scheme)?));
            }
        }
    }
    Ok(files)
}

/// Writes the files of figure `id` into `dir` and returns their paths.
pub fn emit_plot_data(id: FigureId, seed: u64, trials: Option<usize>, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for (name, text) in figure_files(id, seed, trials)? {
        let path = dir.join(name);
        write_text(&path, &text)?;
        paths.push(path);
    }
    Ok(paths)
}
