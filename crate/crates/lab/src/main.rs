use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use noma_core::channel::ChannelModelParams;
use noma_core::maxmin::{solve_maxmin, BisectionOptions};
use noma_core::robust::eta_histogram;
use noma_core::sca::{solve_powermin_sca, ScaOptions};
use noma_core::sdr::{build_sdr_program, solve_powermin_sdr};
use noma_core::ChannelSet;
use noma_lab::checks::{emit_table_checks, CheckSettings};
use noma_lab::config::{ExperimentSpec, LawName, Objective, OutputFormat, Scheme, SweepVariable};
use noma_lab::figures::{emit_plot_data, FigureId};
use noma_lab::io::{bisection_csv, histogram_csv, load_channels, load_uncertainty, save_conic_dump, save_json, trace_csv};
use noma_lab::results::{aggregate, to_csv_string, to_json_string, write_rows, write_text, ResultRow, TrialStatus};
use noma_lab::runner::{run_experiment, run_outage_scheme_on_model, run_scheme, trial_channels, TrialOutcome};
use noma_lab::{LabError, Result};

#[derive(Parser)]
#[command(name = "noma", version, about = "Beamforming designs for downlink multi-antenna NOMA")]
struct Cli {
    /// Master seed of every random draw.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of channel draws (instances for `experiment checks`).
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Output file, or directory for `experiment plotdata`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Format of result tables.
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
    /// Record per-trial wall time in the result table.
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Least total power meeting a common rate target.
    Powermin(PowerminArgs),
    /// Largest common rate under a power budget.
    Maxmin(MaxminArgs),
    /// Outage-constrained design under covariance errors.
    Robust(RobustArgs),
    /// Experiment files, consistency checks and figure data.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
}

#[derive(Subcommand)]
enum ExperimentCommand {
    /// Runs an experiment spec file.
    Run { spec: PathBuf },
    /// Cross-method consistency checks; fails if any check fails.
    Checks,
    /// Writes the CSV data behind one figure (fig1 … fig11).
    Plotdata { figure: String },
}

#[derive(Args)]
struct InstanceArgs {
    /// Channel set JSON; channels are drawn from the model when absent.
    #[arg(long)]
    channels: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    users: usize,
    #[arg(long, default_value_t = 3)]
    antennas: usize,
    /// Noise variance in W.
    #[arg(long, default_value_t = 0.01)]
    noise: f64,
    /// Path-loss exponent of drawn channels.
    #[arg(long, default_value_t = ChannelModelParams::default().pathloss_exponent)]
    pathloss: f64,
    /// Directory for per-trial artifacts (channels, traces, logs, dumps).
    #[arg(long)]
    artifacts: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Sca,
    Sdr,
    Oma,
    Zf,
}

#[derive(Args)]
struct PowerminArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Target rate of every user in bits/s/Hz.
    #[arg(long, default_value_t = 2.0)]
    rate: f64,
    #[arg(long, value_enum, default_value = "sca")]
    method: Method,
}

#[derive(Args)]
struct MaxminArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Total power budget in W.
    #[arg(long)]
    budget: f64,
    #[arg(long, value_enum, default_value = "noma")]
    method: MaxminMethod,
}

#[derive(Clone, Copy, ValueEnum)]
enum MaxminMethod {
    Noma,
    Oma,
    Zf,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutageScheme {
    NomaRobust,
    NomaNonrobust,
    OmaRobust,
    OmaNonrobust,
}

#[derive(Args)]
struct RobustArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Uncertainty model JSON; replaces drawn channels.
    #[arg(long, conflicts_with = "channels")]
    uncertainty: Option<PathBuf>,
    #[arg(long, default_value_t = 3.0)]
    rate: f64,
    /// Variance of each covariance error entry.
    #[arg(long, default_value_t = 0.005)]
    error_variance: f64,
    /// Outage probability of every user.
    #[arg(long, default_value_t = 0.1)]
    outage: f64,
    /// Monte-Carlo samples per trial.
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, value_enum, default_value = "scalar-surrogate")]
    law: LawName,
    #[arg(long, value_enum, default_value = "noma-robust")]
    scheme: OutageScheme,
}

fn single_point_spec(cli: &Cli, scheme: Scheme, inst: &InstanceArgs, value: f64) -> ExperimentSpec {
    let mut spec = ExperimentSpec::new(vec![scheme], SweepVariable::TargetRate, vec![value]);
    spec.seed = cli.seed.unwrap_or(0);
    spec.trials = cli.trials.unwrap_or(1);
    spec.system.num_users = inst.users;
    spec.system.num_antennas = inst.antennas;
    spec.system.noise_variance = inst.noise;
    spec.channel.pathloss_exponent = inst.pathloss;
    spec.output.timing = cli.timing;
    spec
}

/// Channels of trial `t`, from the file when one was given.
fn instance_channels(spec: &ExperimentSpec, value: f64, inst: &InstanceArgs, t: usize) -> Result<ChannelSet> {
    match &inst.channels {
        Some(path) => load_channels(path),
        None => trial_channels(spec, &spec.point(value)?, t),
    }
}

/// Runs `spec` trial by trial; a channel file pins the system size.
fn run_instances(
    spec: &mut ExperimentSpec,
    inst: &InstanceArgs,
    mut artifacts: impl FnMut(usize, &ChannelSet, &ExperimentSpec) -> Result<()>,
) -> Result<Vec<TrialOutcome>> {
    let value = spec.sweep.values[0];
    if let Some(path) = &inst.channels {
        let ch = load_channels(path)?;
        spec.system.num_users = ch.num_users();
        spec.system.num_antennas = ch.num_antennas();
        spec.trials = 1;
    }
    spec.validate()?;
    let point = spec.point(value)?;
    let mut out = Vec::new();
    for t in 0..spec.trials {
        let ch = instance_channels(spec, value, inst, t)?;
        out.push(run_scheme(spec, spec.schemes[0], &point, &ch, t));
        artifacts(t, &ch, spec)?;
    }
    Ok(out)
}

fn artifact_path(dir: &Option<PathBuf>, t: usize, name: &str) -> Option<PathBuf> {
    dir.as_ref().map(|d| d.join(format!("trial{t}_{name}")))
}

/// Prints or writes the rows and reports whether every trial succeeded.
fn emit(cli: &Cli, outcomes: &[TrialOutcome]) -> Result<bool> {
    let mut rows: Vec<ResultRow> = outcomes.iter().map(|o| o.row.clone()).collect();
    let ok = rows.iter().all(|r| r.status == TrialStatus::Ok);
    if rows.len() > 1 {
        rows.extend(aggregate(&rows).into_iter().flatten());
    }
    emit_rows(cli, &rows, cli.out.as_deref())?;
    Ok(ok)
}

fn emit_rows(cli: &Cli, rows: &[ResultRow], out: Option<&Path>) -> Result<()> {
    let format = cli.format.unwrap_or_default();
    match out {
        Some(path) => write_rows(rows, path, format),
        None => {
            let text = match format {
                OutputFormat::Csv => to_csv_string(rows)?,
                OutputFormat::Json => to_json_string(rows)?,
            };
            print!("{text}");
            Ok(())
        }
    }
}

fn powermin(cli: &Cli, args: &PowerminArgs) -> Result<bool> {
    let scheme = match args.method {
        Method::Sca => Scheme::NomaSca,
        Method::Sdr => Scheme::NomaSdr,
        Method::Oma => Scheme::Oma,
        Method::Zf => Scheme::Zf,
    };
    let mut spec = single_point_spec(cli, scheme, &args.instance, args.rate);
    let dir = &args.instance.artifacts;
    let outcomes = run_instances(&mut spec, &args.instance, |t, ch, spec| {
        let Some(channels_path) = artifact_path(dir, t, "channels.json") else {
            return Ok(());
        };
        save_json(ch, &channels_path)?;
        let cfg = spec.point(args.rate)?.system;
        match args.method {
            Method::Sca => {
                if let Ok((_, trace)) = solve_powermin_sca(ch, &cfg, &ScaOptions::default()) {
                    write_text(&artifact_path(dir, t, "trace.csv").unwrap(), &trace_csv(&trace)?)?;
                }
            }
            Method::Sdr => {
                let prog = build_sdr_program(ch, &cfg.min_sinrs()?, cfg.noise_variance)?;
                save_conic_dump(&prog.program, &artifact_path(dir, t, "sdr_program.txt").unwrap())?;
                if let Ok(sol) = solve_powermin_sdr(ch, &cfg) {
                    save_json(&sol, &artifact_path(dir, t, "sdr_solution.json").unwrap())?;
                }
            }
            Method::Oma | Method::Zf => {}
        }
        Ok(())
    })?;
    emit(cli, &outcomes)
}

fn maxmin(cli: &Cli, args: &MaxminArgs) -> Result<bool> {
    let scheme = match args.method {
        MaxminMethod::Noma => Scheme::NomaMaxmin,
        MaxminMethod::Oma => Scheme::Oma,
        MaxminMethod::Zf => Scheme::Zf,
    };
    let mut spec = single_point_spec(cli, scheme, &args.instance, args.budget);
    spec.objective = Objective::MaxMin;
    spec.sweep.variable = SweepVariable::PMax;
    let dir = &args.instance.artifacts;
    let outcomes = run_instances(&mut spec, &args.instance, |t, ch, spec| {
        let Some(channels_path) = artifact_path(dir, t, "channels.json") else {
            return Ok(());
        };
        save_json(ch, &channels_path)?;
        if let MaxminMethod::Noma = args.method {
            let cfg = spec.point(args.budget)?.system;
            if let Ok(res) = solve_maxmin(ch, &cfg, &BisectionOptions::default()) {
                write_text(&artifact_path(dir, t, "bisection.csv").unwrap(), &bisection_csv(&res.log)?)?;
            }
        }
        Ok(())
    })?;
    emit(cli, &outcomes)
}

fn robust(cli: &Cli, args: &RobustArgs) -> Result<bool> {
    let scheme = match args.scheme {
        OutageScheme::NomaRobust => Scheme::NomaRobust,
        OutageScheme::NomaNonrobust => Scheme::NomaNonrobust,
        OutageScheme::OmaRobust => Scheme::OmaRobust,
        OutageScheme::OmaNonrobust => Scheme::OmaNonrobust,
    };
    let mut spec = single_point_spec(cli, scheme, &args.instance, args.rate);
    spec.robust.error_variance = args.error_variance;
    spec.robust.outage = args.outage;
    spec.robust.samples = args.samples;
    spec.robust.law = args.law;
    let dir = &args.instance.artifacts;
    let outcomes = match &args.uncertainty {
        Some(path) => {
            let model = load_uncertainty(path)?;
            spec.system.num_users = model.num_users();
            spec.system.num_antennas = model.num_antennas();
            spec.trials = 1;
            spec.validate()?;
            let point = spec.point(args.rate)?;
            vec![run_outage_scheme_on_model(&spec, scheme, &point, &model, 0)]
        }
        None => run_instances(&mut spec, &args.instance, |t, ch, _| match artifact_path(dir, t, "channels.json") {
            Some(p) => save_json(ch, &p),
            None => Ok(()),
        })?,
    };
    if let Some(d) = dir {
        for (t, o) in outcomes.iter().enumerate() {
            if let Some(eta) = &o.eta {
                let hists: Vec<_> = eta.iter().map(|e| eta_histogram(e)).collect();
                let text = histogram_csv(hists.iter().enumerate())?;
                write_text(&d.join(format!("trial{t}_eta.csv")), &text)?;
            }
        }
    }
    emit(cli, &outcomes)
}

fn experiment_run(cli: &Cli, path: &Path) -> Result<bool> {
    let mut spec = ExperimentSpec::load(path)?;
    if let Some(s) = cli.seed {
        spec.seed = s;
    }
    if let Some(t) = cli.trials {
        spec.trials = t;
    }
    if let Some(f) = cli.format {
        spec.output.format = f;
    }
    spec.output.timing |= cli.timing;
    let out = cli.out.clone().or_else(|| spec.output.path.as_ref().map(PathBuf::from));
    let output = run_experiment(&spec)?;
    match &out {
        Some(p) => write_rows(&output.rows, p, spec.output.format)?,
        None => {
            let text = match spec.output.format {
                OutputFormat::Csv => to_csv_string(&output.rows)?,
                OutputFormat::Json => to_json_string(&output.rows)?,
            };
            print!("{text}");
        }
    }
    if let Some(p) = &out {
        let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
        for scheme in &spec.schemes {
            for &v in &spec.sweep.values {
                let per_user: Vec<_> = output
                    .histograms
                    .iter()
                    .filter(|h| h.scheme == *scheme && h.sweep_value == v)
                    .map(|h| (h.user, &h.histogram))
                    .collect();
                if !per_user.is_empty() {
                    let name = format!("{stem}_{}_{v}_eta.csv", scheme.name());
                    write_text(&p.with_file_name(name), &histogram_csv(per_user)?)?;
                }
            }
        }
    }
    Ok(true)
}

fn experiment_checks(cli: &Cli) -> Result<bool> {
    let mut settings = CheckSettings::default();
    if let Some(s) = cli.seed {
        settings.seed = s;
    }
    if let Some(t) = cli.trials {
        settings.agreement_instances = t;
        settings.single_user_instances = t;
        settings.round_trip_instances = t;
    }
    let outcomes = emit_table_checks(&settings)?;
    let mut report = String::new();
    for o in &outcomes {
        report.push_str(&format!("{o}\n"));
    }
    print!("{report}");
    if let Some(p) = &cli.out {
        write_text(p, &report)?;
    }
    Ok(outcomes.iter().all(|o| o.passed))
}

fn experiment_plotdata(cli: &Cli, figure: &str) -> Result<bool> {
    let id: FigureId = figure.parse()?;
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("plotdata"));
    for p in emit_plot_data(id, cli.seed.unwrap_or(1), cli.trials, &dir)? {
        println!("{}", p.display());
    }
    Ok(true)
}

fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Powermin(a) => powermin(cli, a),
        Command::Maxmin(a) => maxmin(cli, a),
        Command::Robust(a) => robust(cli, a),
        Command::Experiment(ExperimentCommand::Run { spec }) => experiment_run(cli, spec),
        Command::Experiment(ExperimentCommand::Checks) => experiment_checks(cli),
        Command::Experiment(ExperimentCommand::Plotdata { figure }) => experiment_plotdata(cli, figure),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                LabError::InvalidSpec(_) | LabError::Parse(_) | LabError::UnknownFigure(_) => 2,
                _ => 1,
            })
        }
    }
}

