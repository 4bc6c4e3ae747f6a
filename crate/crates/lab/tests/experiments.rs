use std::process::Command;

use noma_lab::config::{ExperimentSpec, Objective, Scheme, SweepVariable};
use noma_lab::results::{mean_stderr, read_csv, to_csv_string, to_json_string, RowKind, TrialStatus, CSV_HEADER};
use noma_lab::runner::run_experiment;

fn small(schemes: Vec<Scheme>, var: SweepVariable, values: Vec<f64>) -> ExperimentSpec {
    let mut s = ExperimentSpec::new(schemes, var, values);
    s.seed = 9;
    s.trials = 4;
    s
}

fn robust_small(schemes: Vec<Scheme>) -> ExperimentSpec {
    let mut s = small(schemes, SweepVariable::TargetRate, vec![2.0]);
    s.channel.pathloss_exponent = 0.0;
    s.robust.samples = 50;
    s
}

#[test]
fn identical_specs_give_identical_bytes() {
    let mut spec = small(vec![Scheme::NomaSca, Scheme::Oma], SweepVariable::TargetRate, vec![1.0, 2.0]);
    spec.trials = 6;
    let a = to_csv_string(&run_experiment(&spec).unwrap().rows).unwrap();
    let b = to_csv_string(&run_experiment(&spec).unwrap().rows).unwrap();
    assert_eq!(a, b);
    // Scheduling must not leak into the output.
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let c = pool.install(|| to_csv_string(&run_experiment(&spec).unwrap().rows).unwrap());
    assert_eq!(a, c);
    spec.seed += 1;
    let d = to_csv_string(&run_experiment(&spec).unwrap().rows).unwrap();
    assert_ne!(a, d);
}

#[test]
fn aggregates_match_raw_rows() {
    let spec = small(vec![Scheme::NomaSdr, Scheme::Zf], SweepVariable::NumAntennas, vec![3.0, 4.0]);
    let out = run_experiment(&spec).unwrap();
    for &scheme in &spec.schemes {
        for &v in &spec.sweep.values {
            let trials: Vec<_> = out
                .rows
                .iter()
                .filter(|r| r.scheme == scheme && r.sweep_value == v && r.row_kind == RowKind::Trial)
                .collect();
            assert_eq!(trials.len(), spec.trials);
            let powers: Vec<f64> = trials.iter().filter_map(|r| r.total_power_w).collect();
            let (m, se) = mean_stderr(&powers);
            let mean = out.aggregate_row(scheme, v, RowKind::Mean).unwrap();
            let stderr = out.aggregate_row(scheme, v, RowKind::Stderr).unwrap();
            assert!((mean.total_power_w.unwrap() - m).abs() <= 1e-12 * m.abs());
            assert!((stderr.total_power_w.unwrap() - se).abs() <= 1e-12 * m.abs());
            for k in 0..3 {
                let pk: Vec<f64> = trials.iter().map(|r| r.powers_w[k]).collect();
                let (mk, _) = mean_stderr(&pk);
                assert!((mean.powers_w[k] - mk).abs() <= 1e-12 * mk.abs());
            }
        }
    }
}

#[test]
fn failed_trials_are_counted_but_not_averaged() {
    // Zero-forcing needs at least as many antennas as users.
    let mut spec = small(vec![Scheme::Zf, Scheme::NomaSca], SweepVariable::NumUsers, vec![2.0, 4.0]);
    spec.system.num_antennas = 3;
    let out = run_experiment(&spec).unwrap();
    let zf4: Vec<_> = out
        .rows
        .iter()
        .filter(|r| r.scheme == Scheme::Zf && r.sweep_value == 4.0 && r.row_kind == RowKind::Trial)
        .collect();
    assert!(zf4.iter().all(|r| r.status == TrialStatus::Infeasible && r.trials_failed == 1));
    let zf = out.aggregate_row(Scheme::Zf, 4.0, RowKind::Mean).unwrap();
    assert_eq!((zf.trials_included, zf.trials_failed), (0, 4));
    assert_eq!(zf.total_power_w, None);
    let noma = out.aggregate_row(Scheme::NomaSca, 4.0, RowKind::Mean).unwrap();
    assert_eq!((noma.trials_included, noma.trials_failed), (4, 0));
}

#[test]
fn every_scheme_shares_one_schema() {
    let mut runs = vec![
        run_experiment(&small(
            vec![Scheme::NomaSca, Scheme::NomaSdr, Scheme::Oma, Scheme::Zf],
            SweepVariable::TargetRate,
            vec![1.0],
        ))
        .unwrap(),
        run_experiment(&robust_small(vec![
            Scheme::NomaRobust,
            Scheme::NomaNonrobust,
            Scheme::OmaRobust,
            Scheme::OmaNonrobust,
        ]))
        .unwrap(),
    ];
    let mut mm = small(vec![Scheme::NomaMaxmin, Scheme::Oma, Scheme::Zf], SweepVariable::PMax, vec![5.0]);
    mm.objective = Objective::MaxMin;
    mm.trials = 2;
    mm.channel.pathloss_exponent = 0.0;
    runs.push(run_experiment(&mm).unwrap());

    let mut seen = std::collections::BTreeSet::new();
    for out in &runs {
        let text = to_csv_string(&out.rows).unwrap();
        let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
        assert_eq!(header, CSV_HEADER);
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        for rec in rd.records() {
            assert_eq!(rec.unwrap().len(), CSV_HEADER.len());
        }
        assert_eq!(read_csv(&text).unwrap(), out.rows);

        let json: serde_json::Value = serde_json::from_str(&to_json_string(&out.rows).unwrap()).unwrap();
        for obj in json.as_array().unwrap() {
            let keys: Vec<&str> = obj.as_object().unwrap().keys().map(String::as_str).collect();
            let mut expected = CSV_HEADER.to_vec();
            expected.sort_unstable();
            let mut keys = keys;
            keys.sort_unstable();
            assert_eq!(keys, expected);
        }
        seen.extend(out.rows.iter().map(|r| r.scheme));
    }
    assert_eq!(seen.len(), Scheme::ALL.len());
}

#[test]
fn outage_schemes_fill_satisfaction_and_histograms() {
    let spec = robust_small(vec![Scheme::NomaRobust, Scheme::NomaNonrobust]);
    let out = run_experiment(&spec).unwrap();
    for r in out.rows.iter().filter(|r| r.row_kind == RowKind::Trial) {
        assert_eq!(r.status, TrialStatus::Ok);
        assert_eq!(r.satisfaction.len(), 3);
        assert!(r.satisfaction.iter().all(|s| (0.0..=1.0).contains(s)));
    }
    assert_eq!(out.histograms.len(), 2 * 3);
    for h in &out.histograms {
        let total: usize = h.histogram.bins.iter().map(|b| b.count).sum::<usize>() + h.histogram.overflow;
        assert_eq!(total, spec.trials * spec.robust.samples);
    }
}

fn noma() -> Command {
    Command::new(env!("CARGO_BIN_EXE_noma"))
}

#[test]
fn cli_experiment_run_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    std::fs::write(
        &spec,
        "name = \"cli\"\nseed = 5\ntrials = 3\nschemes = [\"noma-sca\", \"oma\"]\n\
         sweep.variable = \"target_rate\"\nsweep.values = [1.0, 2.0]\n",
    )
    .unwrap();
    let mut outputs = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let out = dir.path().join(name);
        let st = noma().args(["experiment", "run"]).arg(&spec).arg("--out").arg(&out).status().unwrap();
        assert!(st.success());
        outputs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let rows = read_csv(std::str::from_utf8(&outputs[0]).unwrap()).unwrap();
    assert_eq!(rows.len(), 2 * 2 * (3 + 2));

    // --seed overrides the file.
    let out = dir.path().join("c.csv");
    let st = noma()
        .args(["experiment", "run"])
        .arg(&spec)
        .args(["--seed", "6", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(st.success());
    assert_ne!(std::fs::read(&out).unwrap(), outputs[0]);
}

#[test]
fn cli_rejects_bad_input() {
    let st = noma().args(["experiment", "plotdata", "fig12"]).status().unwrap();
    assert!(!st.success());
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("bad.toml");
    std::fs::write(&spec, "schemes = [\"noma-sca\"]\nsweep.variable = \"target_rate\"\nsweep.values = [2.0, 1.0]\n")
        .unwrap();
    let out = noma().args(["experiment", "run"]).arg(&spec).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("strictly increasing"));
}

#[test]
fn cli_checks_report_one_line_per_check() {
    let out = noma().args(["experiment", "checks", "--trials", "2"]).output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4, "{text}");
    assert!(lines.iter().all(|l| l.starts_with("PASS ") || l.starts_with("FAIL ")));
    assert_eq!(out.status.success(), lines.iter().all(|l| l.starts_with("PASS ")));
}

#[test]
fn cli_powermin_reuses_saved_channels() {
    let dir = tempfile::tempdir().unwrap();
    let art = dir.path().join("art");
    let first = noma()
        .args(["powermin", "--method", "sdr", "--seed", "2", "--artifacts"])
        .arg(&art)
        .output()
        .unwrap();
    assert!(first.status.success());
    for f in ["trial0_channels.json", "trial0_sdr_solution.json", "trial0_sdr_program.txt"] {
        assert!(art.join(f).exists(), "{f}");
    }
    let dump = std::fs::read_to_string(art.join("trial0_sdr_program.txt")).unwrap();
    assert!(dump.starts_with("conic-triplet v1\n"));
    let again = noma()
        .args(["powermin", "--method", "sdr", "--channels"])
        .arg(art.join("trial0_channels.json"))
        .output()
        .unwrap();
    assert!(again.status.success());
    let a = read_csv(std::str::from_utf8(&first.stdout).unwrap()).unwrap();
    let b = read_csv(std::str::from_utf8(&again.stdout).unwrap()).unwrap();
    assert_eq!(a[0].powers_w, b[0].powers_w);
}

#[test]
fn cli_maxmin_writes_bisection_log() {
    let dir = tempfile::tempdir().unwrap();
    let out = noma()
        .args(["maxmin", "--budget", "5", "--pathloss", "0", "--format", "json", "--artifacts"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let rows: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rows[0]["scheme"], "noma-maxmin");
    let log = std::fs::read_to_string(dir.path().join("trial0_bisection.csv")).unwrap();
    assert!(log.starts_with("iter,t_min,t_max,subproblem_power_W,certified\n1,"));
}
