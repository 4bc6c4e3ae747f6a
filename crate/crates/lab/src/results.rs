//! Result rows and their CSV / JSON encodings.
//!
//! Both encodings carry the same columns. Per-user lists are `;`-joined in
//! CSV and arrays in JSON. Numbers use Rust's shortest round-trip decimal
//! form with `.` as separator, so reading a file back reproduces every
//! value bit for bit.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{OutputFormat, Scheme, SweepVariable};
use crate::error::{io_error, Result};

/// Bumped whenever a column is added, removed or changes meaning.
pub const SCHEMA_VERSION: u32 = 1;

pub const CSV_HEADER: [&str; 17] = [
    "schema_version",
    "row_kind",
    "scheme",
    "sweep_variable",
    "sweep_value",
    "trial",
    "status",
    "trials_included",
    "trials_failed",
    "total_power_w",
    "min_rate",
    "powers_w",
    "rates",
    "satisfaction",
    "chain_satisfaction",
    "iterations",
    "wall_time_ms",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowKind {
    Trial,
    Mean,
    Stderr,
}

impl RowKind {
    fn name(self) -> &'static str {
        match self {
            RowKind::Trial => "trial",
            RowKind::Mean => "mean",
            RowKind::Stderr => "stderr",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrialStatus {
    Ok,
    /// Max-min found no certified rate; recorded as rate 0.
    Degenerate,
    Infeasible,
    SolverFailure,
    Error,
    /// Aggregate rows.
    Aggregate,
}

impl TrialStatus {
    pub fn name(self) -> &'static str {
        match self {
            TrialStatus::Ok => "ok",
            TrialStatus::Degenerate => "degenerate",
            TrialStatus::Infeasible => "infeasible",
            TrialStatus::SolverFailure => "solver-failure",
            TrialStatus::Error => "error",
            TrialStatus::Aggregate => "aggregate",
        }
    }

    /// Whether a trial with this status enters the means.
    pub fn is_included(self) -> bool {
        matches!(self, TrialStatus::Ok | TrialStatus::Degenerate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub schema_version: u32,
    pub row_kind: RowKind,
    pub scheme: Scheme,
    pub sweep_variable: SweepVariable,
    pub sweep_value: f64,
    pub trial: Option<usize>,
    pub status: TrialStatus,
    pub trials_included: usize,
    pub trials_failed: usize,
    pub total_power_w: Option<f64>,
    pub min_rate: Option<f64>,
    pub powers_w: Vec<f64>,
    pub rates: Vec<f64>,
    pub satisfaction: Vec<f64>,
    pub chain_satisfaction: Vec<f64>,
    pub iterations: Option<f64>,
    pub wall_time_ms: Option<f64>,
}

impl ResultRow {
    /// An empty trial row; fields are filled by the scheme runner.
    pub fn trial(scheme: Scheme, variable: SweepVariable, value: f64, trial: usize, status: TrialStatus) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            row_kind: RowKind::Trial,
            scheme,
            sweep_variable: variable,
            sweep_value: value,
            trial: Some(trial),
            status,
            trials_included: usize::from(status.is_included()),
            trials_failed: usize::from(!status.is_included()),
            total_power_w: None,
            min_rate: None,
            powers_w: Vec::new(),
            rates: Vec::new(),
            satisfaction: Vec::new(),
            chain_satisfaction: Vec::new(),
            iterations: None,
            wall_time_ms: None,
        }
    }

    fn csv_record(&self) -> [String; 17] {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";");
        [
            self.schema_version.to_string(),
            self.row_kind.name().to_string(),
            self.scheme.name().to_string(),
            self.sweep_variable.name().to_string(),
            self.sweep_value.to_string(),
            self.trial.map(|t| t.to_string()).unwrap_or_default(),
            self.status.name().to_string(),
            self.trials_included.to_string(),
            self.trials_failed.to_string(),
            opt(self.total_power_w),
            opt(self.min_rate),
            list(&self.powers_w),
            list(&self.rates),
            list(&self.satisfaction),
            list(&self.chain_satisfaction),
            opt(self.iterations),
            opt(self.wall_time_ms),
        ]
    }
}

/// Sample mean and standard error of the mean (0 for fewer than two values).
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn scalar_stats(rows: &[&ResultRow], f: impl Fn(&ResultRow) -> Option<f64>) -> (Option<f64>, Option<f64>) {
    let xs: Vec<f64> = rows.iter().filter_map(|r| f(r)).collect();
    if xs.is_empty() {
        return (None, None);
    }
    let (m, s) = mean_stderr(&xs);
    (Some(m), Some(s))
}

/// Elementwise stats over rows whose lists share one length.
fn list_stats(rows: &[&ResultRow], f: impl Fn(&ResultRow) -> &Vec<f64>) -> (Vec<f64>, Vec<f64>) {
    let lists: Vec<&Vec<f64>> = rows.iter().map(|r| f(r)).filter(|v| !v.is_empty()).collect();
    let Some(first) = lists.first() else {
        return (Vec::new(), Vec::new());
    };
    if lists.iter().any(|v| v.len() != first.len()) {
        return (Vec::new(), Vec::new());
    }
    (0..first.len())
        .map(|i| mean_stderr(&lists.iter().map(|v| v[i]).collect::<Vec<_>>()))
        .unzip()
}

/// Mean and standard-error rows over the included trials of one
/// `(scheme, sweep value)` group.
pub fn aggregate(trials: &[ResultRow]) -> Option<[ResultRow; 2]> {
    let first = trials.first()?;
    let included: Vec<&ResultRow> = trials.iter().filter(|r| r.status.is_included()).collect();
    let failed = trials.len() - included.len();
    let (pm, ps) = scalar_stats(&included, |r| r.total_power_w);
    let (rm, rs) = scalar_stats(&included, |r| r.min_rate);
    let (im, is) = scalar_stats(&included, |r| r.iterations);
    let (tm, ts) = scalar_stats(&included, |r| r.wall_time_ms);
    let (powm, pows) = list_stats(&included, |r| &r.powers_w);
    let (ratm, rats) = list_stats(&included, |r| &r.rates);
    let (satm, sats) = list_stats(&included, |r| &r.satisfaction);
    let (chm, chs) = list_stats(&included, |r| &r.chain_satisfaction);
    let base = ResultRow {
        schema_version: SCHEMA_VERSION,
        row_kind: RowKind::Mean,
        scheme: first.scheme,
        sweep_variable: first.sweep_variable,
        sweep_value: first.sweep_value,
        trial: None,
        status: TrialStatus::Aggregate,
        trials_included: included.len(),
        trials_failed: failed,
        total_power_w: pm,
        min_rate: rm,
        powers_w: powm,
        rates: ratm,
        satisfaction: satm,
        chain_satisfaction: chm,
        iterations: im,
        wall_time_ms: tm,
    };
    let err = ResultRow {
        row_kind: RowKind::Stderr,
        total_power_w: ps,
        min_rate: rs,
        powers_w: pows,
        rates: rats,
        satisfaction: sats,
        chain_satisfaction: chs,
        iterations: is,
        wall_time_ms: ts,
        ..base.clone()
    };
    Some([base, err])
}

pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record(r.csv_record())?;
    }
    w.flush().map_err(io_error("<csv>"))?;
    Ok(())
}

pub fn to_csv_string(rows: &[ResultRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
}

/// A CSV document from a header and string records.
pub fn csv_table<I, R>(header: &[&str], records: I) -> Result<String>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in records {
        w.write_record(r)?;
    }
    w.flush().map_err(io_error("<csv>"))?;
    let buf = w.into_inner().map_err(|e| io_error("<csv>")(e.into_error()))?;
    Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
}

pub fn to_json_string(rows: &[ResultRow]) -> Result<String> {
    let mut s = serde_json::to_string_pretty(rows)?;
    s.push('\n');
    Ok(s)
}

pub fn write_rows(rows: &[ResultRow], path: &Path, format: OutputFormat) -> Result<()> {
    let text = match format {
        OutputFormat::Csv => to_csv_string(rows)?,
        OutputFormat::Json => to_json_string(rows)?,
    };
    write_text(path, &text)
}

/// Writes `text`, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_error(dir))?;
    }
    std::fs::write(path, text).map_err(io_error(path))
}

/// Parses a CSV table written by [`write_csv`].
pub fn read_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let get = |i: usize| rec.get(i).unwrap_or("");
        let num = |i: usize| -> Result<Option<f64>> {
            let s = get(i);
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad_cell(i, s))
            }
        };
        let list = |i: usize| -> Result<Vec<f64>> {
            let s = get(i);
            if s.is_empty() {
                return Ok(Vec::new());
            }
            s.split(';').map(|x| x.parse().map_err(|_| bad_cell(i, x))).collect()
        };
        let json = |i: usize| format!("\"{}\"", get(i));
        rows.push(ResultRow {
            schema_version: get(0).parse().map_err(|_| bad_cell(0, get(0)))?,
            row_kind: serde_json::from_str(&json(1))?,
            scheme: get(2).parse()?,
            sweep_variable: serde_json::from_str(&json(3))?,
            sweep_value: num(4)?.ok_or_else(|| bad_cell(4, ""))?,
            trial: num(5)?.map(|t| t as usize),
            status: serde_json::from_str(&json(6))?,
            trials_included: get(7).parse().map_err(|_| bad_cell(7, get(7)))?,
            trials_failed: get(8).parse().map_err(|_| bad_cell(8, get(8)))?,
            total_power_w: num(9)?,
            min_rate: num(10)?,
            powers_w: list(11)?,
            rates: list(12)?,
            satisfaction: list(13)?,
            chain_satisfaction: list(14)?,
            iterations: num(15)?,
            wall_time_ms: num(16)?,
        });
    }
    Ok(rows)
}

fn bad_cell(col: usize, s: &str) -> crate::error::LabError {
    crate::error::LabError::InvalidSpec(format!("bad value `{s}` in column {}", CSV_HEADER[col]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(trial: usize, status: TrialStatus, p: f64) -> ResultRow {
        ResultRow {
            total_power_w: Some(p),
            min_rate: Some(p / 10.0),
            powers_w: vec![p / 2.0, p / 2.0],
            rates: vec![1.0, 2.0],
            iterations: Some(3.0),
            ..ResultRow::trial(Scheme::NomaSca, SweepVariable::TargetRate, 1.5, trial, status)
        }
    }

    #[test]
    fn aggregates_skip_failed_trials() {
        let rows = vec![
            row(0, TrialStatus::Ok, 1.0),
            row(1, TrialStatus::Ok, 3.0),
            row(2, TrialStatus::SolverFailure, 100.0),
        ];
        let [m, s] = aggregate(&rows).unwrap();
        assert_eq!(m.trials_included, 2);
        assert_eq!(m.trials_failed, 1);
        assert_eq!(m.total_power_w, Some(2.0));
        assert_eq!(m.powers_w, vec![1.0, 1.0]);
        assert_eq!(s.total_power_w, Some(1.0));
        assert_eq!(s.rates, vec![0.0, 0.0]);
    }

    #[test]
    fn csv_round_trips_exactly() {
        let mut rows = vec![row(0, TrialStatus::Ok, 0.1 + 0.2), row(1, TrialStatus::Error, 1e-300)];
        rows[1].total_power_w = None;
        rows[0].satisfaction = vec![0.913, 1.0 / 3.0];
        rows.extend(aggregate(&rows).unwrap());
        let text = to_csv_string(&rows).unwrap();
        assert!(text.starts_with("schema_version,row_kind,scheme"));
        assert_eq!(read_csv(&text).unwrap(), rows);
    }

    #[test]
    fn json_uses_csv_column_names() {
        let rows = vec![row(0, TrialStatus::Ok, 2.0)];
        let v: serde_json::Value = serde_json::from_str(&to_json_string(&rows).unwrap()).unwrap();
        let keys: Vec<&str> = v[0].as_object().unwrap().keys().map(String::as_str).collect();
        let mut want = CSV_HEADER.to_vec();
        want.sort();
        let mut got = keys.clone();
        got.sort();
        assert_eq!(got, want);
        assert_eq!(v[0]["scheme"], "noma-sca");
        assert_eq!(v[0]["status"], "ok");
    }
}
