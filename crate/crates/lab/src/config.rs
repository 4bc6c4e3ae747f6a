//! Experiment descriptions.
//!
//! A spec file is a flat key-value document with dotted namespaces:
//!
//! ```text
//! name = "power-vs-rate"
//! seed = 1
//! trials = 200
//! objective = "power-min"
//! schemes = ["noma-sdr", "oma", "zf"]
//! sweep.variable = "target_rate"
//! sweep.values = [0.5, 1.0, 1.5]
//! system.num_users = 3
//! system.num_antennas = 3
//! ```
//!
//! Missing sections take their defaults. [`ExperimentSpec::to_flat_string`]
//! writes every key, one per line, and parses back to the same spec.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use noma_core::channel::ChannelModelParams;
use noma_core::robust::OutageLaw;
use noma_core::SystemConfig;
use serde::{Deserialize, Serialize};

use crate::error::{io_error, LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    NomaSca,
    NomaSdr,
    NomaMaxmin,
    NomaRobust,
    NomaNonrobust,
    Oma,
    Zf,
    OmaRobust,
    OmaNonrobust,
}

impl Scheme {
    pub const ALL: [Scheme; 9] = [
        Scheme::NomaSca,
        Scheme::NomaSdr,
        Scheme::NomaMaxmin,
        Scheme::NomaRobust,
        Scheme::NomaNonrobust,
        Scheme::Oma,
        Scheme::Zf,
        Scheme::OmaRobust,
        Scheme::OmaNonrobust,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::NomaSca => "noma-sca",
            Scheme::NomaSdr => "noma-sdr",
            Scheme::NomaMaxmin => "noma-maxmin",
            Scheme::NomaRobust => "noma-robust",
            Scheme::NomaNonrobust => "noma-nonrobust",
            Scheme::Oma => "oma",
            Scheme::Zf => "zf",
            Scheme::OmaRobust => "oma-robust",
            Scheme::OmaNonrobust => "oma-nonrobust",
        }
    }

    /// Designs evaluated under covariance uncertainty.
    pub fn is_outage_scheme(self) -> bool {
        matches!(
            self,
            Scheme::NomaRobust | Scheme::NomaNonrobust | Scheme::OmaRobust | Scheme::OmaNonrobust
        )
    }

    pub fn supports(self, objective: Objective) -> bool {
        match self {
            Scheme::Oma | Scheme::Zf => true,
            Scheme::NomaMaxmin => objective == Objective::MaxMin,
            _ => objective == Objective::PowerMin,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| LabError::InvalidSpec(format!("unknown scheme `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    TargetRate,
    NumUsers,
    NumAntennas,
    PMax,
    ErrorVariance,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::TargetRate => "target_rate",
            SweepVariable::NumUsers => "num_users",
            SweepVariable::NumAntennas => "num_antennas",
            SweepVariable::PMax => "p_max",
            SweepVariable::ErrorVariance => "error_variance",
        }
    }

    fn is_integral(self) -> bool {
        matches!(self, SweepVariable::NumUsers | SweepVariable::NumAntennas)
    }
}

impl fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// Least total power meeting every rate target.
    #[default]
    PowerMin,
    /// Largest common rate under a power budget.
    MaxMin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum LawName {
    #[default]
    ScalarSurrogate,
    Hermitian,
}

impl From<LawName> for OutageLaw {
    fn from(l: LawName) -> Self {
        match l {
            LawName::ScalarSurrogate => OutageLaw::ScalarSurrogate,
            LawName::Hermitian => OutageLaw::Hermitian,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSection {
    pub num_users: usize,
    pub num_antennas: usize,
    pub noise_variance: f64,
    /// Common target rate in bits/s/Hz.
    pub target_rate: f64,
    /// Power budget in W; required by the max-min objective.
    pub p_max: Option<f64>,
}

impl Default for SystemSection {
    fn default() -> Self {
        Self {
            num_users: 3,
            num_antennas: 3,
            noise_variance: 0.01,
            target_rate: 2.0,
            p_max: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    pub cell_radius: f64,
    pub min_distance: f64,
    pub pathloss_exponent: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        let p = ChannelModelParams::default();
        Self {
            cell_radius: p.cell_radius,
            min_distance: p.min_distance,
            pathloss_exponent: p.pathloss_exponent,
        }
    }
}

impl From<&ChannelSection> for ChannelModelParams {
    fn from(c: &ChannelSection) -> Self {
        ChannelModelParams {
            cell_radius: c.cell_radius,
            min_distance: c.min_distance,
            pathloss_exponent: c.pathloss_exponent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobustSection {
    /// Variance of every entry of the covariance error.
    pub error_variance: f64,
    pub outage: f64,
    /// Covariance-error draws per trial.
    pub samples: usize,
    pub law: LawName,
}

impl Default for RobustSection {
    fn default() -> Self {
        Self {
            error_variance: 0.005,
            outage: 0.1,
            samples: 1000,
            law: LawName::ScalarSurrogate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub path: Option<String>,
    pub format: OutputFormat,
    /// Fill the `wall_time_ms` column; timed output is not reproducible.
    pub timing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub objective: Objective,
    pub schemes: Vec<Scheme>,
    pub sweep: Sweep,
    #[serde(default)]
    pub system: SystemSection,
    #[serde(default)]
    pub channel: ChannelSection,
    #[serde(default)]
    pub robust: RobustSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Trials per sweep point unless a spec says otherwise.
pub const DEFAULT_TRIALS: usize = 200;

fn default_trials() -> usize {
    DEFAULT_TRIALS
}

/// One sweep point resolved into solver inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct PointConfig {
    pub value: f64,
    pub system: SystemConfig,
    pub error_variance: f64,
}

impl ExperimentSpec {
    pub fn new(schemes: Vec<Scheme>, variable: SweepVariable, values: Vec<f64>) -> Self {
        Self {
            name: String::new(),
            seed: 0,
            trials: DEFAULT_TRIALS,
            objective: Objective::default(),
            schemes,
            sweep: Sweep { variable, values },
            system: SystemSection::default(),
            channel: ChannelSection::default(),
            robust: RobustSection::default(),
            output: OutputSection::default(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let spec: Self = toml::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(io_error(path))?;
        Self::from_toml_str(&text)
    }

    /// Every key as `dotted.key = value`, one per line.
    pub fn to_flat_string(&self) -> Result<String> {
        let table = toml::Table::try_from(self)?;
        let mut out = String::new();
        flatten(&table, "", &mut out);
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(LabError::InvalidSpec(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.schemes.is_empty() {
            return bad("at least one scheme is required".into());
        }
        let distinct: BTreeSet<_> = self.schemes.iter().collect();
        if distinct.len() != self.schemes.len() {
            return bad("schemes must be distinct".into());
        }
        let v = &self.sweep.values;
        if v.is_empty() {
            return bad("sweep needs at least one value".into());
        }
        if v.iter().any(|x| !x.is_finite()) {
            return bad("sweep values must be finite".into());
        }
        if v.windows(2).any(|p| !(p[1] > p[0])) {
            return bad("sweep values must be strictly increasing".into());
        }
        let var = self.sweep.variable;
        if var.is_integral() && v.iter().any(|x| x.fract() != 0.0 || *x < 1.0) {
            return bad(format!("{var} values must be positive integers"));
        }
        for s in &self.schemes {
            if !s.supports(self.objective) {
                return bad(format!("scheme {s} does not support the {:?} objective", self.objective));
            }
        }
        match var {
            SweepVariable::PMax if self.objective != Objective::MaxMin => {
                return bad("a p_max sweep needs the max-min objective".into());
            }
            SweepVariable::TargetRate if self.objective != Objective::PowerMin => {
                return bad("a target_rate sweep needs the power-min objective".into());
            }
            SweepVariable::ErrorVariance if !self.schemes.iter().all(|s| s.is_outage_scheme()) => {
                return bad("an error_variance sweep needs robust or non-robust schemes only".into());
            }
            _ => {}
        }
        if self.objective == Objective::MaxMin && self.system.p_max.is_none() && var != SweepVariable::PMax {
            return bad("the max-min objective needs system.p_max".into());
        }
        let r = &self.robust;
        if self.schemes.iter().any(|s| s.is_outage_scheme()) {
            if !(r.outage > 0.0 && r.outage < 0.5) {
                return bad("robust.outage must lie in (0, 0.5)".into());
            }
            if r.samples == 0 {
                return bad("robust.samples must be at least 1".into());
            }
        }
        if !(r.error_variance >= 0.0) {
            return bad("robust.error_variance must be nonnegative".into());
        }
        ChannelModelParams::from(&self.channel).validate()?;
        // Every point must resolve to a valid configuration.
        for &x in v {
            self.point(x)?.system.validate()?;
        }
        Ok(())
    }

    /// Solver inputs at sweep value `value`.
    pub fn point(&self, value: f64) -> Result<PointConfig> {
        let s = &self.system;
        let (mut n, mut m, mut rate, mut p_max, mut var) =
            (s.num_users, s.num_antennas, s.target_rate, s.p_max, self.robust.error_variance);
        match self.sweep.variable {
            SweepVariable::TargetRate => rate = value,
            SweepVariable::NumUsers => n = value as usize,
            SweepVariable::NumAntennas => m = value as usize,
            SweepVariable::PMax => p_max = Some(value),
            SweepVariable::ErrorVariance => var = value,
        }
        if var < 0.0 {
            return Err(LabError::InvalidSpec("error variance must be nonnegative".into()));
        }
        let mut system = SystemConfig::uniform(m, n, s.noise_variance, rate).with_seed(self.seed);
        if self.objective == Objective::MaxMin {
            system.power_budget = p_max;
        }
        if self.schemes.iter().any(|x| x.is_outage_scheme()) {
            system = system.with_outage(self.robust.outage);
        }
        Ok(PointConfig {
            value,
            system,
            error_variance: var,
        })
    }
}

fn flatten(table: &toml::Table, prefix: &str, out: &mut String) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            toml::Value::Table(t) => flatten(t, &key, out),
            _ => {
                out.push_str(&key);
                out.push_str(" = ");
                out.push_str(&v.to_string());
                out.push('\n');
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig1_like() -> ExperimentSpec {
        let mut s = ExperimentSpec::new(
            vec![Scheme::NomaSdr, Scheme::Oma, Scheme::Zf],
            SweepVariable::TargetRate,
            vec![0.5, 1.0, 1.5],
        );
        s.name = "rates".into();
        s.seed = 4;
        s
    }

    #[test]
    fn flat_form_round_trips() {
        let mut s = fig1_like();
        s.system.p_max = Some(3.5);
        s.output.path = Some("out/rates.csv".into());
        let text = s.to_flat_string().unwrap();
        assert!(text.lines().all(|l| !l.starts_with('[')), "{text}");
        assert!(text.contains("sweep.variable = \"target_rate\""));
        assert_eq!(ExperimentSpec::from_toml_str(&text).unwrap(), s);
    }

    #[test]
    fn sections_default() {
        let s = ExperimentSpec::from_toml_str(
            "schemes = [\"noma-sca\"]\nsweep.variable = \"num_users\"\nsweep.values = [2, 3]\n",
        )
        .unwrap();
        assert_eq!(s.trials, DEFAULT_TRIALS);
        assert_eq!(s.system.noise_variance, 0.01);
        assert_eq!(s.channel.pathloss_exponent, 3.8);
        assert_eq!(s.point(3.0).unwrap().system.num_users, 3);
    }

    #[test]
    fn rejects_bad_specs() {
        let mut s = fig1_like();
        s.sweep.values = vec![1.0, 1.0];
        assert!(s.validate().is_err());

        let mut s = fig1_like();
        s.trials = 0;
        assert!(s.validate().is_err());

        let mut s = fig1_like();
        s.sweep.variable = SweepVariable::PMax;
        assert!(s.validate().is_err());

        let mut s = ExperimentSpec::new(vec![Scheme::NomaMaxmin], SweepVariable::NumUsers, vec![2.0]);
        assert!(s.validate().is_err());
        s.objective = Objective::MaxMin;
        assert!(s.validate().is_err());
        s.system.p_max = Some(10.0);
        assert!(s.validate().is_ok());

        let s = ExperimentSpec::new(vec![Scheme::NomaSca], SweepVariable::NumUsers, vec![2.5]);
        assert!(s.validate().is_err());

        let s = ExperimentSpec::new(vec![Scheme::NomaSca], SweepVariable::ErrorVariance, vec![0.0, 0.1]);
        assert!(s.validate().is_err());

        assert!(ExperimentSpec::from_toml_str("schemes = [\"noma-sca\"]\nsweep.variable = \"target_rate\"\nsweep.values = [1]\nbogus = 1\n").is_err());
    }

    #[test]
    fn scheme_names_parse() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert!("noma".parse::<Scheme>().is_err());
    }
}
