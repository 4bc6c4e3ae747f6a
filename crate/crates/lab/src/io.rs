//! File formats other than the result table.
//!
//! Complex numbers are `[re, im]` pairs in every JSON document. Hermitian
//! matrices are packed as `{"order": n, "upper": [...]}` with the upper
//! triangle listed row by row.

use std::path::Path;

use noma_core::channel::UncertaintyModel;
use noma_core::conic::dump::{parse_triplet_text, to_triplet_text};
use noma_core::conic::ConicProgram;
use noma_core::maxmin::BisectionStep;
use noma_core::robust::EtaHistogram;
use noma_core::sca::ScaTrace;
use noma_core::sdr::SdrSolution;
use noma_core::ChannelSet;
use serde::{de::DeserializeOwned, Serialize};

use crate::error::{io_error, Result};
use crate::results::{csv_table, write_text};

pub const TRACE_HEADER: [&str; 3] = ["iteration", "total_power_W", "max_residual"];
pub const BISECTION_HEADER: [&str; 5] = ["iter", "t_min", "t_max", "subproblem_power_W", "certified"];
pub const HISTOGRAM_HEADER: [&str; 4] = ["bin_left", "bin_right", "count", "user_index"];

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(io_error(path))
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    Ok(serde_json::from_str(text)?)
}

/// Parses a channel set; users are re-sorted and validated.
pub fn channels_from_json(text: &str) -> Result<ChannelSet> {
    let raw: ChannelSet = from_json(text)?;
    Ok(ChannelSet::new(raw.channels().to_vec(), raw.distances().to_vec())?)
}

pub fn load_channels(path: &Path) -> Result<ChannelSet> {
    channels_from_json(&read(path)?)
}

pub fn uncertainty_from_json(text: &str) -> Result<UncertaintyModel> {
    let model: UncertaintyModel = from_json(text)?;
    model.validate()?;
    Ok(model)
}

pub fn load_uncertainty(path: &Path) -> Result<UncertaintyModel> {
    uncertainty_from_json(&read(path)?)
}

pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    write_text(path, &to_json(value)?)
}

pub fn save_sdr_solution(sol: &SdrSolution, path: &Path) -> Result<()> {
    save_json(sol, path)
}

pub fn save_conic_dump(prog: &ConicProgram, path: &Path) -> Result<()> {
    write_text(path, &to_triplet_text(prog))
}

pub fn load_conic_dump(path: &Path) -> Result<ConicProgram> {
    Ok(parse_triplet_text(&read(path)?)?)
}

/// One row per iterate; iteration 0 is the starting point.
pub fn trace_csv(trace: &ScaTrace) -> Result<String> {
    csv_table(
        &TRACE_HEADER,
        trace
            .total_power
            .iter()
            .zip(&trace.max_shortfall)
            .enumerate()
            .map(|(i, (p, r))| vec![i.to_string(), p.to_string(), r.to_string()]),
    )
}

/// `subproblem_power_W` is empty when the subproblem had no solution.
pub fn bisection_csv(log: &[BisectionStep]) -> Result<String> {
    csv_table(
        &BISECTION_HEADER,
        log.iter().map(|s| {
            vec![
                s.iteration.to_string(),
                s.t_min.to_string(),
                s.t_max.to_string(),
                s.subproblem_power.map(|p| p.to_string()).unwrap_or_default(),
                s.certified.to_string(),
            ]
        }),
    )
}

/// Rows of every user's histogram, user by user. Bin edges are written to
/// two decimals, the resolution of the 0.05 grid.
pub fn histogram_csv<'a>(per_user: impl IntoIterator<Item = (usize, &'a EtaHistogram)>) -> Result<String> {
    let mut rows = Vec::new();
    for (user, h) in per_user {
        for b in &h.bins {
            rows.push(vec![format!("{:.2}", b.left), format!("{:.2}", b.right), b.count.to_string(), user.to_string()]);
        }
    }
    csv_table(&HISTOGRAM_HEADER, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use noma_core::channel::{generate_channels, ChannelModelParams};
    use noma_core::robust::eta_histogram;
    use noma_core::SystemConfig;

    #[test]
    fn channel_json_round_trips() {
        let cfg = SystemConfig::uniform(3, 3, 0.01, 1.0).with_seed(4);
        let ch = generate_channels(&cfg, &ChannelModelParams::default(), 0).unwrap();
        let text = to_json(&ch).unwrap();
        assert!(text.contains("\"channels\""));
        assert_eq!(channels_from_json(&text).unwrap(), ch);
    }

    #[test]
    fn uncertainty_json_round_trips() {
        let cfg = SystemConfig::uniform(2, 2, 0.01, 1.0).with_seed(4);
        let ch = generate_channels(&cfg, &ChannelModelParams::default(), 1).unwrap();
        let model = UncertaintyModel::from_channels(&ch, 0.005, 0.1).unwrap();
        let text = to_json(&model).unwrap();
        let back = uncertainty_from_json(&text).unwrap();
        assert_eq!(back.error_std, model.error_std);
        assert_eq!(back.outage, model.outage);
        for (a, b) in back.nominal.iter().zip(&model.nominal) {
            assert!((a.matrix() - b.matrix()).norm() <= 1e-15 * b.matrix().norm());
        }
    }

    #[test]
    fn histogram_rows_cover_zero_to_two() {
        let h = eta_histogram(&[0.01, 0.99, 1.0, 1.99]);
        let text = histogram_csv([(0, &h), (1, &h)]).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "bin_left,bin_right,count,user_index");
        assert_eq!(lines.len(), 1 + 2 * 40);
        assert_eq!(lines[1], "0.00,0.05,1,0");
        assert_eq!(lines[4], "0.15,0.20,0,0");
    }
}
