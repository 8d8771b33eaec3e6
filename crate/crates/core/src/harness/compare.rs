use std::fmt;
use std::str::FromStr;

use super::run::{mean, rms, Trace};
use super::{HarnessError, Table};
use crate::sensor::GroundTruth;

const FINGERS: [&str; 5] = ["thumb", "index", "middle", "ring", "pinky"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// Per fingertip RMS position error, mm.
    FingertipRms,
    /// Per body RMS error of the body origin, mm.
    BodyRms,
    /// Mean errTotal of the winner and of each strategy, mm.
    ErrTotalMean,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::FingertipRms => "fingertip-rms",
            Metric::BodyRms => "body-rms",
            Metric::ErrTotalMean => "err-total",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        [Metric::FingertipRms, Metric::BodyRms, Metric::ErrTotalMean]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown metric {s:?} (fingertip-rms, body-rms, err-total)"))
    }
}

fn metric_rows(trace: &Trace, metric: Metric) -> Vec<(String, f64)> {
    let mut out = Vec::new();
    for (k, hand) in trace.hands().into_iter().enumerate() {
        let records = || trace.frames.iter().filter_map(move |f| f.hands.get(k));
        let prefix = format!("{hand:?}").to_lowercase();
        match metric {
            Metric::FingertipRms => {
                let n = records().map(|r| r.truth_tips.len()).max().unwrap_or(0);
                for tip in 0..n {
                    let v = rms(records().filter_map(|r| r.tip_errors().get(tip).copied()));
                    out.push((format!("{prefix}.{}", FINGERS.get(tip).unwrap_or(&"tip")), v * 1e3));
                }
            }
            Metric::BodyRms => {
                let names = trace.bodies.get(k).cloned().unwrap_or_default();
                for (b, name) in names.iter().enumerate() {
                    let v = rms(records().filter_map(|r| {
                        let t = GroundTruth::decode_pose(r.truth.get(b)?).translation.vector;
                        let e = GroundTruth::decode_pose(r.best.get(b)?).translation.vector;
                        Some((t - e).norm())
                    }));
                    out.push((format!("{prefix}.{name}"), v * 1e3));
                }
            }
            Metric::ErrTotalMean => {
                out.push((format!("{prefix}.best"), mean(records().filter_map(|r| r.best_total())) * 1e3));
                for &s in &trace.strategies {
                    out.push((format!("{prefix}.{s}"), mean(records().filter_map(|r| r.total_of(s))) * 1e3));
                }
            }
        }
    }
    out
}

/// One row per fingertip, body or strategy and one column per trace;
/// values in millimeters. Rows missing from a trace are left blank.
pub fn compare_traces(traces: &[(String, &Trace)], metric: Metric) -> Result<Table, HarnessError> {
    if traces.is_empty() {
        return Err(HarnessError::Config("nothing to compare".into()));
    }
    for (label, t) in traces {
        if t.frames.is_empty() {
            return Err(HarnessError::Config(format!("trace {label} is empty")));
        }
    }
    let per: Vec<Vec<(String, f64)>> = traces.iter().map(|(_, t)| metric_rows(t, metric)).collect();
    let mut keys: Vec<String> = Vec::new();
    for rows in &per {
        for (k, _) in rows {
            if !keys.contains(k) {
                keys.push(k.clone());
            }
        }
    }
    let mut header = vec![format!("{metric} (mm)")];
    header.extend(traces.iter().map(|(l, _)| l.clone()));
    let mut table = Table { header, rows: Vec::new() };
    for k in keys {
        let mut row = vec![k.clone()];
        for rows in &per {
            row.push(rows.iter().find(|(n, _)| *n == k).map_or(String::new(), |(_, v)| format!("{v:.4}")));
        }
        table.rows.push(row);
    }
    Ok(table)
}
