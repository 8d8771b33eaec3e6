use serde::{Deserialize, Serialize};

use super::run::run_scenario;
use super::scenario::Scenario;
use super::{HarnessError, Table};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub voxel_size: f64,
    /// Data constraints per frame, summed over hypotheses.
    pub mean_constraints: f64,
    pub mean_points: f64,
    pub mean_frame_ms: f64,
    pub median_frame_ms: f64,
    pub fingertip_rms_mm: f64,
}

/// Runs the scenario once per voxel size with the same seed. Runs are
/// sequential so their timings do not compete for cores.
pub fn sweep_voxel_size(scenario: &Scenario, sizes: &[f64]) -> Result<Vec<SweepRow>, HarnessError> {
    if sizes.len() < 2 {
        return Err(HarnessError::Config("a sweep needs at least two voxel sizes".into()));
    }
    if let Some(s) = sizes.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
        return Err(HarnessError::Config(format!("voxel size must be > 0, got {s}")));
    }
    sizes
        .iter()
        .map(|&size| {
            let mut s = scenario.clone();
            s.tracker.voxel_size = size;
            let (trace, summary) = run_scenario(&s)?;
            Ok(SweepRow {
                voxel_size: size,
                mean_constraints: trace.mean_constraints(),
                mean_points: summary.mean_points,
                mean_frame_ms: summary.timing.frame_ms.mean,
                median_frame_ms: summary.timing.frame_ms.median,
                fingertip_rms_mm: summary.fingertip_rms_mm,
            })
        })
        .collect()
}

impl SweepRow {
    pub fn table(rows: &[SweepRow]) -> Table {
        let mut t = Table::new(&["voxel_mm", "points", "constraints", "frame_ms_mean", "frame_ms_median", "fingertip_rms_mm"]);
        for r in rows {
            t.rows.push(vec![
                format!("{:.2}", r.voxel_size * 1e3),
                format!("{:.1}", r.mean_points),
                format!("{:.1}", r.mean_constraints),
                format!("{:.3}", r.mean_frame_ms),
                format!("{:.3}", r.median_frame_ms),
                format!("{:.3}", r.fingertip_rms_mm),
            ]);
        }
        t
    }
}
