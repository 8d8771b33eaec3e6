//! Closed-loop evaluation on synthetic depth: scripted scenarios, traces,
//! comparisons, voxel sweeps and still-frame export.

mod compare;
mod export;
pub mod registration;
mod run;
mod scenario;
mod sweep;

use std::path::Path;

use thiserror::Error;

pub use compare::{compare_traces, Metric};
pub use export::{export_frames, overlay_edges, render_still};
pub use run::{
    run_scenario, run_scenario_observed, FrameRecord, HandRecord, Stats, StrategyError, Summary, TimingSummary, Trace,
    TRACE_SCHEMA,
};
pub use scenario::{
    builtin, builtin_scenarios, detector_reset, fast_wave, fast_wave_for, fist_to_open, knife_hand_bend,
    resolve_scenario, slow_wave, static_hand, two_hands, voxel_sweep, wrong_finger_seed, HandScript, Keyframe,
    Scenario, SyntheticCamera, SyntheticFrame, SCENARIO_SCHEMA,
};
pub use sweep::{sweep_voxel_size, SweepRow};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("threshold failed: {0}")]
    Threshold(String),
}

impl HarnessError {
    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        HarnessError::Io(format!("{}: {e}", path.display()))
    }

    /// Process exit code: 1 config, 2 I/O, 3 threshold.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 1,
            HarnessError::Io(_) => 2,
            HarnessError::Threshold(_) => 3,
        }
    }
}

/// A small string table printed aligned or written as CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn to_text(&self) -> String {
        let mut widths: Vec<usize> = self.header.iter().map(|h| h.len()).collect();
        for r in &self.rows {
            for (w, c) in widths.iter_mut().zip(r) {
                *w = (*w).max(c.len());
            }
        }
        let line = |cells: &[String]| {
            let parts: Vec<String> = cells
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect();
            parts.join("  ").trim_end().to_string()
        };
        let mut out = line(&self.header);
        out.push('\n');
        out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * widths.len().saturating_sub(1)));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&line(r));
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), HarnessError> {
        std::fs::write(path, self.to_csv()).map_err(|e| HarnessError::io(path, e))
    }
}
