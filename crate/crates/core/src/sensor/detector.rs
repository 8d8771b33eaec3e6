use serde::{Deserialize, Serialize};

use super::{DepthImage, BACKGROUND};
use crate::geometry::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    /// Rows a segment must persist before it counts as a finger.
    pub min_height: usize,
    /// A track survives this many rows without a matching segment, which
    /// bridges dropout holes.
    pub bridge_rows: usize,
    /// Background gaps up to this many pixels wide do not split a run.
    pub max_gap: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self { min_height: 10, bridge_rows: 5, max_gap: 2 }
    }
}

struct Track {
    top: (usize, usize),
    height: usize,
    span: (usize, usize),
    /// Union of the runs matched in the current row.
    pending: Option<(usize, usize)>,
    last_row: usize,
    group: usize,
}

fn nearest_foreground(image: &DepthImage, v: usize, l: usize, r: usize) -> usize {
    let mid = (l + r) / 2;
    (0..=(r - l))
        .flat_map(|k| [mid.checked_sub(k), Some(mid + k)])
        .flatten()
        .find(|&u| u >= l && u <= r && image.is_foreground(u, v))
        .unwrap_or(l)
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Scans rows top-down, following each contiguous foreground run as a
/// track. Tracks touching the same run join one blob. Fires on the first
/// row where some blob holds exactly five tracks of at least `min_height`
/// rows, and returns the top pixel of each (deprojected), left to right.
pub fn five_finger_detector(image: &DepthImage, cfg: &DetectorConfig) -> Option<[Vec3; 5]> {
    let (w, h) = (image.width(), image.height());
    let mut tracks: Vec<Track> = Vec::new();
    let mut parent: Vec<usize> = Vec::new();
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut active: Vec<usize> = Vec::new();
    for v in 0..h {
        runs.clear();
        active.retain(|&t| v - tracks[t].last_row <= cfg.bridge_rows + 1);
        let mut u = 0;
        while u < w {
            if image.get(u, v) == BACKGROUND {
                u += 1;
                continue;
            }
            let start = u;
            while u < w && image.get(u, v) != BACKGROUND {
                u += 1;
            }
            match runs.last_mut() {
                Some(last) if start - last.1 - 1 <= cfg.max_gap => last.1 = u - 1,
                _ => runs.push((start, u - 1)),
            }
        }
        let mut touched = false;
        for &(l, r) in &runs {
            let live: Vec<usize> = active
                .iter()
                .copied()
                .filter(|&t| tracks[t].span.0 <= r + 1 && l <= tracks[t].span.1 + 1)
                .collect();
            if live.is_empty() {
                let g = parent.len();
                parent.push(g);
                active.push(tracks.len());
                tracks.push(Track { top: (nearest_foreground(image, v, l, r), v), height: 1, span: (l, r), pending: None, last_row: v, group: g });
                continue;
            }
            let root = find(&mut parent, tracks[live[0]].group);
            for &t in &live {
                let g = find(&mut parent, tracks[t].group);
                if g != root {
                    parent[g] = root;
                    touched = true;
                }
                // A track only grows while it is the only one in its run;
                // once merged it belongs to the blob below the fingers.
                let tr = &mut tracks[t];
                if live.len() == 1 && tr.pending.is_none() {
                    tr.height += v - tr.last_row;
                }
                tr.pending = Some(match tr.pending {
                    Some((a, b)) => (a.min(l), b.max(r)),
                    None => (l, r),
                });
            }
        }
        for &t in &active {
            if let Some(span) = tracks[t].pending.take() {
                tracks[t].span = span;
                tracks[t].last_row = v;
            }
        }
        if !touched {
            continue;
        }
        let mut counts: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for t in 0..tracks.len() {
            if tracks[t].height >= cfg.min_height {
                let g = find(&mut parent, tracks[t].group);
                counts.entry(g).or_default().push(t);
            }
        }
        if let Some(members) = counts.values().find(|m| m.len() == 5) {
            let mut tips: Vec<(usize, usize)> = members.iter().map(|&t| tracks[t].top).collect();
            tips.sort();
            let cam = &image.intrinsics;
            let pts: Vec<Vec3> = tips
                .iter()
                .map(|&(u, v)| cam.deproject_pixel(u as f64, v as f64, image.get(u, v) as f64))
                .collect();
            return pts.try_into().ok();
        }
    }
    None
}
