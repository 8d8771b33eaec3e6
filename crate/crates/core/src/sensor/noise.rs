use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{DepthImage, BACKGROUND};

/// Synthetic sensor corruption, applied per foreground pixel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Gaussian depth noise standard deviation, m.
    pub sigma: f64,
    /// Probability that a pixel loses its return.
    pub dropout: f64,
    /// Probability that a pixel is displaced uniformly within
    /// `±outlier_range`.
    pub outlier_prob: f64,
    pub outlier_range: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { sigma: 0.0, dropout: 0.0, outlier_prob: 0.0, outlier_range: 0.1 }
    }
}

impl NoiseConfig {
    pub fn is_clean(&self) -> bool {
        self.sigma == 0.0 && self.dropout == 0.0 && self.outlier_prob == 0.0
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err("noise sigma must be >= 0".into());
        }
        for (name, p) in [("dropout", self.dropout), ("outlier_prob", self.outlier_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name} must lie in [0, 1]"));
            }
        }
        if !(self.outlier_range >= 0.0 && self.outlier_range.is_finite()) {
            return Err("outlier_range must be >= 0".into());
        }
        Ok(())
    }
}

/// Corrupts `image` in place. Pixels are visited in row-major order and
/// each foreground pixel draws exactly three variates, so the stream
/// position depends only on the foreground count.
pub fn apply_noise<R: Rng>(image: &mut DepthImage, cfg: &NoiseConfig, rng: &mut R) {
    if cfg.is_clean() {
        return;
    }
    let normal = Normal::new(0.0, cfg.sigma.max(0.0)).expect("sigma validated");
    let (near, far) = (image.intrinsics.near, image.intrinsics.far);
    for d in image.depth.iter_mut() {
        if *d == BACKGROUND {
            continue;
        }
        let gate: f64 = rng.gen();
        let offset: f64 = rng.gen_range(-1.0..=1.0);
        let gauss = normal.sample(rng);
        let z = if gate < cfg.dropout {
            None
        } else if gate < cfg.dropout + cfg.outlier_prob {
            Some(*d as f64 + offset * cfg.outlier_range)
        } else {
            Some(*d as f64 + gauss)
        };
        *d = match z {
            Some(z) if z >= near && z <= far => z as f32,
            _ => BACKGROUND,
        };
    }
}
