//! Run parameters for the remix pipeline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Order in which ePIE visits diffraction records within a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EpieOrder {
    /// Stack order, every sweep.
    Raster,
    /// Fresh seeded permutation each sweep.
    #[default]
    RandomShuffle,
}

/// Parameters of the oversample-and-splice refinement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RemixConfig {
    /// Scan step divisor used to build the dense simulated grid.
    pub oversample: usize,
    /// Relative down-weighting of simulated records.
    pub weight: f64,
    /// Factor applied to `weight` after each outer round.
    pub w_decay: f64,
    pub outer_iters: usize,
    /// ePIE sweeps per outer round.
    pub epie_sweeps: usize,
    pub epie_order: EpieOrder,
    pub seed: u64,
    pub zero_guard: f64,
    pub alpha_base: f64,
    /// Relative per-sweep object change below which ePIE stops early; 0 disables.
    pub stop_tol: f64,
}

impl Default for RemixConfig {
    fn default() -> Self {
        Self {
            oversample: 3,
            weight: 20.0,
            w_decay: 1.0,
            outer_iters: 1,
            epie_sweeps: 2000,
            epie_order: EpieOrder::RandomShuffle,
            seed: 0,
            zero_guard: 1e-12,
            alpha_base: 1.0,
            stop_tol: 0.0,
        }
    }
}

impl RemixConfig {
    pub fn validate(&self) -> Result<()> {
        if self.oversample < 1 {
            return Err(Error::Config("oversample must be >= 1".into()));
        }
        if !(self.weight.is_finite() && self.weight > 0.0) {
            return Err(Error::Config(format!("weight must be positive, got {}", self.weight)));
        }
        if !(self.w_decay > 0.0 && self.w_decay <= 1.0) {
            return Err(Error::Config(format!("w_decay must lie in (0, 1], got {}", self.w_decay)));
        }
        if self.outer_iters < 1 {
            return Err(Error::Config("outer_iters must be >= 1".into()));
        }
        if self.epie_sweeps < 1 {
            return Err(Error::Config("epie_sweeps must be >= 1".into()));
        }
        if !(self.zero_guard.is_finite() && self.zero_guard > 0.0) {
            return Err(Error::Config("zero_guard must be positive".into()));
        }
        if !(self.alpha_base.is_finite() && self.alpha_base > 0.0) {
            return Err(Error::Config("alpha_base must be positive".into()));
        }
        if !(self.stop_tol.is_finite() && self.stop_tol >= 0.0) {
            return Err(Error::Config("stop_tol must be >= 0".into()));
        }
        Ok(())
    }

    /// Step sizes for real and simulated records at weight `w`.
    ///
    /// Real records get `alpha_base` and simulated ones `alpha_base / w`. For
    /// `w < 1` both are scaled by `w` so neither step exceeds `alpha_base`;
    /// the real/simulated ratio stays `w` either way.
    pub fn step_sizes(&self, weight: f64) -> (f64, f64) {
        let scale = weight.min(1.0);
        (self.alpha_base * scale, self.alpha_base * scale / weight)
    }
}
