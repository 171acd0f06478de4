//! JSON run configuration for scripted pipelines and sweeps.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RemixConfig;
use crate::error::{Error, Result};
use crate::forward::{NoiseSpec, ProbeProfile, ProbeSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProbeProfileKind {
    #[default]
    TopHat,
    GaussianEdge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub size: usize,
    pub diameter: f64,
    #[serde(default)]
    pub profile: ProbeProfileKind,
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default = "one")]
    pub amplitude: f64,
}

impl ProbeConfig {
    pub fn spec(&self) -> Result<ProbeSpec> {
        let profile = match (self.profile, self.sigma) {
            (ProbeProfileKind::TopHat, None) => ProbeProfile::TopHat,
            (ProbeProfileKind::TopHat, Some(_)) => {
                return Err(Error::Config("sigma only applies to the gaussian_edge profile".into()))
            }
            (ProbeProfileKind::GaussianEdge, Some(sigma)) => ProbeProfile::GaussianEdge { sigma },
            (ProbeProfileKind::GaussianEdge, None) => {
                return Err(Error::Config("gaussian_edge profile requires sigma".into()))
            }
        };
        let spec = ProbeSpec { size: self.size, diameter: self.diameter, profile, amplitude: self.amplitude };
        spec.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub photon_scale: f64,
    #[serde(default)]
    pub seed: u64,
}

impl From<NoiseConfig> for NoiseSpec {
    fn from(n: NoiseConfig) -> Self {
        NoiseSpec { photon_scale: n.photon_scale, seed: n.seed }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MaskKind {
    #[default]
    Full,
    /// Pixels illuminated by the real scan.
    Coverage,
}

fn one() -> f64 {
    1.0
}

/// Everything needed to simulate a scan from a ground truth and refine an
/// external initial estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Ground truth object (complex PTA) or grayscale image (real PTA).
    pub truth: PathBuf,
    /// Initial estimate (complex PTA).
    pub init: PathBuf,
    pub probe: ProbeConfig,
    /// Real scan step in pixels.
    pub step: usize,
    #[serde(default = "one")]
    pub phase_max: f64,
    #[serde(default)]
    pub noise: Option<NoiseConfig>,
    #[serde(default)]
    pub remix: RemixConfig,
    #[serde(default)]
    pub mask: MaskKind,
    /// Directory for per-run reconstructions, if any.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid run config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_json(&text)?;
        // Relative paths are resolved against the config file's directory.
        if let Some(base) = path.parent() {
            cfg.truth = base.join(&cfg.truth);
            cfg.init = base.join(&cfg.init);
            cfg.output_dir = cfg.output_dir.map(|d| base.join(d));
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.probe.spec()?;
        if self.step == 0 {
            return Err(Error::Config("step must be >= 1".into()));
        }
        if !(self.phase_max.is_finite() && self.phase_max > 0.0) {
            return Err(Error::Config("phase_max must be positive".into()));
        }
        if let Some(n) = self.noise {
            if !(n.photon_scale.is_finite() && n.photon_scale > 0.0) {
                return Err(Error::Config("noise.photon_scale must be positive".into()));
            }
        }
        self.remix.validate()?;
        if !self.step.is_multiple_of(self.remix.oversample) {
            return Err(Error::Config(format!(
                "step {} is not divisible by oversample {}",
                self.step, self.remix.oversample
            )));
        }
        Ok(())
    }
}
