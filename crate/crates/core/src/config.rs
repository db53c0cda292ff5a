//! Full detector configuration, serializable as JSON.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::descriptor::DescriptorConfig;
use crate::error::{Error, Result};
use crate::harris::HarrisConfig;
use crate::orient::DEFAULT_ORIENTATION_RADIUS;
use crate::ransac::ModelKind;
use crate::scalespace::PyramidConfig;

/// Matching threshold: one value shared by all four descriptor blocks, or
/// one per block.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Epsilon {
    Shared(f64),
    PerBlock([f64; 4]),
}

impl Epsilon {
    pub fn per_block(&self) -> [f64; 4] {
        match *self {
            Epsilon::Shared(e) => [e; 4],
            Epsilon::PerBlock(v) => v,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatcherConfig {
    pub epsilon: Epsilon,
    /// Minimum original-image distance between the two points of a pair.
    pub d_min: f64,
    pub model: ModelKind,
    pub iterations: usize,
    /// RANSAC inlier tolerance in pixels.
    pub tolerance: f64,
    /// Inlier count at which an image is declared forged.
    pub tau_match: usize,
}

impl Default for MatcherConfig {
    fn default() -> Self {
        MatcherConfig {
            epsilon: Epsilon::Shared(0.3),
            d_min: 10.0,
            model: ModelKind::Similarity,
            iterations: 2000,
            tolerance: 3.0,
            tau_match: 4,
        }
    }
}

impl MatcherConfig {
    pub fn validate(&self) -> Result<()> {
        if self
            .epsilon
            .per_block()
            .iter()
            .any(|e| !(*e > 0.0 && e.is_finite()))
        {
            return Err(Error::param("epsilon must be > 0"));
        }
        if !(self.d_min >= 0.0 && self.d_min.is_finite()) {
            return Err(Error::param("d_min must be >= 0"));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::param("RANSAC tolerance must be > 0"));
        }
        if self.iterations == 0 {
            return Err(Error::param("RANSAC needs at least one iteration"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub pyramid: PyramidConfig,
    pub harris: HarrisConfig,
    /// Half-size of the orientation histogram window.
    pub orientation_radius: usize,
    pub descriptor: DescriptorConfig,
    pub matcher: MatcherConfig,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            pyramid: PyramidConfig::default(),
            harris: HarrisConfig::default(),
            orientation_radius: DEFAULT_ORIENTATION_RADIUS,
            descriptor: DescriptorConfig::default(),
            matcher: MatcherConfig::default(),
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.pyramid.validate()?;
        self.harris.validate()?;
        self.descriptor.validate()?;
        self.matcher.validate()?;
        if self.orientation_radius == 0 || self.orientation_radius > crate::harris::BORDER_MARGIN {
            return Err(Error::param("orientation radius must be in 1..=8"));
        }
        Ok(())
    }

    /// Parses a JSON config; missing fields take their defaults.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_published_parameters() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.pyramid.octaves, 4);
        assert_eq!(cfg.pyramid.intervals, 4);
        assert_eq!(cfg.pyramid.sampling_factor, 1.25);
        assert_eq!(cfg.harris.t_cr_fraction, 0.02);
        assert_eq!(cfg.harris.k, 0.05);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn partial_json_fills_defaults() {
        let cfg =
            RunConfig::from_json(r#"{"matcher": {"epsilon": 0.2, "model": "affine"}, "seed": 9}"#)
                .unwrap();
        assert_eq!(cfg.matcher.epsilon, Epsilon::Shared(0.2));
        assert_eq!(cfg.matcher.model, ModelKind::Affine);
        assert_eq!(cfg.matcher.tau_match, 4);
        assert_eq!(cfg.seed, 9);
        let per =
            RunConfig::from_json(r#"{"matcher": {"epsilon": [0.1, 0.2, 0.3, 0.4]}}"#).unwrap();
        assert_eq!(per.matcher.epsilon.per_block(), [0.1, 0.2, 0.3, 0.4]);
    }

    #[test]
    fn round_trip() {
        let cfg = RunConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), cfg);
    }

    #[test]
    fn rejects_invalid() {
        assert!(RunConfig::from_json(r#"{"pyramid": {"sampling_factor": 0.5}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"matcher": {"epsilon": -1}}"#).is_err());
        assert!(RunConfig::from_json("[1, 2").is_err());
    }
}
