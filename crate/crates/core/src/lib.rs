//! Copy-move forgery detection with scaled Harris feature descriptors.
//!
//! The pipeline runs a Gaussian pyramid ([`scalespace`]), Harris corners on
//! every pyramid level ([`harris`]), a dominant gradient orientation per
//! corner ([`orient`]), a 93-dimensional composite descriptor
//! ([`descriptor`]) and finally thresholded matching plus RANSAC
//! ([`matcher`]). [`eval`] turns per-image verdicts into TPR/FPR and ROC
//! curves, including the blur/noise/JPEG robustness grid.

pub mod config;
pub mod descriptor;
pub mod error;
pub mod eval;
pub mod harris;
pub mod imgio;
pub mod matcher;
pub mod orient;
pub mod overlay;
pub mod plane;
pub mod ransac;
pub mod scalespace;
pub mod synth;

pub use config::{Epsilon, MatcherConfig, RunConfig};
pub use descriptor::{Descriptor, DescriptorConfig};
pub use error::{Error, Result};
pub use harris::{HarrisConfig, Keypoint};
pub use matcher::{detect, DetectionReport, MatchPair, Verdict};
pub use plane::{GrayImage, Plane};
pub use ransac::{ModelKind, TransformModel};
pub use scalespace::{Pyramid, PyramidConfig};
