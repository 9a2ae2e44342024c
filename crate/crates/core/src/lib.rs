//! Interferometric radar angular-velocity toolkit: scene geometry, baseband
//! synthesis, STFT processing, the multi-target line model, response
//! decomposition, estimation and a model-fit baseline.

// `!(x > 0.0)` is used on purpose to reject NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod decomp;
pub mod dsp;
pub mod error;
pub mod estimate;
pub mod io;
pub mod model;
pub mod modelfit;
pub mod pipeline;
pub mod scenario;
pub mod scene;
pub mod synth;

pub use decomp::{DecomposedResponse, DetectionWindow, FrameAssociation};
pub use dsp::{StftConfig, TimeFrequencyMap};
pub use error::{Error, Result};
pub use estimate::{EstimateSeries, EstimateStats};
pub use scenario::Scenario;
pub use scene::{ArrayGeometry, TargetTrajectory};
pub use synth::{AntennaPattern, IqCapture, WaveformConfig};
