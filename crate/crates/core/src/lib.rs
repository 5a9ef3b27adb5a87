pub mod activity;
pub mod beamform;
pub mod diarize;
pub mod dsp;
pub mod error;
pub mod evaluate;
pub mod geometry;
pub mod gss;
pub mod metrics;
pub mod scene;
pub mod stft;
pub mod sync;
pub mod tdoa;
pub mod parallel;
pub mod pipeline;
pub mod rttm;

pub use activity::ActivityMatrix;
pub use error::{Error, Result};
