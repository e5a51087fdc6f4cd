//! Gapped-spectrum multi-target range estimation.
//!
//! An OFDM ISAC echo sampled on `N` subcarriers is a sum of complex
//! exponentials in the subcarrier index: a target at range `r` with complex
//! reflectivity `b` contributes `b * exp(-j 2 pi n df 2 r / c)`. Each target is
//! therefore a pole on the unit circle whose phase encodes delay. When part of
//! the band is unavailable the missing subcarriers are blanked; the all-pole
//! estimator recovers them by alternating between fitting the pole model to
//! the current samples and re-synthesizing the blank band from that model.

mod allpole;
mod baselines;
mod crlb;
mod detection;
mod experiment;
pub(crate) mod linalg;
mod metrics;
mod waveform;

pub use allpole::{
    estimate_all_pole, ranges_from_poles, recover_blank_band, AllPoleEstimate, BlankRecovery,
    RecoverySettings, POLE_MAGNITUDE_CAP,
};
pub use baselines::{fft_range_baseline, omp_range_baseline};
pub use crlb::range_crlb;
pub use detection::{
    detect_targets, detection_threshold, range_periodogram, Detection, DETECTION_OVERSAMPLE,
};
pub use experiment::{
    run_sensing_experiment, summarize, ArmseSummary, SensingMethod, SensingRecord,
    SensingSettings,
};
pub use metrics::{armse, armse_over_trials, matched_errors, optimal_assignment};
pub use waveform::{
    apply_mask, synthesize_echo, FrequencySnapshot, GapPosition, RangeProfile, SpectrumMask,
    Target, TargetSet, WaveformConfig, SPEED_OF_LIGHT,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SensingError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("target range {range:.3} m outside (0, {unambiguous:.3}) m")]
    RangeOutOfBounds { range: f64, unambiguous: f64 },
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("signal rank {achieved} below model order {model_order}")]
    DegenerateSignal { achieved: usize, model_order: usize },
    #[error("fisher information matrix is singular; configuration not identifiable")]
    Unidentifiable,
}

pub type Result<T> = std::result::Result<T, SensingError>;
