//! Postprocessing and scoring of predicted pulse signals.

mod filter;
mod metrics;
mod spectrum;

pub use filter::{
    butterworth_bandpass, design_bandpass, filtfilt, lfilter, lfilter_zi, FilterCoeffs, FilterConfig,
};
pub use metrics::{compute_metrics, Metric, MetricsReport};
pub use spectrum::{estimate_hr_fft, magnitude_spectrum, HrEstimate, HrOptions, Window};
