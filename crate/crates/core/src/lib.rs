//! Signal-processing and encoding core for contact-microphone manipulation
//! demonstrations.
//!
//! Everything in this crate is a pure function of its inputs: no file system,
//! no clocks, no global state. Randomness is always drawn from an explicitly
//! seeded ChaCha stream so results are reproducible across machines and
//! across any number of parallel workers. The companion `contactwav` crate
//! adds WAV/JSON ingestion, the binary tensor container and the CLI.
//!
//! Module map:
//!
//! * [`episode`]: demonstration data model and time-indexed track access
//! * [`rotation`]: quaternion / rotation matrix / 6D conversions
//! * [`resample`]: polyphase Kaiser-windowed sinc resampling
//! * [`mel`]: STFT, HTK mel filterbank, normalized log-mel spectrograms
//! * [`augment`] and [`image`]: seeded noise overlay and image jitter
//! * [`denoise`]: low-frequency masking and non-stationary spectral gating
//! * [`latency`]: tap-based audio latency calibration
//! * [`window`]: observation windows and 16-step action horizons

#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod augment;
pub mod denoise;
pub mod episode;
mod error;
pub mod fft;
pub mod image;
pub mod latency;
pub mod matrix;
pub mod mel;
pub mod resample;
pub mod rotation;
pub mod seed;
pub mod window;

pub use error::{Error, Result};
pub use matrix::Matrix;

pub(crate) fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    libm::sqrt(x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64)
}
