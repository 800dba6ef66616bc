//! Clapperboard-style latency calibration.
//!
//! The operator taps the contact microphone on camera. For each tap the
//! annotated contact frame time is paired with the audio onset detected
//! near it; the median onset-minus-frame offset is the audio lag relative
//! to the images. Adding the (externally calibrated) image latency gives the
//! total audio latency stored on the episode.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::episode::{AudioTrack, Episode};
use crate::{Error, Result};

pub const ENERGY_FRAME_S: f64 = 0.005;
pub const NOISE_CONTEXT_S: f64 = 0.100;
pub const DEFAULT_K_SIGMA: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TapAnnotation {
    /// Capture time of the first frame showing contact.
    pub frame_time_s: f64,
    /// Capture-clock interval searched for the audio onset.
    pub search_window_s: (f64, f64),
}

impl TapAnnotation {
    pub fn validate(&self) -> Result<()> {
        let (start, end) = self.search_window_s;
        if !(end > start) || !(start..=end).contains(&self.frame_time_s) {
            return Err(Error::InvalidConfig(alloc::format!(
                "tap window [{start}, {end}] must be nonempty and contain the frame time {}",
                self.frame_time_s
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyEstimate {
    pub audio_vs_image_s: f64,
    pub image_latency_s: f64,
    pub total_s: f64,
}

/// Mean-square energy frames of `frame` samples every `hop` samples, starting
/// at `start`, for frames that end at or before `end`.
fn energies(samples: &[f64], start: usize, end: usize, frame: usize, hop: usize) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    let mut s = start;
    while s + frame <= end {
        let e = samples[s..s + frame].iter().map(|v| v * v).sum::<f64>() / frame as f64;
        out.push((s, e));
        s += hop;
    }
    out
}

/// First energy-frame start in `window` (sample indices, end exclusive)
/// whose energy exceeds `mu + k_sigma * sigma` of the 100 ms before it.
///
/// Energy frames are 5 ms long with 50 % overlap.
pub fn detect_onset(samples: &[f64], sample_rate: u32, window: (usize, usize), k_sigma: f64) -> Result<usize> {
    let (start, end) = window;
    if start >= end || end > samples.len() || sample_rate == 0 {
        return Err(Error::InvalidConfig(alloc::format!(
            "onset window [{start}, {end}) invalid for {} samples",
            samples.len()
        )));
    }
    let rate = sample_rate as f64;
    let frame = (libm::round(ENERGY_FRAME_S * rate) as usize).max(2);
    let hop = frame / 2;
    let context = libm::round(NOISE_CONTEXT_S * rate) as usize;
    if start < context {
        return Err(Error::InsufficientContext { available: start, needed: context });
    }
    let floor = energies(samples, start - context, start, frame, hop);
    if floor.is_empty() {
        return Err(Error::InsufficientContext { available: start, needed: frame });
    }
    let n = floor.len() as f64;
    let mu = floor.iter().map(|(_, e)| e).sum::<f64>() / n;
    let sigma = libm::sqrt(floor.iter().map(|(_, e)| (e - mu) * (e - mu)).sum::<f64>() / n);
    let threshold = mu + k_sigma * sigma;
    energies(samples, start, end, frame, hop)
        .into_iter()
        .find(|&(_, e)| e > threshold)
        .map(|(s, _)| s)
        .ok_or(Error::NoOnset)
}

/// Onset capture time for one tap, searching the tap's window on `audio`'s
/// raw capture clock.
pub fn detect_tap_onset(audio: &AudioTrack, tap: &TapAnnotation, k_sigma: f64) -> Result<f64> {
    tap.validate()?;
    let rate = audio.sample_rate_hz as f64;
    let to_index = |t: f64| libm::round((t - audio.start_time_s) * rate).clamp(0.0, audio.len() as f64) as usize;
    let window = (to_index(tap.search_window_s.0), to_index(tap.search_window_s.1));
    let idx = detect_onset(&audio.samples, audio.sample_rate_hz, window, k_sigma)?;
    Ok(audio.start_time_s + idx as f64 / rate)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Median over taps of `onset_time - frame_time`, plus the image latency.
pub fn calibrate_latency(taps: &[(TapAnnotation, f64)], image_latency_s: f64) -> Result<LatencyEstimate> {
    if taps.is_empty() {
        return Err(Error::NoTaps);
    }
    let mut offsets: Vec<f64> = taps.iter().map(|(tap, onset)| onset - tap.frame_time_s).collect();
    let audio_vs_image_s = median(&mut offsets);
    Ok(LatencyEstimate { audio_vs_image_s, image_latency_s, total_s: image_latency_s + audio_vs_image_s })
}

/// Sets (never accumulates) the episode's audio latency.
pub fn apply_latency(episode: &Episode, est: &LatencyEstimate) -> Episode {
    Episode { latency_s: est.total_s, ..episode.clone() }
}
