//! Test-time noise handling: low-frequency row masking and non-stationary
//! spectral gating.
//!
//! Spectral gating, per frequency row of the magnitude STFT:
//!
//! 1. smooth the row forward and backward with a one-pole IIR whose time
//!    constant is `time_constant_s`; the result is the running noise floor;
//! 2. take the residual `|X| - floor` and its mean `mu_f` and standard
//!    deviation `sigma_f` over the clip (or a rolling window);
//! 3. open the gate where the residual exceeds `mu_f + n_std_thresh * sigma_f`;
//! 4. smooth the binary gate with a separable triangular kernel, clamp to
//!    `[gate_floor, 1]`, multiply onto the complex STFT and invert with
//!    least-squares overlap-add.
//!
//! Components that are stationary over `time_constant_s` become part of the
//! floor and are removed along with the noise.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::fft::Complex64;
use crate::matrix::Matrix;
use crate::mel::{MelFrontend, SpecConfig};
use crate::{Error, Result};

/// Where the per-frequency threshold statistics come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ThresholdStats {
    WholeClip,
    /// Centred window of this many frames (odd).
    Rolling {
        frames: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateConfig {
    pub time_constant_s: f64,
    pub n_std_thresh: f64,
    pub mask_smooth_freq_bins: usize,
    pub mask_smooth_time_frames: usize,
    pub gate_floor: f64,
    pub stats: ThresholdStats,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self {
            time_constant_s: 2.0,
            n_std_thresh: 1.5,
            mask_smooth_freq_bins: 3,
            mask_smooth_time_frames: 5,
            gate_floor: 0.0,
            stats: ThresholdStats::WholeClip,
        }
    }
}

impl GateConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.time_constant_s > 0.0) {
            return Err(Error::InvalidConfig(format!("time_constant_s {} must be positive", self.time_constant_s)));
        }
        for (name, n) in [
            ("mask_smooth_freq_bins", self.mask_smooth_freq_bins),
            ("mask_smooth_time_frames", self.mask_smooth_time_frames),
        ] {
            if n == 0 || n % 2 == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be odd and >= 1, got {n}")));
            }
        }
        if !(0.0..=1.0).contains(&self.gate_floor) {
            return Err(Error::InvalidConfig(format!("gate_floor {} outside [0, 1]", self.gate_floor)));
        }
        if let ThresholdStats::Rolling { frames } = self.stats {
            if frames == 0 || frames % 2 == 0 {
                return Err(Error::InvalidConfig(format!("rolling window must be odd, got {frames}")));
            }
        }
        Ok(())
    }
}

/// Zeroes every row whose bin centre `k * sr / n_fft` lies below `cutoff_hz`.
/// A cutoff at or above Nyquist zeroes everything.
pub fn mask_below_freq(spec: &Matrix, cfg: &SpecConfig, cutoff_hz: f64) -> Result<Matrix> {
    if spec.rows() != cfg.n_freqs() {
        return Err(Error::DimensionMismatch { expected: cfg.n_freqs(), found: spec.rows() });
    }
    let mut out = spec.clone();
    let all = cutoff_hz >= cfg.nyquist_hz();
    for k in 0..spec.rows() {
        if all || (k as f64) * cfg.bin_hz() < cutoff_hz {
            out.row_mut(k).iter_mut().for_each(|v| *v = 0.0);
        }
    }
    Ok(out)
}

/// Number of rows [`mask_below_freq`] zeroes.
pub fn masked_bin_count(cfg: &SpecConfig, cutoff_hz: f64) -> usize {
    if cutoff_hz >= cfg.nyquist_hz() {
        return cfg.n_freqs();
    }
    (0..cfg.n_freqs()).filter(|&k| (k as f64) * cfg.bin_hz() < cutoff_hz).count()
}

/// Zero-phase one-pole smoothing along each row (time axis):
/// `y[t] = a y[t-1] + (1 - a) x[t]` with `a = exp(-hop_s / time_constant_s)`,
/// run forward then backward, each pass seeded with its first input.
pub fn smooth_iir_bidirectional(spec: &Matrix, cfg: &GateConfig, hop_s: f64) -> Matrix {
    let a = libm::exp(-hop_s / cfg.time_constant_s);
    let mut out = spec.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        if row.is_empty() {
            continue;
        }
        for t in 1..row.len() {
            row[t] = a * row[t - 1] + (1.0 - a) * row[t];
        }
        for t in (0..row.len() - 1).rev() {
            row[t] = a * row[t + 1] + (1.0 - a) * row[t];
        }
    }
    out
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, libm::sqrt(var))
}

/// Binary gate (before smoothing) for a magnitude spectrogram.
pub fn binary_gate(magnitude: &Matrix, gate: &GateConfig, hop_s: f64) -> Matrix {
    let floor = smooth_iir_bidirectional(magnitude, gate, hop_s);
    let (rows, cols) = magnitude.shape();
    let mut out = Matrix::zeros(rows, cols);
    let mut residual = vec![0.0; cols];
    for f in 0..rows {
        for (t, r) in residual.iter_mut().enumerate() {
            *r = magnitude.get(f, t) - floor.get(f, t);
        }
        match gate.stats {
            ThresholdStats::WholeClip => {
                let (mu, sigma) = mean_std(&residual);
                let theta = mu + gate.n_std_thresh * sigma;
                for (t, &r) in residual.iter().enumerate() {
                    out.set(f, t, if r > theta { 1.0 } else { 0.0 });
                }
            }
            ThresholdStats::Rolling { frames } => {
                let half = frames / 2;
                for t in 0..cols {
                    let lo = t.saturating_sub(half);
                    let hi = (t + half + 1).min(cols);
                    let (mu, sigma) = mean_std(&residual[lo..hi]);
                    let theta = mu + gate.n_std_thresh * sigma;
                    out.set(f, t, if residual[t] > theta { 1.0 } else { 0.0 });
                }
            }
        }
    }
    out
}

fn triangular_kernel(n: usize) -> Vec<f64> {
    let k: Vec<f64> = (0..n).map(|i| (i + 1).min(n - i) as f64).collect();
    let sum: f64 = k.iter().sum();
    k.into_iter().map(|v| v / sum).collect()
}

/// Separable triangular smoothing with zero padding ("same" size output).
fn smooth_separable(m: &Matrix, freq: usize, time: usize) -> Matrix {
    let kf = triangular_kernel(freq);
    let kt = triangular_kernel(time);
    let (rows, cols) = m.shape();
    let (hf, ht) = (freq / 2, time / 2);
    let mut tmp = Matrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            let mut acc = 0.0;
            for (j, w) in kt.iter().enumerate() {
                let cc = c as isize + j as isize - ht as isize;
                if (0..cols as isize).contains(&cc) {
                    acc += w * m.get(r, cc as usize);
                }
            }
            tmp.set(r, c, acc);
        }
    }
    let mut out = Matrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            let mut acc = 0.0;
            for (i, w) in kf.iter().enumerate() {
                let rr = r as isize + i as isize - hf as isize;
                if (0..rows as isize).contains(&rr) {
                    acc += w * tmp.get(rr as usize, c);
                }
            }
            out.set(r, c, acc);
        }
    }
    out
}

/// Smoothed gate in `[gate_floor, 1]` for a magnitude spectrogram.
pub fn gate_mask(magnitude: &Matrix, gate: &GateConfig, hop_s: f64) -> Matrix {
    let binary = binary_gate(magnitude, gate, hop_s);
    smooth_separable(&binary, gate.mask_smooth_freq_bins, gate.mask_smooth_time_frames)
        .map(|v| v.clamp(gate.gate_floor, 1.0))
}

fn frames_to_magnitude(frames: &[Vec<Complex64>], n_freqs: usize) -> Matrix {
    let mut m = Matrix::zeros(n_freqs, frames.len());
    for (t, spectrum) in frames.iter().enumerate() {
        for (k, c) in spectrum.iter().enumerate() {
            m.set(k, t, c.norm());
        }
    }
    m
}

/// STFT, multiply by the mask computed from the magnitude, inverse STFT.
///
/// The signal is zero-padded by `n_fft` on both sides (and up to a whole hop
/// at the end) so every input sample has full window support; the output is
/// trimmed back to the input length.
pub fn reconstruct_with_mask(
    samples: &[f64],
    cfg: &SpecConfig,
    mask_fn: impl FnOnce(&Matrix) -> Matrix,
) -> Result<Vec<f64>> {
    if samples.len() < cfg.win_length {
        return Err(Error::TooShort { len: samples.len(), needed: cfg.win_length });
    }
    let front = MelFrontend::new(*cfg)?;
    let pad = cfg.n_fft;
    let body = samples.len() + 2 * pad;
    let tail = (cfg.hop_length - (body - cfg.win_length) % cfg.hop_length) % cfg.hop_length;
    let mut padded = vec![0.0; pad];
    padded.extend_from_slice(samples);
    padded.resize(body + tail, 0.0);

    let mut frames = front.stft(&padded)?;
    let magnitude = frames_to_magnitude(&frames, cfg.n_freqs());
    let mask = mask_fn(&magnitude);
    if mask.shape() != magnitude.shape() {
        return Err(Error::DimensionMismatch { expected: magnitude.rows(), found: mask.rows() });
    }
    for (t, spectrum) in frames.iter_mut().enumerate() {
        for (k, c) in spectrum.iter_mut().enumerate() {
            *c *= mask.get(k, t);
        }
    }
    let full = front.istft(&frames, padded.len());
    Ok(full[pad..pad + samples.len()].to_vec())
}

/// Non-stationary spectral gating. Deterministic; output length equals
/// input length.
pub fn reduce_noise(samples: &[f64], cfg: &SpecConfig, gate: &GateConfig) -> Result<Vec<f64>> {
    gate.validate()?;
    let hop_s = cfg.hop_s();
    reconstruct_with_mask(samples, cfg, |mag| gate_mask(mag, gate, hop_s))
}
