//! STFT power spectra, HTK mel filterbanks and normalized log-mel
//! spectrograms.
//!
//! Framing never centre-pads: frame `i` covers samples
//! `[i * hop, i * hop + win_length)`, so with `N` samples there are
//! `1 + (N - win_length) / hop` frames (integer division). A 2 s clip at
//! 16 kHz with the default 400/160 framing gives 198 frames. Frame `i` is
//! centred at `t0 + (i * hop + win_length / 2) / sample_rate`.
//!
//! The window is a periodic Hann of `win_length`, zero-padded symmetrically
//! to `n_fft` when shorter. Power is `|X|^2`, the log is natural with a floor
//! of `log_floor_eps`, and the mel filters are unnormalized HTK triangles
//! (peak 1.0).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::fft::{Complex64, FftPlan};
use crate::matrix::Matrix;
use crate::{Error, Result};

/// How log-mel values are mapped to `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Normalization {
    /// Each spectrogram's own min maps to -1 and max to +1.
    PerWindow,
    /// Fixed bounds (e.g. dataset statistics); values are clamped.
    Fixed { min: f64, max: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpecConfig {
    pub sample_rate_hz: u32,
    pub n_fft: usize,
    pub win_length: usize,
    pub hop_length: usize,
    pub n_mels: usize,
    pub log_floor_eps: f64,
    pub mel_fmin_hz: f64,
    pub mel_fmax_hz: f64,
    pub normalization: Normalization,
}

impl Default for SpecConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: 16_000,
            n_fft: 400,
            win_length: 400,
            hop_length: 160,
            n_mels: 64,
            log_floor_eps: 1e-10,
            mel_fmin_hz: 0.0,
            mel_fmax_hz: 8_000.0,
            normalization: Normalization::PerWindow,
        }
    }
}

impl SpecConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: alloc::string::String| Err(Error::InvalidConfig(msg));
        if self.sample_rate_hz == 0 {
            return bad("sample_rate_hz must be positive".into());
        }
        if self.n_fft == 0 || self.win_length == 0 || self.win_length > self.n_fft {
            return bad(format!("need 0 < win_length ({}) <= n_fft ({})", self.win_length, self.n_fft));
        }
        if self.hop_length == 0 {
            return bad("hop_length must be positive".into());
        }
        if self.n_mels == 0 {
            return bad("n_mels must be at least 1".into());
        }
        if !(self.log_floor_eps > 0.0) {
            return bad("log_floor_eps must be positive".into());
        }
        let nyquist = self.nyquist_hz();
        if !(self.mel_fmin_hz >= 0.0 && self.mel_fmin_hz < self.mel_fmax_hz && self.mel_fmax_hz <= nyquist) {
            return bad(format!(
                "need 0 <= fmin ({}) < fmax ({}) <= nyquist ({nyquist})",
                self.mel_fmin_hz, self.mel_fmax_hz
            ));
        }
        if let Normalization::Fixed { min, max } = self.normalization {
            if !(min < max) {
                return bad(format!("fixed normalization needs min < max, got [{min}, {max}]"));
            }
        }
        Ok(())
    }

    pub fn n_freqs(&self) -> usize {
        self.n_fft / 2 + 1
    }

    pub fn nyquist_hz(&self) -> f64 {
        self.sample_rate_hz as f64 / 2.0
    }

    pub fn bin_hz(&self) -> f64 {
        self.sample_rate_hz as f64 / self.n_fft as f64
    }

    pub fn hop_s(&self) -> f64 {
        self.hop_length as f64 / self.sample_rate_hz as f64
    }

    /// Frame count for `n` samples, `None` when shorter than one window.
    pub fn n_frames(&self, n: usize) -> Option<usize> {
        (n >= self.win_length).then(|| 1 + (n - self.win_length) / self.hop_length)
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * libm::log10(1.0 + hz / 700.0)
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (libm::pow(10.0, mel / 2595.0) - 1.0)
}

/// Centre frequencies of the `n_mels` filters.
pub fn mel_center_frequencies(cfg: &SpecConfig) -> Vec<f64> {
    let points = mel_points_hz(cfg);
    points[1..points.len() - 1].to_vec()
}

fn mel_points_hz(cfg: &SpecConfig) -> Vec<f64> {
    let (lo, hi) = (hz_to_mel(cfg.mel_fmin_hz), hz_to_mel(cfg.mel_fmax_hz));
    let n = cfg.n_mels + 2;
    (0..n).map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n - 1) as f64)).collect()
}

/// `n_mels x (n_fft/2 + 1)` triangular filters with peak 1.0 at each centre.
pub fn mel_filterbank(cfg: &SpecConfig) -> Result<Matrix> {
    cfg.validate()?;
    let n_freqs = cfg.n_freqs();
    let pts = mel_points_hz(cfg);
    let mut fb = Matrix::zeros(cfg.n_mels, n_freqs);
    for m in 0..cfg.n_mels {
        let (left, center, right) = (pts[m], pts[m + 1], pts[m + 2]);
        for k in 0..n_freqs {
            let f = k as f64 * cfg.bin_hz();
            let rising = (f - left) / (center - left);
            let falling = (right - f) / (right - center);
            fb.set(m, k, rising.min(falling).max(0.0));
        }
    }
    Ok(fb)
}

fn hann_padded(cfg: &SpecConfig) -> Vec<f64> {
    let mut w = vec![0.0; cfg.n_fft];
    let offset = (cfg.n_fft - cfg.win_length) / 2;
    for i in 0..cfg.win_length {
        w[offset + i] = 0.5 - 0.5 * libm::cos(2.0 * PI * i as f64 / cfg.win_length as f64);
    }
    w
}

/// Precomputed window, FFT plan and filterbank for one [`SpecConfig`].
/// Immutable after construction and shareable across threads.
#[derive(Debug, Clone)]
pub struct MelFrontend {
    cfg: SpecConfig,
    window: Vec<f64>,
    plan: FftPlan,
    filterbank: Matrix,
}

impl MelFrontend {
    pub fn new(cfg: SpecConfig) -> Result<Self> {
        let filterbank = mel_filterbank(&cfg)?;
        Ok(Self { window: hann_padded(&cfg), plan: FftPlan::new(cfg.n_fft), filterbank, cfg })
    }

    pub fn config(&self) -> &SpecConfig {
        &self.cfg
    }

    pub fn filterbank(&self) -> &Matrix {
        &self.filterbank
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    fn frame_count(&self, n: usize) -> Result<usize> {
        self.cfg.n_frames(n).ok_or(Error::TooShort { len: n, needed: self.cfg.win_length })
    }

    /// Complex STFT, one `n_fft/2 + 1` spectrum per frame.
    pub fn stft(&self, samples: &[f64]) -> Result<Vec<Vec<Complex64>>> {
        let n_frames = self.frame_count(samples.len())?;
        let n_fft = self.cfg.n_fft;
        let offset = (n_fft - self.cfg.win_length) / 2;
        let mut buf = vec![0.0; n_fft];
        Ok((0..n_frames)
            .map(|i| {
                let start = i * self.cfg.hop_length;
                // The window is zero outside [offset, offset + win_length), so
                // only that span of the frame needs real samples.
                buf.iter_mut().for_each(|b| *b = 0.0);
                for j in offset..offset + self.cfg.win_length {
                    buf[j] = samples[start + j - offset] * self.window[j];
                }
                self.plan.forward_real(&buf)
            })
            .collect())
    }

    /// `(n_fft/2 + 1) x n_frames` power spectrogram.
    pub fn stft_power(&self, samples: &[f64]) -> Result<Matrix> {
        let frames = self.stft(samples)?;
        let mut out = Matrix::zeros(self.cfg.n_freqs(), frames.len());
        for (t, spectrum) in frames.iter().enumerate() {
            for (k, c) in spectrum.iter().enumerate() {
                out.set(k, t, c.norm_sqr());
            }
        }
        Ok(out)
    }

    /// Least-squares overlap-add inverse of [`stft`](Self::stft): each output
    /// sample is divided by the summed squared window over the frames that
    /// cover it. Samples with no window support are zero.
    pub fn istft(&self, frames: &[Vec<Complex64>], len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        let mut weight = vec![0.0; len];
        let offset = (self.cfg.n_fft - self.cfg.win_length) / 2;
        for (i, spectrum) in frames.iter().enumerate() {
            let frame = self.plan.inverse_real(spectrum);
            let start = i * self.cfg.hop_length;
            let span = offset..offset + self.cfg.win_length;
            for (k, (x, w)) in frame[span.clone()].iter().zip(&self.window[span]).enumerate() {
                let n = start + k;
                if n >= len {
                    break;
                }
                out[n] += x * w;
                weight[n] += w * w;
            }
        }
        for (o, w) in out.iter_mut().zip(&weight) {
            *o = if *w > 1e-10 { *o / w } else { 0.0 };
        }
        out
    }

    /// Mel projection of a power spectrogram.
    pub fn project(&self, power: &Matrix) -> Result<Matrix> {
        if power.rows() != self.cfg.n_freqs() {
            return Err(Error::DimensionMismatch { expected: self.cfg.n_freqs(), found: power.rows() });
        }
        Ok(self.filterbank.matmul(power))
    }

    /// Natural log with the configured floor.
    pub fn log_compress(&self, mel: &Matrix) -> Matrix {
        let eps = self.cfg.log_floor_eps;
        mel.map(|v| libm::log(v.max(eps)))
    }

    pub fn log_mel(&self, samples: &[f64]) -> Result<Matrix> {
        let power = self.stft_power(samples)?;
        Ok(self.log_compress(&self.project(&power)?))
    }

    /// Log-mel spectrogram mapped to `[-1, 1]`; `t0_s` is the capture time of
    /// `samples[0]`.
    pub fn log_mel_normalized(&self, samples: &[f64], t0_s: f64) -> Result<Spectrogram> {
        let log_mel = self.log_mel(samples)?;
        Ok(self.finish(log_mel, t0_s))
    }

    /// Normalizes an already-projected mel power matrix (used when the linear
    /// spectrum was edited first, e.g. low-frequency masking).
    pub fn normalized_from_mel_power(&self, mel_power: &Matrix, t0_s: f64) -> Spectrogram {
        self.finish(self.log_compress(mel_power), t0_s)
    }

    fn finish(&self, log_mel: Matrix, t0_s: f64) -> Spectrogram {
        let values = normalize(&log_mel, self.cfg.normalization);
        let center = self.cfg.win_length as f64 / 2.0 / self.cfg.sample_rate_hz as f64;
        Spectrogram { values, config: self.cfg, t0_s: t0_s + center }
    }
}

/// Maps values to `[-1, 1]`. Under per-window normalization a spectrogram
/// whose range is below 1e-12 becomes all -1.
pub fn normalize(values: &Matrix, mode: Normalization) -> Matrix {
    let (lo, hi) = match mode {
        Normalization::PerWindow => match values.min_max() {
            Some(b) => b,
            None => return values.clone(),
        },
        Normalization::Fixed { min, max } => (min, max),
    };
    let range = hi - lo;
    if range < 1e-12 {
        return Matrix::filled(values.rows(), values.cols(), -1.0);
    }
    values.map(|v| if v == hi { 1.0 } else { (2.0 * (v - lo) / range - 1.0).clamp(-1.0, 1.0) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    /// `n_mels x n_frames`, row 0 is the lowest mel band.
    pub values: Matrix,
    pub config: SpecConfig,
    /// Capture time of the centre of frame 0.
    pub t0_s: f64,
}

impl Spectrogram {
    pub fn n_mels(&self) -> usize {
        self.values.rows()
    }

    pub fn n_frames(&self) -> usize {
        self.values.cols()
    }

    pub fn frame_time_s(&self, i: usize) -> f64 {
        self.t0_s + i as f64 * self.config.hop_s()
    }
}

pub fn stft_power(samples: &[f64], cfg: &SpecConfig) -> Result<Matrix> {
    MelFrontend::new(*cfg)?.stft_power(samples)
}

pub fn log_mel_normalize(samples: &[f64], cfg: &SpecConfig) -> Result<Spectrogram> {
    MelFrontend::new(*cfg)?.log_mel_normalized(samples, 0.0)
}
