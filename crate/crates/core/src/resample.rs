//! Rational-ratio polyphase resampling with a Kaiser-windowed sinc kernel.
//!
//! For a reduced ratio `up / down`, output sample `k` sits at input position
//! `k * down / up`, i.e. at capture time `start + k / dst_rate`. The kernel is
//! centred on that position (no group delay to undo) and the signal is
//! zero-extended on both sides, so timing is exact at the edges too.
//!
//! `filter_taps_per_phase` counts taps per polyphase branch of the decimator:
//! the kernel spans `taps * ceil(down / up)` input samples. For 48 kHz to
//! 16 kHz that is 3 x 64 = 192 taps, which puts every tone above 8 kHz more
//! than 90 dB down with the default beta and cutoff.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::episode::AudioTrack;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResampleSpec {
    pub src_rate_hz: u32,
    pub dst_rate_hz: u32,
    pub filter_taps_per_phase: usize,
    pub kaiser_beta: f64,
    /// Passband edge as a fraction of the lower of the two Nyquist rates.
    pub cutoff_fraction: f64,
}

impl ResampleSpec {
    pub fn new(src_rate_hz: u32, dst_rate_hz: u32) -> Self {
        Self { src_rate_hz, dst_rate_hz, filter_taps_per_phase: 64, kaiser_beta: 8.6, cutoff_fraction: 0.9 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.src_rate_hz == 0 || self.dst_rate_hz == 0 {
            return Err(Error::InvalidSpec("sample rates must be positive".into()));
        }
        if self.filter_taps_per_phase < 2 || self.filter_taps_per_phase % 2 != 0 {
            return Err(Error::InvalidSpec(format!(
                "filter_taps_per_phase must be even and >= 2, got {}",
                self.filter_taps_per_phase
            )));
        }
        if !(self.cutoff_fraction > 0.0 && self.cutoff_fraction <= 1.0) {
            return Err(Error::InvalidSpec(format!("cutoff_fraction {} outside (0, 1]", self.cutoff_fraction)));
        }
        if !(self.kaiser_beta >= 0.0 && self.kaiser_beta.is_finite()) {
            return Err(Error::InvalidSpec(format!("kaiser_beta {} must be finite and >= 0", self.kaiser_beta)));
        }
        Ok(())
    }

    /// `(up, down)` with the common factor removed.
    pub fn reduced_ratio(&self) -> (usize, usize) {
        let g = gcd(self.src_rate_hz as u64, self.dst_rate_hz as u64);
        ((self.dst_rate_hz as u64 / g) as usize, (self.src_rate_hz as u64 / g) as usize)
    }

    /// Output length for `n` input samples: the number of output instants
    /// `k / dst` that fall inside the input span, `ceil(n * up / down)`.
    pub fn output_len(&self, n: usize) -> usize {
        let (up, down) = self.reduced_ratio();
        (n * up).div_ceil(down)
    }
}

/// Precomputed filter bank for one [`ResampleSpec`]. Immutable, so a single
/// instance can be shared by all workers.
#[derive(Debug, Clone)]
pub struct Resampler {
    spec: ResampleSpec,
    up: usize,
    down: usize,
    half_width: isize,
    // phases[p][j]: weight of input sample n0 + j - half_width + 1 for an
    // output at fractional position n0 + p / up.
    phases: Vec<Vec<f64>>,
}

impl Resampler {
    pub fn new(spec: ResampleSpec) -> Result<Self> {
        spec.validate()?;
        let (up, down) = spec.reduced_ratio();
        let width = spec.filter_taps_per_phase * down.div_ceil(up).max(1);
        let half = width as f64 / 2.0;
        let nyquist = spec.src_rate_hz.min(spec.dst_rate_hz) as f64 / 2.0;
        // cycles per input sample
        let fc = spec.cutoff_fraction * nyquist / spec.src_rate_hz as f64;
        let i0_beta = bessel_i0(spec.kaiser_beta);

        let phases = (0..up)
            .map(|p| {
                let frac = p as f64 / up as f64;
                let mut taps: Vec<f64> = (0..width)
                    .map(|j| {
                        let d = (j as isize - width as isize / 2 + 1) as f64 - frac;
                        let r = d / half;
                        let window = if r.abs() >= 1.0 {
                            0.0
                        } else {
                            bessel_i0(spec.kaiser_beta * libm::sqrt(1.0 - r * r)) / i0_beta
                        };
                        2.0 * fc * sinc(2.0 * fc * d) * window
                    })
                    .collect();
                let sum: f64 = taps.iter().sum();
                taps.iter_mut().for_each(|t| *t /= sum);
                taps
            })
            .collect();
        Ok(Self { spec, up, down, half_width: width as isize / 2, phases })
    }

    pub fn spec(&self) -> &ResampleSpec {
        &self.spec
    }

    pub fn process(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.is_empty() {
            return Err(Error::EmptyInput);
        }
        let n_in = input.len() as isize;
        let n_out = self.spec.output_len(input.len());
        let mut out = Vec::with_capacity(n_out);
        for k in 0..n_out {
            let pos = k * self.down;
            let n0 = (pos / self.up) as isize;
            let taps = &self.phases[pos % self.up];
            let first = n0 - self.half_width + 1;
            let lo = (-first).max(0) as usize;
            let hi = ((n_in - first).min(taps.len() as isize)).max(0) as usize;
            let mut acc = 0.0;
            if lo < hi {
                let src = &input[(first + lo as isize) as usize..(first + hi as isize) as usize];
                for (x, w) in src.iter().zip(&taps[lo..hi]) {
                    acc += x * w;
                }
            }
            out.push(acc);
        }
        Ok(out)
    }

    pub fn process_track(&self, track: &AudioTrack) -> Result<AudioTrack> {
        if track.sample_rate_hz != self.spec.src_rate_hz {
            return Err(Error::InvalidSpec(format!(
                "track is {} Hz but resampler expects {} Hz",
                track.sample_rate_hz, self.spec.src_rate_hz
            )));
        }
        Ok(AudioTrack {
            samples: self.process(&track.samples)?,
            sample_rate_hz: self.spec.dst_rate_hz,
            start_time_s: track.start_time_s,
        })
    }
}

/// One-shot convenience; build a [`Resampler`] to reuse the filter bank.
pub fn resample(track: &AudioTrack, spec: ResampleSpec) -> Result<AudioTrack> {
    if track.is_empty() {
        return Err(Error::EmptyInput);
    }
    Resampler::new(spec)?.process_track(track)
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = PI * x;
        libm::sin(px) / px
    }
}

/// Modified Bessel function of the first kind, order zero (power series).
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > sum * 1e-17 {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}
