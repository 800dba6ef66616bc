//! Spectral front end and resampler checked against independent references.

use std::f64::consts::PI;

use contactwav_core::mel::{mel_filterbank, stft_power, MelFrontend, SpecConfig};
use contactwav_core::resample::{ResampleSpec, Resampler};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_signal(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// O(N^2) power spectrogram with the same framing: frame i starts at i*hop,
/// periodic Hann, no centring.
fn naive_power(x: &[f64], n_fft: usize, hop: usize) -> Vec<Vec<f64>> {
    let frames = 1 + (x.len() - n_fft) / hop;
    (0..frames)
        .map(|i| {
            (0..=n_fft / 2)
                .map(|k| {
                    let (mut re, mut im) = (0.0, 0.0);
                    for n in 0..n_fft {
                        let w = 0.5 - 0.5 * (2.0 * PI * n as f64 / n_fft as f64).cos();
                        let phase = -2.0 * PI * (k * n) as f64 / n_fft as f64;
                        re += w * x[i * hop + n] * phase.cos();
                        im += w * x[i * hop + n] * phase.sin();
                    }
                    re * re + im * im
                })
                .collect()
        })
        .collect()
}

#[test]
fn stft_matches_naive_dft() {
    let cfg = SpecConfig::default();
    for seed in 0..3 {
        let x = random_signal(1024, seed);
        let fast = stft_power(&x, &cfg).unwrap();
        let slow = naive_power(&x, 400, 160);
        assert_eq!(fast.shape(), (201, slow.len()));
        let mut err: f64 = 0.0;
        for (t, frame) in slow.iter().enumerate() {
            for (k, &p) in frame.iter().enumerate() {
                err = err.max((fast.get(k, t) - p).abs());
            }
        }
        assert!(err < 1e-6, "max abs error {err}");
    }
}

fn htk_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn htk_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

#[test]
fn filterbank_matches_closed_form_triangles() {
    let cfg = SpecConfig::default();
    let fb = mel_filterbank(&cfg).unwrap();
    let top = htk_mel(8_000.0);
    let edge = |i: usize| htk_hz(top * i as f64 / 65.0);
    for m in 0..64 {
        let (l, c, r) = (edge(m), edge(m + 1), edge(m + 2));
        for k in 0..201 {
            let f = 40.0 * k as f64;
            let want = if f <= l || f >= r {
                0.0
            } else if f <= c {
                (f - l) / (c - l)
            } else {
                (r - f) / (r - c)
            };
            assert!((fb.get(m, k) - want).abs() < 1e-12, "filter {m} bin {k}");
        }
    }
}

#[test]
fn tone_peaks_in_nearest_mel_filter() {
    let cfg = SpecConfig::default();
    let top = htk_mel(8_000.0);
    for freq in [440.0, 1_000.0, 2_500.0, 6_000.0] {
        let x: Vec<f64> = (0..32_000).map(|i| (2.0 * PI * freq * i as f64 / 16_000.0).sin()).collect();
        let mel = MelFrontend::new(cfg).unwrap().log_mel(&x).unwrap();
        let energy: Vec<f64> = (0..64).map(|m| mel.row(m).iter().sum()).collect();
        let argmax = (0..64).max_by(|&a, &b| energy[a].total_cmp(&energy[b])).unwrap();
        let nearest = (0..64)
            .min_by(|&a, &b| {
                let da = (htk_hz(top * (a + 1) as f64 / 65.0) - freq).abs();
                let db = (htk_hz(top * (b + 1) as f64 / 65.0) - freq).abs();
                da.total_cmp(&db)
            })
            .unwrap();
        assert!(argmax.abs_diff(nearest) <= 1, "{freq} Hz: argmax {argmax}, nearest centre {nearest}");
    }
}

fn tone(n: usize, freq: f64, rate: f64) -> Vec<f64> {
    (0..n).map(|i| (2.0 * PI * freq * i as f64 / rate).sin()).collect()
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
    dot(a, b) / (dot(a, a) * dot(b, b)).sqrt()
}

#[test]
fn resampled_sine_matches_analytic() {
    for (src, dst) in [(48_000u32, 16_000u32), (44_100, 16_000), (16_000, 48_000)] {
        let r = Resampler::new(ResampleSpec::new(src, dst)).unwrap();
        let out = r.process(&tone(src as usize, 1_000.0, src as f64)).unwrap();
        assert_eq!(out.len(), dst as usize);
        let reference = tone(dst as usize, 1_000.0, dst as f64);
        let c = correlation(&out, &reference);
        assert!(c > 0.999, "{src}->{dst}: correlation {c}");
    }
}

#[test]
fn stopband_attenuation() {
    let r = Resampler::new(ResampleSpec::new(48_000, 16_000)).unwrap();
    for freq in [8_800.0, 9_000.0, 12_000.0, 20_000.0] {
        let x = tone(48_000, freq, 48_000.0);
        let out = r.process(&x).unwrap();
        // Skip the edges, where the truncated tone is a broadband step.
        let interior = &out[200..out.len() - 200];
        let rms_out = (interior.iter().map(|v| v * v).sum::<f64>() / interior.len() as f64).sqrt();
        let db = 20.0 * (rms_out / (0.5f64).sqrt()).log10();
        assert!(db <= -60.0, "{freq} Hz only {db:.1} dB down");
    }
}

#[test]
fn passband_gain_is_flat() {
    let r = Resampler::new(ResampleSpec::new(48_000, 16_000)).unwrap();
    for freq in [100.0, 1_000.0, 4_000.0, 6_500.0] {
        let out = r.process(&tone(48_000, freq, 48_000.0)).unwrap();
        let interior = &out[200..out.len() - 200];
        let rms = (interior.iter().map(|v| v * v).sum::<f64>() / interior.len() as f64).sqrt();
        let db = 20.0 * (rms / (0.5f64).sqrt()).log10();
        assert!(db.abs() < 0.05, "{freq} Hz gain {db:.3} dB");
    }
}
