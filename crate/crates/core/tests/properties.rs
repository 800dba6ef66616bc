//! Cross-module invariants as property tests.

use contactwav_core::augment::{augment_audio, replay, AugmentSpec, NoiseCorpus};
use contactwav_core::denoise::{gate_mask, GateConfig};
use contactwav_core::episode::{AudioTrack, Episode, FrameIndex, FrameRef, PoseSample};
use contactwav_core::mel::{log_mel_normalize, MelFrontend, SpecConfig};
use contactwav_core::rotation::Quat;
use contactwav_core::Matrix;
use proptest::prelude::*;

fn signal(seed: u64, n: usize) -> Vec<f64> {
    let mut s = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) | 1;
    (0..n)
        .map(|i| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5 + 0.3 * (i as f64 * 0.07).sin()
        })
        .collect()
}

fn episode(latency_s: f64) -> Episode {
    let audio = AudioTrack::new(vec![0.1; 16_000 * 5], 16_000, 0.0).unwrap();
    let frames = FrameIndex::new(
        vec![0.0, 5.0],
        vec![FrameRef { path: "a".into(), index: 0 }, FrameRef { path: "b".into(), index: 0 }],
    )
    .unwrap();
    let poses = (0..100)
        .map(|i| PoseSample {
            t_s: i as f64 * 0.05,
            position_m: [0.0; 3],
            orientation: Quat::from_wxyz([1.0, 0.0, 0.0, 0.0]),
            gripper_width: 0.5,
        })
        .collect();
    Episode::new("e".into(), audio, frames, poses, "lab".into(), latency_s).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn normalized_log_mel_is_scale_invariant(seed in any::<u64>(), alpha in 1e-3f64..1e3) {
        let cfg = SpecConfig::default();
        let x = signal(seed, 8_000);
        let y: Vec<f64> = x.iter().map(|v| v * alpha).collect();
        let a = log_mel_normalize(&x, &cfg).unwrap();
        let b = log_mel_normalize(&y, &cfg).unwrap();
        for (p, q) in a.values.as_slice().iter().zip(b.values.as_slice()) {
            prop_assert!((p - q).abs() < 1e-9);
        }
    }

    #[test]
    fn log_mel_shifts_by_twice_log_alpha(seed in any::<u64>(), alpha in 1e-2f64..1e2) {
        let front = MelFrontend::new(SpecConfig::default()).unwrap();
        let x = signal(seed, 4_000);
        let y: Vec<f64> = x.iter().map(|v| v * alpha).collect();
        let (a, b) = (front.log_mel(&x).unwrap(), front.log_mel(&y).unwrap());
        for (p, q) in a.as_slice().iter().zip(b.as_slice()) {
            prop_assert!((q - p - 2.0 * alpha.ln()).abs() < 1e-6);
        }
    }

    #[test]
    fn segment_length_is_rounded_duration(t_end in 0.0f64..4.7, dur in 0.01f64..3.0, latency in 0.0f64..0.3) {
        let ep = episode(latency);
        let seg = ep.audio_segment(t_end, dur).unwrap();
        prop_assert_eq!(seg.len(), (dur * 16_000.0).round() as usize);
    }

    #[test]
    fn raising_threshold_never_opens_gate(seed in any::<u64>(), k in 0.0f64..3.0, dk in 0.0f64..2.0) {
        let mag = Matrix::from_vec(21, 60, signal(seed, 21 * 60).iter().map(|v| v.abs()).collect());
        let lo = gate_mask(&mag, &GateConfig { n_std_thresh: k, ..GateConfig::default() }, 0.01);
        let hi = gate_mask(&mag, &GateConfig { n_std_thresh: k + dk, ..GateConfig::default() }, 0.01);
        for (a, b) in lo.as_slice().iter().zip(hi.as_slice()) {
            prop_assert!(b <= a);
            prop_assert!((0.0..=1.0).contains(a));
        }
    }

    #[test]
    fn augmentation_replays_and_bounds_noise(seed in any::<u64>(), len in 50usize..3_000) {
        let clip = |s: u64, n: usize| AudioTrack::new(signal(s, n), 16_000, 0.0).unwrap();
        let bg = NoiseCorpus::new("bg", vec![clip(1, 700), clip(2, 5_000)]).unwrap();
        let robot = NoiseCorpus::new("robot", vec![clip(3, 333)]).unwrap();
        let clean = signal(seed ^ 5, len);
        let spec = AugmentSpec::with_seed(seed);
        let (noisy, record) = augment_audio(&clean, &bg, &robot, &spec).unwrap();
        prop_assert_eq!(&replay(&clean, &bg, &robot, &record).unwrap(), &noisy);
        let rms = |x: &[f64]| (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
        let added: Vec<f64> = noisy.iter().zip(&clean).map(|(a, b)| a - b).collect();
        let n = usize::from(record.applied_background) + usize::from(record.applied_robot);
        prop_assert!(rms(&added) <= n as f64 * rms(&clean) + 1e-9);
    }
}
