//! Synthetic episodes and noise corpora written to disk.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use contactwav::manifest::{FrameEntry, Manifest, PoseEntry};
use contactwav::wav::{write_wav_f32, write_wav_i16};
use contactwav_core::rotation::Quat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const POSE_RATE_HZ: f64 = 20.0;
pub const FRAME_RATE_HZ: f64 = 60.0;
pub const N_IMAGES: usize = 8;

pub fn white_noise(n: usize, amplitude: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-amplitude..amplitude)).collect()
}

pub fn sine(n: usize, freq_hz: f64, rate_hz: f64, amplitude: f64) -> Vec<f64> {
    (0..n).map(|i| amplitude * (2.0 * PI * freq_hz * i as f64 / rate_hz).sin()).collect()
}

/// Smooth colour gradient, distinct per `k`.
pub fn write_png(path: &Path, width: u32, height: u32, k: usize) {
    let img = image::RgbImage::from_fn(width, height, |x, y| {
        let r = (x * 255 / width.max(1)) as u8;
        let g = (y * 255 / height.max(1)) as u8;
        let b = ((k * 37) % 256) as u8;
        image::Rgb([r, g, b])
    });
    img.save(path).unwrap();
}

pub fn pose_at(t: f64) -> PoseEntry {
    let axis: [f64; 3] = [1.0, 0.5, 0.2];
    let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let q = Quat::from_axis_angle([axis[0] / n, axis[1] / n, axis[2] / n], 0.4 * t + 0.3 * (1.3 * t).sin());
    PoseEntry {
        t_s: t,
        pos: [0.1 * t.sin(), 0.02 * t, 0.3 + 0.05 * (0.7 * t).cos()],
        quat_wxyz: q.to_wxyz(),
        gripper: 0.5 + 0.5 * (0.9 * t).sin(),
    }
}

/// Writes `<dir>/<id>.json` plus its audio and frames, all starting at
/// capture time 0: audio at `audio_rate` Hz (16-bit PCM), frames at 60 Hz
/// cycling through a few PNGs, poses at 20 Hz.
pub fn write_episode(dir: &Path, id: &str, duration_s: f64, audio_rate: u32) -> PathBuf {
    let data = dir.join(format!("{id}_data"));
    fs::create_dir_all(data.join("frames")).unwrap();
    let n_audio = (duration_s * audio_rate as f64).round() as usize;
    let tone = sine(n_audio, 440.0, audio_rate as f64, 0.2);
    let noise = white_noise(n_audio, 0.05, id.len() as u64);
    let audio: Vec<f64> = tone.iter().zip(&noise).map(|(a, b)| a + b).collect();
    write_wav_i16(&data.join("audio.wav"), &audio, audio_rate).unwrap();
    for k in 0..N_IMAGES {
        let path = data.join(format!("frames/{k}.png"));
        if !path.exists() {
            write_png(&path, 80, 64, k);
        }
    }
    let n_frames = (duration_s * FRAME_RATE_HZ).round() as usize;
    let n_poses = (duration_s * POSE_RATE_HZ).round() as usize;
    let manifest = Manifest {
        id: id.into(),
        audio_wav: format!("{id}_data/audio.wav"),
        audio_start_s: 0.0,
        frames: (0..n_frames)
            .map(|i| FrameEntry {
                t_s: i as f64 / FRAME_RATE_HZ,
                image: format!("{id}_data/frames/{}.png", i % N_IMAGES),
            })
            .collect(),
        poses: (0..n_poses).map(|i| pose_at(i as f64 / POSE_RATE_HZ)).collect(),
        environment: "synthetic".into(),
        latency_s: 0.0,
    };
    let path = dir.join(format!("{id}.json"));
    manifest.save(&path).unwrap();
    path
}

/// Background corpus (two 16 kHz clips) and robot corpus (one 48 kHz clip)
/// under `dir`; returns their directories.
pub fn write_corpora(dir: &Path) -> (PathBuf, PathBuf) {
    let bg = dir.join("background");
    let robot = dir.join("robot");
    fs::create_dir_all(&bg).unwrap();
    fs::create_dir_all(&robot).unwrap();
    write_wav_f32(&bg.join("a.wav"), &white_noise(8_000, 0.3, 1), 16_000).unwrap();
    write_wav_f32(&bg.join("b.wav"), &sine(12_000, 3_000.0, 16_000.0, 0.4), 16_000).unwrap();
    let hum: Vec<f64> = sine(14_400, 120.0, 48_000.0, 0.5)
        .iter()
        .zip(sine(14_400, 2_400.0, 48_000.0, 0.1))
        .map(|(a, b)| a + b)
        .collect();
    write_wav_f32(&robot.join("motor.wav"), &hum, 48_000).unwrap();
    (bg, robot)
}
