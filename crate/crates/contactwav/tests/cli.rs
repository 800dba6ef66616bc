mod common;

use std::fs;
use std::path::Path;
use std::process::Command;

use contactwav::cli::run;
use contactwav::container::read_container_file;
use contactwav::dataset::{dataset_checksums, export_dataset, ExportConfig};
use contactwav::manifest::{load_manifest_dir, Manifest};
use contactwav::wav::{read_wav, write_wav_f32};
use contactwav_core::denoise::{reduce_noise, GateConfig};
use contactwav_core::mel::SpecConfig;
use serde_json::Value;
use tempfile::tempdir;

struct Outcome {
    code: i32,
    stdout: String,
    stderr: String,
}

impl Outcome {
    fn json(&self) -> Value {
        serde_json::from_str(&self.stdout).unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", self.stdout))
    }
}

fn cli(args: &[&str]) -> Outcome {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let argv = std::iter::once("contactwav").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    Outcome { code, stdout: String::from_utf8(out).unwrap(), stderr: String::from_utf8(err).unwrap() }
}

fn binary(args: &[&str]) -> Outcome {
    let out = Command::new(env!("CARGO_BIN_EXE_contactwav")).args(args).output().unwrap();
    Outcome {
        code: out.status.code().unwrap(),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn exit_codes() {
    let unknown = binary(&["export", "--frobnicate"]);
    assert_eq!(unknown.code, 1);
    assert!(unknown.stderr.contains("Usage"), "{}", unknown.stderr);
    assert!(unknown.stdout.is_empty());
    assert_eq!(binary(&[]).code, 1);
    assert_eq!(binary(&["calibrate", "--episode", "x.json"]).code, 1);
    assert_eq!(binary(&["export", "--manifest-dir", "d", "--out", "o", "--audio-window", "2", "--augment"]).code, 1);

    let help = binary(&["--help"]);
    assert_eq!(help.code, 0);
    for sub in ["calibrate", "preprocess", "augment", "denoise", "maskfreq", "export", "inspect"] {
        assert!(help.stdout.contains(sub), "help lists {sub}");
    }

    let missing = binary(&["denoise", "--in", "/nonexistent/x.wav", "--out", "/tmp/y.wav"]);
    assert_eq!(missing.code, 2);
    assert!(missing.stdout.is_empty());
    assert!(missing.stderr.contains("missing file"), "{}", missing.stderr);
}

#[test]
fn reproducibility_header_on_stderr() {
    let dir = tempdir().unwrap();
    let wav = dir.path().join("a.wav");
    write_wav_f32(&wav, &common::white_noise(16_000, 0.1, 1), 16_000).unwrap();
    let out = binary(&["--seed", "42", "--jobs", "1", "inspect", "--wav", s(&wav)]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let header: Value = serde_json::from_str(out.stderr.lines().next().unwrap()).unwrap();
    assert_eq!(header["tool"], "contactwav");
    assert_eq!(header["command"], "inspect");
    assert_eq!(header["seed"], 42);
    assert_eq!(header["jobs"], 1);
    assert_eq!(out.json()["n_mels"], 64);
}

#[test]
fn calibrate_nominal_numbers() {
    let dir = tempdir().unwrap();
    let manifest = common::write_episode(dir.path(), "ep", 2.0, 48_000);
    let taps = dir.path().join("taps.json");
    fs::write(&taps, r#"[{"frame_time_s": 0.0, "search_window_s": [0.0, 0.5], "onset_s": 0.06}]"#).unwrap();
    let out = cli(&["calibrate", "--episode", s(&manifest), "--taps", s(&taps), "--image-latency", "0.17"]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let v = out.json();
    assert_eq!(v["total_s"].as_f64().unwrap(), 0.23);
    assert_eq!(v["audio_vs_image_s"].as_f64().unwrap(), 0.06);
    assert_eq!(v["manifest_updated"], false);
    assert_eq!(Manifest::read(&manifest).unwrap().latency_s, 0.0);

    let out = cli(&["calibrate", "--episode", s(&manifest), "--taps", s(&taps), "--image-latency", "0.17", "--write"]);
    assert_eq!(out.code, 0);
    assert_eq!(Manifest::read(&manifest).unwrap().latency_s, 0.23);
}

#[test]
fn calibrate_detects_taps_in_audio() {
    let dir = tempdir().unwrap();
    let manifest_path = common::write_episode(dir.path(), "ep", 4.0, 48_000);
    let manifest = Manifest::read(&manifest_path).unwrap();
    let rate = 48_000.0;
    // Quiet noise with taps 0.06 s after each annotated frame.
    let mut audio = common::white_noise(4 * 48_000, 0.01, 9);
    let frames = [1.0, 2.0, 3.0];
    for f in frames {
        let start = ((f + 0.06) * rate) as usize;
        for (k, v) in audio[start..start + 2_400].iter_mut().enumerate() {
            *v += 0.8 * (-(k as f64) / 400.0).exp() * (k as f64 * 0.3).sin();
        }
    }
    write_wav_f32(&dir.path().join(&manifest.audio_wav), &audio, 48_000).unwrap();
    let taps: Vec<Value> =
        frames.iter().map(|f| serde_json::json!({"frame_time_s": f, "search_window_s": [f - 0.05, f + 0.4]})).collect();
    let taps_path = dir.path().join("taps.json");
    fs::write(&taps_path, serde_json::to_string(&taps).unwrap()).unwrap();
    let out = cli(&["calibrate", "--episode", s(&manifest_path), "--taps", s(&taps_path), "--image-latency", "0.17"]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let total = out.json()["total_s"].as_f64().unwrap();
    assert!((total - 0.23).abs() <= 0.01, "total {total}");
}

#[test]
fn preprocess_resamples_and_dumps_spectrogram() {
    let dir = tempdir().unwrap();
    let input = dir.path().join("in.wav");
    write_wav_f32(&input, &common::sine(96_000, 1_000.0, 48_000.0, 0.5), 48_000).unwrap();
    let (out_wav, spec) = (dir.path().join("out.wav"), dir.path().join("spec.cwav"));
    let out = cli(&["preprocess", "--in", s(&input), "--out", s(&out_wav), "--spectrogram", s(&spec)]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let v = out.json();
    assert_eq!(v["out_samples"], 32_000);
    assert_eq!(v["spectrogram_dims"], serde_json::json!([64, 198]));
    let track = read_wav(&out_wav, 0.0).unwrap();
    assert_eq!((track.len(), track.sample_rate_hz), (32_000, 16_000));
    let tensors = read_container_file(&spec).unwrap();
    assert_eq!(tensors[0].dims, [64, 198]);
}

#[test]
fn augment_is_seeded() {
    let dir = tempdir().unwrap();
    let (bg, robot) = common::write_corpora(dir.path());
    let input = dir.path().join("in.wav");
    write_wav_f32(&input, &common::sine(16_000, 440.0, 16_000.0, 0.3), 16_000).unwrap();
    let run_with = |seed: &str, name: &str| {
        let path = dir.path().join(name);
        let out = cli(&[
            "--seed",
            seed,
            "augment",
            "--in",
            s(&input),
            "--out",
            s(&path),
            "--bg-noise",
            s(&bg),
            "--robot-noise",
            s(&robot),
            "--p-background",
            "1",
            "--p-robot",
            "1",
        ]);
        assert_eq!(out.code, 0, "{}", out.stderr);
        (out.json(), fs::read(path).unwrap())
    };
    let (rec_a, bytes_a) = run_with("3", "a.wav");
    let (rec_b, bytes_b) = run_with("3", "b.wav");
    let (rec_c, bytes_c) = run_with("4", "c.wav");
    assert_eq!(rec_a, rec_b);
    assert_eq!(bytes_a, bytes_b);
    assert_ne!(bytes_a, bytes_c);
    assert_ne!(rec_a, rec_c);
    assert_eq!(rec_a["applied_background"], true);
    assert_eq!(rec_a["applied_robot"], true);
}

#[test]
fn denoise_matches_library() {
    let dir = tempdir().unwrap();
    let input = dir.path().join("in.wav");
    let x: Vec<f64> = common::white_noise(24_000, 0.2, 2).iter().map(|&v| v as f32 as f64).collect();
    write_wav_f32(&input, &x, 16_000).unwrap();
    let output = dir.path().join("out.wav");
    let out = cli(&["denoise", "--in", s(&input), "--out", s(&output), "--time-constant", "1.0", "--n-std", "2.0"]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let gate = GateConfig { time_constant_s: 1.0, n_std_thresh: 2.0, ..GateConfig::default() };
    let want = reduce_noise(&x, &SpecConfig::default(), &gate).unwrap();
    let got = read_wav(&output, 0.0).unwrap().samples;
    assert_eq!(got.len(), x.len());
    assert!(got.iter().zip(&want).all(|(a, b)| *a == *b as f32 as f64));
}

#[test]
fn maskfreq_reports_13_bins() {
    let dir = tempdir().unwrap();
    let input = dir.path().join("in.wav");
    write_wav_f32(&input, &common::white_noise(32_000, 0.2, 3), 16_000).unwrap();
    let output = dir.path().join("masked.cwav");
    let out = cli(&["maskfreq", "--in", s(&input), "--out", s(&output), "--cutoff-hz", "500"]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let v = out.json();
    assert_eq!(v["masked_bins"], 13);
    assert_eq!(v["dims"], serde_json::json!([64, 198]));
    assert_eq!(read_container_file(&output).unwrap()[0].dims, [64, 198]);
}

#[test]
fn export_matches_library_and_inspect_reads_it() {
    let dir = tempdir().unwrap();
    let manifests = dir.path().join("manifests");
    fs::create_dir(&manifests).unwrap();
    common::write_episode(&manifests, "ep", 1.5, 48_000);
    let out_dir = dir.path().join("cli_out");
    let out =
        cli(&["--seed", "7", "export", "--manifest-dir", s(&manifests), "--out", s(&out_dir), "--audio-window", "1.0"]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let v = out.json();
    assert_eq!(v["windows"], 14);

    let lib_dir = dir.path().join("lib_out");
    let index =
        export_dataset(&load_manifest_dir(&manifests).unwrap(), &ExportConfig::new(1.0, 7), None, &lib_dir).unwrap();
    for (name, sum) in dataset_checksums(&lib_dir, &index).unwrap() {
        assert_eq!(v["sha256"][&name], sum, "{name}");
    }

    let (csv, pgm) = (dir.path().join("w.csv"), dir.path().join("w.pgm"));
    let out = cli(&["inspect", "--dataset", s(&out_dir), "--window", "3", "--csv", s(&csv), "--pgm", s(&pgm)]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let v = out.json();
    assert_eq!(v["window_index"], 3);
    assert_eq!((v["n_mels"].as_u64(), v["n_frames"].as_u64()), (Some(64), Some(98)));
    assert_eq!((v["min"].as_f64(), v["max"].as_f64()), (Some(-1.0), Some(1.0)));
    let csv_text = fs::read_to_string(&csv).unwrap();
    assert_eq!(csv_text.lines().count(), 64);
    assert!(csv_text.lines().all(|l| l.split(',').count() == 98));
    let pgm_bytes = fs::read(&pgm).unwrap();
    let header = b"P5\n98 64\n255\n";
    assert_eq!(&pgm_bytes[..header.len()], header);
    assert_eq!(pgm_bytes.len(), header.len() + 64 * 98);

    assert_eq!(cli(&["inspect", "--dataset", s(&out_dir), "--window", "99"]).code, 2);
}
