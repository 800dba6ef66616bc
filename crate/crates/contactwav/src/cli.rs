//! `contactwav` command line.
//!
//! Results go to stdout as JSON; the reproducibility header, logs and errors
//! go to stderr. Exit status is 0 on success, 1 on usage errors and 2 on
//! data errors.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use contactwav_core::augment::{augment_audio, AugmentSpec};
use contactwav_core::denoise::{mask_below_freq, masked_bin_count, reduce_noise, GateConfig};
use contactwav_core::episode::AudioTrack;
use contactwav_core::latency::{calibrate_latency, detect_tap_onset, TapAnnotation, DEFAULT_K_SIGMA};
use contactwav_core::matrix::Matrix;
use contactwav_core::mel::{MelFrontend, SpecConfig};
use contactwav_core::resample::{ResampleSpec, Resampler};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::container::{write_container_file, Tensor};
use crate::corpus::load_corpus;
use crate::dataset::{dataset_checksums, export_dataset, DatasetReader, ExportConfig};
use crate::error::{Error, Result};
use crate::manifest::{load_episode, load_manifest_dir, Manifest};
use crate::wav::{read_wav, write_wav_f32};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "contactwav", version, about = "Contact-microphone demonstration preprocessing")]
pub struct Cli {
    /// Master seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Parallel episode workers (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    /// Log filter for stderr (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "warn")]
    pub log_level: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate audio latency from annotated taps.
    Calibrate(CalibrateArgs),
    /// Resample a recording and optionally dump its log-mel spectrogram.
    Preprocess(PreprocessArgs),
    /// Overlay background and robot noise on a recording.
    Augment(AugmentArgs),
    /// Spectral-gating noise reduction.
    Denoise(DenoiseArgs),
    /// Log-mel spectrogram with STFT bins below a cutoff removed.
    Maskfreq(MaskfreqArgs),
    /// Export training windows for every manifest in a directory.
    Export(ExportArgs),
    /// Summarize a spectrogram and dump it as CSV and/or PGM.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub episode: PathBuf,
    /// JSON list of `{frame_time_s, search_window_s: [start, end], onset_s?}`.
    #[arg(long)]
    pub taps: PathBuf,
    #[arg(long)]
    pub image_latency: f64,
    #[arg(long, default_value_t = DEFAULT_K_SIGMA)]
    pub k_sigma: f64,
    /// Store the estimate in the manifest's `latency_s`.
    #[arg(long)]
    pub write: bool,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 16_000)]
    pub rate: u32,
    #[arg(long, default_value_t = 64)]
    pub taps_per_phase: usize,
    /// Also write the normalized log-mel of the whole clip as a CWAV tensor.
    #[arg(long)]
    pub spectrogram: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub bg_noise: PathBuf,
    #[arg(long)]
    pub robot_noise: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub p_background: f64,
    #[arg(long, default_value_t = 0.5)]
    pub p_robot: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gain: f64,
}

#[derive(Debug, Args)]
pub struct DenoiseArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    pub time_constant: f64,
    #[arg(long, default_value_t = 1.5)]
    pub n_std: f64,
    #[arg(long, default_value_t = 3)]
    pub freq_smooth: usize,
    #[arg(long, default_value_t = 5)]
    pub time_smooth: usize,
    #[arg(long, default_value_t = 0.0)]
    pub gate_floor: f64,
}

#[derive(Debug, Args)]
pub struct MaskfreqArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// CWAV file receiving the masked, normalized log-mel `[n_mels, n_frames]`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 500.0)]
    pub cutoff_hz: f64,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub manifest_dir: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Seconds of audio per observation (2 or 3 in practice).
    #[arg(long)]
    pub audio_window: f64,
    #[arg(long, requires_all = ["bg_noise", "robot_noise"])]
    pub augment: bool,
    #[arg(long)]
    pub bg_noise: Option<PathBuf>,
    #[arg(long)]
    pub robot_noise: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    pub horizon: usize,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["dataset", "wav"]))]
pub struct InspectArgs {
    /// Exported dataset directory.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Window number within the dataset index.
    #[arg(long, default_value_t = 0, requires = "dataset")]
    pub window: usize,
    /// A WAV file; its whole-clip log-mel is inspected.
    #[arg(long)]
    pub wav: Option<PathBuf>,
    /// CSV dump: one row per mel bin (low to high), one column per frame.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// 8-bit PGM dump, highest mel bin on top.
    #[arg(long)]
    pub pgm: Option<PathBuf>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Calibrate(_) => "calibrate",
            Command::Preprocess(_) => "preprocess",
            Command::Augment(_) => "augment",
            Command::Denoise(_) => "denoise",
            Command::Maskfreq(_) => "maskfreq",
            Command::Export(_) => "export",
            Command::Inspect(_) => "inspect",
        }
    }
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if code == EXIT_OK {
                stdout.write_all(rendered.as_bytes())
            } else {
                stderr.write_all(rendered.as_bytes())
            };
            return code;
        }
    };
    let header = json!({
        "tool": "contactwav",
        "version": env!("CARGO_PKG_VERSION"),
        "command": cli.command.name(),
        "seed": cli.seed,
        "jobs": cli.jobs,
        "argv": argv.iter().map(|a| a.to_string_lossy()).collect::<Vec<_>>(),
    });
    let _ = writeln!(stderr, "{header}");
    match execute(&cli) {
        Ok(result) => {
            let _ = writeln!(stdout, "{}", serde_json::to_string_pretty(&result).expect("json value serializes"));
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_DATA
        }
    }
}

/// Runs a parsed command and returns its JSON result.
pub fn execute(cli: &Cli) -> Result<serde_json::Value> {
    match &cli.command {
        Command::Calibrate(a) => calibrate(a),
        Command::Preprocess(a) => preprocess(a),
        Command::Augment(a) => augment(a, cli.seed),
        Command::Denoise(a) => denoise(a),
        Command::Maskfreq(a) => maskfreq(a),
        Command::Export(a) => export(a, cli.seed, cli.jobs),
        Command::Inspect(a) => inspect(a),
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct TapEntry {
    frame_time_s: f64,
    search_window_s: (f64, f64),
    /// Pre-measured onset; detected from the recording when absent.
    #[serde(default)]
    onset_s: Option<f64>,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::from(e).context(path.display().to_string()))
}

fn calibrate(a: &CalibrateArgs) -> Result<serde_json::Value> {
    let episode = load_episode(&a.episode)?;
    let entries: Vec<TapEntry> = read_json(&a.taps)?;
    let mut pairs = Vec::with_capacity(entries.len());
    for e in &entries {
        let tap = TapAnnotation { frame_time_s: e.frame_time_s, search_window_s: e.search_window_s };
        tap.validate()?;
        let onset = match e.onset_s {
            Some(t) => t,
            None => detect_tap_onset(&episode.audio, &tap, a.k_sigma)
                .map_err(|err| Error::from(err).context(format!("tap at {} s", e.frame_time_s)))?,
        };
        pairs.push((tap, onset));
    }
    let est = calibrate_latency(&pairs, a.image_latency)?;
    if a.write {
        let mut manifest = Manifest::read(&a.episode)?;
        manifest.latency_s = est.total_s;
        manifest.save(&a.episode)?;
    }
    Ok(json!({
        "audio_vs_image_s": est.audio_vs_image_s,
        "image_latency_s": est.image_latency_s,
        "total_s": est.total_s,
        "taps": pairs.iter().map(|(t, onset)| json!({
            "frame_time_s": t.frame_time_s,
            "onset_s": onset,
            "offset_s": onset - t.frame_time_s,
        })).collect::<Vec<_>>(),
        "manifest_updated": a.write,
    }))
}

fn to_rate(track: AudioTrack, rate: u32, taps_per_phase: usize) -> Result<AudioTrack> {
    if track.sample_rate_hz == rate {
        return Ok(track);
    }
    let spec = ResampleSpec { filter_taps_per_phase: taps_per_phase, ..ResampleSpec::new(track.sample_rate_hz, rate) };
    Ok(Resampler::new(spec)?.process_track(&track)?)
}

fn spectrogram_tensor(values: &Matrix) -> Tensor {
    Tensor { dims: vec![values.rows(), values.cols()], data: values.as_slice().iter().map(|&v| v as f32).collect() }
}

fn preprocess(a: &PreprocessArgs) -> Result<serde_json::Value> {
    let input = read_wav(&a.input, 0.0)?;
    let in_rate = input.sample_rate_hz;
    let in_len = input.len();
    let out = to_rate(input, a.rate, a.taps_per_phase)?;
    write_wav_f32(&a.out, &out.samples, out.sample_rate_hz)?;
    let mut result = json!({
        "in_rate_hz": in_rate,
        "in_samples": in_len,
        "out_rate_hz": out.sample_rate_hz,
        "out_samples": out.len(),
    });
    if let Some(path) = &a.spectrogram {
        let cfg = SpecConfig { sample_rate_hz: a.rate, ..SpecConfig::default() };
        let spec = MelFrontend::new(cfg)?.log_mel_normalized(&out.samples, 0.0)?;
        write_container_file(path, &[spectrogram_tensor(&spec.values)])?;
        result["spectrogram_dims"] = json!([spec.n_mels(), spec.n_frames()]);
    }
    Ok(result)
}

fn augment(a: &AugmentArgs, seed: u64) -> Result<serde_json::Value> {
    let rate = SpecConfig::default().sample_rate_hz;
    let clean = to_rate(read_wav(&a.input, 0.0)?, rate, 64)?;
    let background = load_corpus(&a.bg_noise, rate)?;
    let robot = load_corpus(&a.robot_noise, rate)?;
    let spec =
        AugmentSpec { p_background: a.p_background, p_robot: a.p_robot, gain: a.gain, ..AugmentSpec::with_seed(seed) };
    let (noisy, record) = augment_audio(&clean.samples, &background, &robot, &spec)?;
    write_wav_f32(&a.out, &noisy, rate)?;
    Ok(serde_json::to_value(record)?)
}

fn spec_for_rate(rate: u32) -> SpecConfig {
    let d = SpecConfig::default();
    SpecConfig { sample_rate_hz: rate, mel_fmax_hz: d.mel_fmax_hz.min(rate as f64 / 2.0), ..d }
}

fn denoise(a: &DenoiseArgs) -> Result<serde_json::Value> {
    let input = read_wav(&a.input, 0.0)?;
    let gate = GateConfig {
        time_constant_s: a.time_constant,
        n_std_thresh: a.n_std,
        mask_smooth_freq_bins: a.freq_smooth,
        mask_smooth_time_frames: a.time_smooth,
        gate_floor: a.gate_floor,
        ..GateConfig::default()
    };
    let out = reduce_noise(&input.samples, &spec_for_rate(input.sample_rate_hz), &gate)?;
    write_wav_f32(&a.out, &out, input.sample_rate_hz)?;
    let rms = |x: &[f64]| (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt();
    Ok(json!({
        "sample_rate_hz": input.sample_rate_hz,
        "samples": out.len(),
        "in_rms": rms(&input.samples),
        "out_rms": rms(&out),
        "gate": gate,
    }))
}

fn maskfreq(a: &MaskfreqArgs) -> Result<serde_json::Value> {
    let cfg = SpecConfig::default();
    let audio = to_rate(read_wav(&a.input, 0.0)?, cfg.sample_rate_hz, 64)?;
    let frontend = MelFrontend::new(cfg)?;
    let power = mask_below_freq(&frontend.stft_power(&audio.samples)?, &cfg, a.cutoff_hz)?;
    let spec = frontend.normalized_from_mel_power(&frontend.project(&power)?, 0.0);
    write_container_file(&a.out, &[spectrogram_tensor(&spec.values)])?;
    Ok(json!({
        "cutoff_hz": a.cutoff_hz,
        "masked_bins": masked_bin_count(&cfg, a.cutoff_hz),
        "n_freqs": cfg.n_freqs(),
        "dims": [spec.n_mels(), spec.n_frames()],
    }))
}

fn export(a: &ExportArgs, seed: u64, jobs: usize) -> Result<serde_json::Value> {
    let episodes = load_manifest_dir(&a.manifest_dir)?;
    let mut cfg = ExportConfig::new(a.audio_window, seed);
    cfg.window.action_horizon = a.horizon;
    cfg.jobs = jobs;
    let rate = cfg.window.spec.sample_rate_hz;
    let corpora = match (a.augment, &a.bg_noise, &a.robot_noise) {
        (true, Some(bg), Some(robot)) => {
            cfg.augment = Some(AugmentSpec::default());
            Some((load_corpus(bg, rate)?, load_corpus(robot, rate)?))
        }
        _ => None,
    };
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let index = export_dataset(&episodes, &cfg, corpora.as_ref().map(|(b, r)| (b, r)), &a.out)?;
    let checksums: serde_json::Map<String, serde_json::Value> =
        dataset_checksums(&a.out, &index)?.into_iter().map(|(k, v)| (k, v.into())).collect();
    Ok(json!({
        "episodes": index.episodes.len(),
        "windows": index.windows.len(),
        "out": a.out,
        "sha256": checksums,
    }))
}

/// CSV with one line per row of `values`.
pub fn spectrogram_csv(values: &Matrix) -> String {
    let mut out = String::new();
    for r in 0..values.rows() {
        let line: Vec<String> = values.row(r).iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Binary PGM (P5), last row of `values` drawn at the top, scaled from the
/// matrix's own min/max to 0..=255.
pub fn spectrogram_pgm(values: &Matrix) -> Vec<u8> {
    let (lo, hi) = values.min_max().unwrap_or((0.0, 0.0));
    let range = if hi > lo { hi - lo } else { 1.0 };
    let mut out = format!("P5\n{} {}\n255\n", values.cols(), values.rows()).into_bytes();
    for r in (0..values.rows()).rev() {
        out.extend(values.row(r).iter().map(|v| (((v - lo) / range) * 255.0).round().clamp(0.0, 255.0) as u8));
    }
    out
}

fn inspect(a: &InspectArgs) -> Result<serde_json::Value> {
    let (values, mut summary) = if let Some(root) = &a.dataset {
        let mut reader = DatasetReader::open(root)?;
        let window = reader.window(a.window)?;
        let entry = &reader.index.windows[a.window];
        let t = &window.log_mel;
        let m = Matrix::from_vec(t.dims[0], t.dims[1], t.data.iter().map(|&v| f64::from(v)).collect());
        let summary = json!({
            "episode_id": entry.episode_id,
            "window_index": entry.window_index,
            "t_s": entry.t_s,
            "augment": entry.augment,
            "proprio": window.proprio.data,
        });
        (m, summary)
    } else {
        let path = a.wav.as_ref().expect("clap enforces a source");
        let cfg = SpecConfig::default();
        let audio = to_rate(read_wav(path, 0.0)?, cfg.sample_rate_hz, 64)?;
        let spec = MelFrontend::new(cfg)?.log_mel_normalized(&audio.samples, 0.0)?;
        (spec.values, json!({ "duration_s": audio.duration_s() }))
    };
    if let Some(path) = &a.csv {
        fs::write(path, spectrogram_csv(&values)).map_err(|e| Error::io(path, e))?;
    }
    if let Some(path) = &a.pgm {
        fs::write(path, spectrogram_pgm(&values)).map_err(|e| Error::io(path, e))?;
    }
    let (lo, hi) = values.min_max().unwrap_or((0.0, 0.0));
    summary["n_mels"] = json!(values.rows());
    summary["n_frames"] = json!(values.cols());
    summary["min"] = json!(lo);
    summary["max"] = json!(hi);
    Ok(summary)
}
