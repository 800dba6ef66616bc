//! Per-timestep training examples: observation windows and action horizons.
//!
//! Windows are anchored on pose samples (the 20 Hz control grid). For pose
//! index `i` the observation holds the last `obs_*_steps` poses and frames
//! (`i-1, i`, oldest first, clamped at the first sample) and the audio
//! ending at the pose time; the action horizon holds poses `i+1 ..= i+H`.
//!
//! Poses and actions use a 10-vector `[x, y, z, r00, r10, r20, r01, r11, r21,
//! gripper]`: position, the 6D rotation (first two matrix columns), and
//! gripper openness. Actions are absolute poses in the episode base frame.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::augment::{augment_audio, AugmentRecord, AugmentSpec, NoiseCorpus};
use crate::episode::{Episode, FrameRef, PoseSample};
use crate::mel::{MelFrontend, SpecConfig, Spectrogram};
use crate::resample::{ResampleSpec, Resampler};
use crate::rotation::{quat_to_rotmat, rotmat_to_sixd, sixd_to_rotmat, RotMat, SixD};
use crate::seed::{derive_seed, substream};
use crate::{Error, Result};

pub const POSE_DIM: usize = 10;

pub type PoseVector = [f64; POSE_DIM];

/// Reference frame of exported actions. Only absolute poses are produced;
/// the tag is written into dataset metadata so other encodings can coexist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionFrame {
    Absolute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub obs_image_steps: usize,
    pub obs_pose_steps: usize,
    pub control_rate_hz: f64,
    /// Task dependent (2 or 3 s); deliberately has no default.
    pub audio_window_s: f64,
    pub action_horizon: usize,
    pub spec: SpecConfig,
    pub filter_taps_per_phase: usize,
    /// Master augmentation spec; each window derives its own seed from it.
    pub augment: Option<AugmentSpec>,
    pub action_frame: ActionFrame,
}

impl WindowConfig {
    pub fn new(audio_window_s: f64) -> Self {
        Self {
            obs_image_steps: 2,
            obs_pose_steps: 2,
            control_rate_hz: 20.0,
            audio_window_s,
            action_horizon: 16,
            spec: SpecConfig::default(),
            filter_taps_per_phase: 64,
            augment: None,
            action_frame: ActionFrame::Absolute,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.action_horizon == 0 {
            return Err(Error::InvalidConfig("action_horizon must be >= 1".into()));
        }
        if self.obs_image_steps == 0 || self.obs_pose_steps == 0 {
            return Err(Error::InvalidConfig("observation history needs at least one step".into()));
        }
        if !(self.audio_window_s > 0.0 && self.audio_window_s.is_finite()) {
            return Err(Error::InvalidConfig(format!("audio_window_s {} must be positive", self.audio_window_s)));
        }
        if !(self.control_rate_hz > 0.0) {
            return Err(Error::InvalidConfig("control_rate_hz must be positive".into()));
        }
        if let Some(a) = &self.augment {
            a.validate()?;
        }
        self.spec.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationWindow {
    pub t_s: f64,
    pub log_mel: Spectrogram,
    /// Oldest first.
    pub image_refs: Vec<FrameRef>,
    /// Oldest first.
    pub proprio: Vec<PoseVector>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionHorizon {
    /// Time of the first action, one control period after the observation.
    pub t0_s: f64,
    pub actions: Vec<PoseVector>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingWindow {
    pub window_index: usize,
    pub observation: ObservationWindow,
    pub actions: ActionHorizon,
    pub augment: Option<AugmentRecord>,
    /// Seed reserved for image augmentation of this window.
    pub image_seed: u64,
}

pub fn encode_pose(pose: &PoseSample) -> Result<PoseVector> {
    let six = rotmat_to_sixd(&quat_to_rotmat(pose.orientation)?).0;
    let p = pose.position_m;
    Ok([p[0], p[1], p[2], six[0], six[1], six[2], six[3], six[4], six[5], pose.gripper_width])
}

pub fn decode_pose(v: &PoseVector) -> Result<([f64; 3], RotMat, f64)> {
    let rot = sixd_to_rotmat(&SixD([v[3], v[4], v[5], v[6], v[7], v[8]]))?;
    Ok(([v[0], v[1], v[2]], rot, v[9]))
}

/// Background and robot noise corpora, both at the spectrogram sample rate.
#[derive(Debug, Clone, Copy)]
pub struct Corpora<'a> {
    pub background: &'a NoiseCorpus,
    pub robot: &'a NoiseCorpus,
}

/// Grid points that have a full action horizon: `(pose index, time)`.
pub fn window_times(episode: &Episode, horizon: usize) -> Vec<(usize, f64)> {
    let n = episode.poses.len();
    (0..n.saturating_sub(horizon)).map(|i| (i, episode.poses[i].t_s)).collect()
}

/// Reusable window assembler: owns the resampler and mel front end for one
/// configuration.
#[derive(Debug, Clone)]
pub struct WindowBuilder {
    cfg: WindowConfig,
    frontend: MelFrontend,
    resamplers: Vec<Resampler>,
}

impl WindowBuilder {
    pub fn new(cfg: WindowConfig) -> Result<Self> {
        cfg.validate()?;
        let frontend = MelFrontend::new(cfg.spec)?;
        Ok(Self { cfg, frontend, resamplers: Vec::new() })
    }

    pub fn config(&self) -> &WindowConfig {
        &self.cfg
    }

    /// Pre-builds the filter bank for a source rate so that `build` never
    /// has to construct one.
    pub fn prepare_rate(&mut self, src_rate_hz: u32) -> Result<()> {
        if src_rate_hz != self.cfg.spec.sample_rate_hz && self.resampler(src_rate_hz).is_none() {
            let spec = ResampleSpec {
                filter_taps_per_phase: self.cfg.filter_taps_per_phase,
                ..ResampleSpec::new(src_rate_hz, self.cfg.spec.sample_rate_hz)
            };
            self.resamplers.push(Resampler::new(spec)?);
        }
        Ok(())
    }

    fn resampler(&self, src_rate_hz: u32) -> Option<&Resampler> {
        self.resamplers.iter().find(|r| r.spec().src_rate_hz == src_rate_hz)
    }

    /// Audio window ending at `t_s` on the latency-corrected clock, at the
    /// spectrogram sample rate.
    pub fn audio_at(&self, episode: &Episode, t_s: f64) -> Result<(Vec<f64>, f64)> {
        let segment = episode.audio_segment(t_s, self.cfg.audio_window_s)?;
        let target = self.cfg.spec.sample_rate_hz;
        if segment.sample_rate_hz == target {
            return Ok((segment.samples, segment.start_time_s));
        }
        let owned;
        let resampler = match self.resampler(segment.sample_rate_hz) {
            Some(r) => r,
            None => {
                let spec = ResampleSpec {
                    filter_taps_per_phase: self.cfg.filter_taps_per_phase,
                    ..ResampleSpec::new(segment.sample_rate_hz, target)
                };
                owned = Resampler::new(spec)?;
                &owned
            }
        };
        let resampled = resampler.process_track(&segment)?;
        Ok((resampled.samples, resampled.start_time_s))
    }

    /// Builds the window anchored at the pose nearest `t_s`.
    ///
    /// When augmentation is configured, `corpora` must be supplied; the
    /// window's seed is derived from the master seed, the episode id and the
    /// pose index, so results do not depend on evaluation order.
    pub fn build(&self, episode: &Episode, t_s: f64, corpora: Option<Corpora<'_>>) -> Result<TrainingWindow> {
        let cfg = &self.cfg;
        let i = episode.pose_index_at(t_s)?;
        let t_s = episode.poses[i].t_s;
        let available = episode.poses.len() - 1 - i;
        if available < cfg.action_horizon {
            return Err(Error::InsufficientFuture { available, needed: cfg.action_horizon });
        }

        let master = cfg.augment.map(|a| a.seed).unwrap_or(0);
        let window_seed = derive_seed(master, &episode.id, i as u64);

        let (mut audio, audio_t0) = self.audio_at(episode, t_s)?;
        let augment = match (&cfg.augment, corpora) {
            (Some(spec), Some(c)) => {
                let spec = AugmentSpec { seed: substream(window_seed, 0), ..*spec };
                let (noisy, record) = augment_audio(&audio, c.background, c.robot, &spec)?;
                audio = noisy;
                Some(record)
            }
            (Some(_), None) => {
                return Err(Error::InvalidConfig("augmentation enabled but no noise corpora given".into()));
            }
            (None, _) => None,
        };
        let log_mel = self.frontend.log_mel_normalized(&audio, audio_t0)?;

        let history = |steps: usize| (0..steps).rev().map(move |k| i.saturating_sub(k));
        let image_refs = history(cfg.obs_image_steps)
            .map(|j| {
                let f = episode.frames.nearest_index(episode.poses[j].t_s).expect("episode has frames");
                episode.frames.frame_refs[f].clone()
            })
            .collect();
        let proprio = history(cfg.obs_pose_steps).map(|j| encode_pose(&episode.poses[j])).collect::<Result<_>>()?;
        let actions = episode.poses[i + 1..=i + cfg.action_horizon].iter().map(encode_pose).collect::<Result<_>>()?;

        Ok(TrainingWindow {
            window_index: i,
            observation: ObservationWindow { t_s, log_mel, image_refs, proprio },
            actions: ActionHorizon { t0_s: t_s + 1.0 / cfg.control_rate_hz, actions },
            augment,
            image_seed: substream(window_seed, 1),
        })
    }
}

pub fn build_window(
    episode: &Episode,
    t_s: f64,
    cfg: &WindowConfig,
    corpora: Option<Corpora<'_>>,
) -> Result<TrainingWindow> {
    let mut builder = WindowBuilder::new(cfg.clone())?;
    builder.prepare_rate(episode.audio.sample_rate_hz)?;
    builder.build(episode, t_s, corpora)
}
