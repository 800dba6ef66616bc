//! Seeded background/robot noise overlay for training audio.
//!
//! A noise clip is tiled from a random offset to the clean segment's length,
//! scaled so its RMS over that segment equals `gain * rms(clean)` and added.
//! Every random choice is written to an [`AugmentRecord`], and
//! [`replay`] rebuilds the identical waveform from the record alone.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::episode::AudioTrack;
use crate::{rms, Error, Result};

/// Below this clean RMS the segment is treated as silent and the noise is
/// scaled to the configured floor instead.
pub const SILENT_RMS: f64 = 1e-8;
pub const DEFAULT_RMS_FLOOR: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseCorpus {
    pub label: String,
    pub clips: Vec<AudioTrack>,
}

impl NoiseCorpus {
    pub fn new(label: impl Into<String>, clips: Vec<AudioTrack>) -> Result<Self> {
        let label = label.into();
        if clips.is_empty() || clips.iter().any(|c| c.is_empty()) {
            return Err(Error::EmptyCorpus(label));
        }
        Ok(Self { label, clips })
    }

    pub fn len(&self) -> usize {
        self.clips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clips.is_empty()
    }
}

/// What the noise RMS is matched to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ScaleTarget {
    /// RMS of the clean segment being augmented.
    Segment,
    /// A fixed reference level, e.g. the mean RMS of the training set.
    Reference { rms: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentSpec {
    pub seed: u64,
    pub p_background: f64,
    pub p_robot: f64,
    pub gain: f64,
    pub target: ScaleTarget,
    pub rms_floor: f64,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            p_background: 0.5,
            p_robot: 0.5,
            gain: 1.0,
            target: ScaleTarget::Segment,
            rms_floor: DEFAULT_RMS_FLOOR,
        }
    }
}

impl AugmentSpec {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p_background", self.p_background), ("p_robot", self.p_robot)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(alloc::format!("{name} = {p} is not a probability")));
            }
        }
        if !(self.gain >= 0.0 && self.gain.is_finite()) {
            return Err(Error::InvalidConfig(alloc::format!("gain {} must be finite and >= 0", self.gain)));
        }
        Ok(())
    }

    fn target_rms(&self, clean: &[f64]) -> f64 {
        let level = match self.target {
            ScaleTarget::Segment => rms(clean),
            ScaleTarget::Reference { rms } => rms,
        };
        if level < SILENT_RMS {
            self.rms_floor
        } else {
            level
        }
    }
}

/// One applied overlay: which clip, where it started, and the multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlayDraw {
    pub clip_index: usize,
    pub offset: usize,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentRecord {
    pub seed: u64,
    pub applied_background: bool,
    pub applied_robot: bool,
    pub background: Option<OverlayDraw>,
    pub robot: Option<OverlayDraw>,
}

impl AugmentRecord {
    pub fn identity(seed: u64) -> Self {
        Self { seed, applied_background: false, applied_robot: false, background: None, robot: None }
    }
}

/// `noise` tiled from `offset` (mod its length) to `len` samples.
pub fn tiled_segment(noise: &[f64], offset: usize, len: usize) -> Vec<f64> {
    let n = noise.len();
    (0..len).map(|i| noise[(offset + i) % n]).collect()
}

/// Multiplier that brings the tiled noise segment to `target_rms * gain`.
/// A segment with zero energy gets scale 0.
pub fn noise_scale(noise_segment: &[f64], target_rms: f64, gain: f64) -> f64 {
    let noise_rms = rms(noise_segment);
    if noise_rms <= 0.0 {
        0.0
    } else {
        gain * target_rms / noise_rms
    }
}

/// Adds `scale * noise` (tiled from `offset`) onto `clean`.
pub fn overlay_scaled(clean: &[f64], noise: &[f64], offset: usize, scale: f64) -> Vec<f64> {
    let n = noise.len();
    clean.iter().enumerate().map(|(i, &c)| c + scale * noise[(offset + i) % n]).collect()
}

/// Overlays noise matched to the clean segment's RMS, times `gain`. Silent
/// clean input is matched to [`DEFAULT_RMS_FLOOR`].
pub fn overlay_noise(clean: &[f64], noise: &[f64], offset: usize, gain: f64) -> Result<Vec<f64>> {
    if clean.is_empty() || noise.is_empty() {
        return Err(Error::EmptyInput);
    }
    let spec = AugmentSpec { gain, ..AugmentSpec::default() };
    let segment = tiled_segment(noise, offset, clean.len());
    let scale = noise_scale(&segment, spec.target_rms(clean), gain);
    Ok(overlay_scaled(clean, noise, offset, scale))
}

/// Two independent Bernoulli draws decide whether each corpus contributes.
///
/// The stream is consumed in a fixed order regardless of the outcomes:
/// background coin, robot coin, background clip and offset, robot clip and
/// offset. Changing a probability therefore never shifts the other draws.
pub fn augment_audio(
    clean: &[f64],
    background: &NoiseCorpus,
    robot: &NoiseCorpus,
    spec: &AugmentSpec,
) -> Result<(Vec<f64>, AugmentRecord)> {
    spec.validate()?;
    for corpus in [background, robot] {
        if corpus.is_empty() || corpus.clips.iter().any(|c| c.is_empty()) {
            return Err(Error::EmptyCorpus(corpus.label.clone()));
        }
    }
    if clean.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let use_bg = rng.gen::<f64>() < spec.p_background;
    let use_robot = rng.gen::<f64>() < spec.p_robot;
    let mut pick = |corpus: &NoiseCorpus| {
        let clip_index = rng.gen_range(0..corpus.len());
        let offset = rng.gen_range(0..corpus.clips[clip_index].len());
        (clip_index, offset)
    };
    let bg_pick = pick(background);
    let robot_pick = pick(robot);

    let target = spec.target_rms(clean);
    let draw = |corpus: &NoiseCorpus, (clip_index, offset): (usize, usize)| {
        let segment = tiled_segment(&corpus.clips[clip_index].samples, offset, clean.len());
        OverlayDraw { clip_index, offset, scale: noise_scale(&segment, target, spec.gain) }
    };
    let record = AugmentRecord {
        seed: spec.seed,
        applied_background: use_bg,
        applied_robot: use_robot,
        background: use_bg.then(|| draw(background, bg_pick)),
        robot: use_robot.then(|| draw(robot, robot_pick)),
    };
    let out = replay(clean, background, robot, &record)?;
    Ok((out, record))
}

/// Rebuilds an augmented waveform from its record; no randomness involved.
pub fn replay(
    clean: &[f64],
    background: &NoiseCorpus,
    robot: &NoiseCorpus,
    record: &AugmentRecord,
) -> Result<Vec<f64>> {
    let mut out = clean.to_vec();
    for (corpus, draw) in [(background, record.background), (robot, record.robot)] {
        if let Some(d) = draw {
            let clip = corpus.clips.get(d.clip_index).ok_or_else(|| {
                Error::InvalidConfig(alloc::format!("record references missing clip {}", d.clip_index))
            })?;
            let n = clip.samples.len();
            for (i, o) in out.iter_mut().enumerate() {
                *o += d.scale * clip.samples[(d.offset + i) % n];
            }
        }
    }
    Ok(out)
}
