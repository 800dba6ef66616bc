//! Demonstration data model and time-indexed access to its tracks.
//!
//! All timestamps are seconds on the recording's capture clock. The audio
//! track may lag the other sensors; [`Episode::latency_s`] stores the
//! calibrated lag and [`Episode::audio_segment`] addresses audio on the
//! corrected clock (capture time minus latency).

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::rotation::Quat;
use crate::{Error, Result};

/// Nearest-neighbour pose lookups accept queries up to half a 20 Hz period
/// outside the recorded range.
pub const POSE_TOLERANCE_S: f64 = 0.025;

const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct AudioTrack {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
    /// Capture-clock time of sample 0.
    pub start_time_s: f64,
}

impl AudioTrack {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32, start_time_s: f64) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(Error::InvalidEpisode("audio sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidEpisode(format!("audio sample {i} is not finite")));
        }
        if !start_time_s.is_finite() {
            return Err(Error::InvalidEpisode("audio start time is not finite".into()));
        }
        Ok(Self { samples, sample_rate_hz, start_time_s })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    pub fn end_time_s(&self) -> f64 {
        self.start_time_s + self.duration_s()
    }
}

/// Reference to one RGB image: the file that holds it and the frame's
/// position within that file (0 for single-image files).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FrameRef {
    pub path: String,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameIndex {
    pub timestamps_s: Vec<f64>,
    pub nominal_rate_hz: f64,
    pub frame_refs: Vec<FrameRef>,
}

impl FrameIndex {
    pub fn new(timestamps_s: Vec<f64>, frame_refs: Vec<FrameRef>) -> Result<Self> {
        if timestamps_s.len() != frame_refs.len() {
            return Err(Error::InvalidEpisode(format!(
                "{} frame timestamps but {} frame references",
                timestamps_s.len(),
                frame_refs.len()
            )));
        }
        check_increasing("frame", &timestamps_s)?;
        Ok(Self { timestamps_s, nominal_rate_hz: 60.0, frame_refs })
    }

    pub fn len(&self) -> usize {
        self.timestamps_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps_s.is_empty()
    }

    /// Index of the frame nearest to `t_s`, clamped to the recorded range.
    /// Ties go to the earlier frame.
    pub fn nearest_index(&self, t_s: f64) -> Option<usize> {
        nearest(&self.timestamps_s, t_s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseSample {
    pub t_s: f64,
    pub position_m: [f64; 3],
    pub orientation: Quat,
    /// Normalized gripper openness, 0 closed to 1 fully open.
    pub gripper_width: f64,
}

impl PoseSample {
    pub fn validate(&self) -> Result<()> {
        if !self.t_s.is_finite() {
            return Err(Error::InvalidEpisode("pose timestamp is not finite".into()));
        }
        if self.position_m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidEpisode(format!("pose at {} s has non-finite position", self.t_s)));
        }
        if !self.orientation.is_unit() {
            return Err(Error::NonUnitQuaternion { norm: self.orientation.norm() });
        }
        if !(0.0..=1.0).contains(&self.gripper_width) {
            return Err(Error::InvalidEpisode(format!(
                "gripper openness {} at {} s outside [0, 1]",
                self.gripper_width, self.t_s
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub id: String,
    pub audio: AudioTrack,
    pub frames: FrameIndex,
    /// Nominally 20 Hz.
    pub poses: Vec<PoseSample>,
    pub environment_tag: String,
    /// Audio lag behind the other sensors, seconds.
    pub latency_s: f64,
}

impl Episode {
    /// Validates every track invariant and that the audio, frame and pose
    /// time ranges share a common interval.
    pub fn new(
        id: String,
        audio: AudioTrack,
        frames: FrameIndex,
        poses: Vec<PoseSample>,
        environment_tag: String,
        latency_s: f64,
    ) -> Result<Self> {
        let episode = Self { id, audio, frames, poses, environment_tag, latency_s };
        episode.validate()?;
        Ok(episode)
    }

    pub fn validate(&self) -> Result<()> {
        if self.audio.sample_rate_hz == 0 {
            return Err(Error::InvalidEpisode("audio sample rate must be positive".into()));
        }
        if self.audio.samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidEpisode("audio contains non-finite samples".into()));
        }
        if self.audio.is_empty() {
            return Err(Error::InvalidEpisode("audio track is empty".into()));
        }
        if self.frames.timestamps_s.len() != self.frames.frame_refs.len() {
            return Err(Error::InvalidEpisode("frame timestamps and references differ in length".into()));
        }
        check_increasing("frame", &self.frames.timestamps_s)?;
        if self.frames.is_empty() {
            return Err(Error::InvalidEpisode("episode has no frames".into()));
        }
        if self.poses.is_empty() {
            return Err(Error::InvalidEpisode("episode has no poses".into()));
        }
        for p in &self.poses {
            p.validate()?;
        }
        for (i, w) in self.poses.windows(2).enumerate() {
            if w[1].t_s <= w[0].t_s {
                return Err(Error::NonMonotonicTimestamps { track: "pose", index: i + 1 });
            }
        }
        if !self.latency_s.is_finite() {
            return Err(Error::InvalidEpisode("latency is not finite".into()));
        }
        let ranges = [
            (self.audio.start_time_s, self.audio.end_time_s()),
            (self.frames.timestamps_s[0], *self.frames.timestamps_s.last().unwrap()),
            (self.poses[0].t_s, self.poses.last().unwrap().t_s),
        ];
        let lo = ranges.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
        let hi = ranges.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
        if lo > hi {
            return Err(Error::InvalidEpisode(format!(
                "audio, frame and pose time ranges do not overlap (latest start {lo}, earliest end {hi})"
            )));
        }
        Ok(())
    }

    pub fn pose_times(&self) -> impl Iterator<Item = f64> + '_ {
        self.poses.iter().map(|p| p.t_s)
    }

    /// Index of the pose nearest to `t_s`, ties toward the earlier sample.
    pub fn pose_index_at(&self, t_s: f64) -> Result<usize> {
        let (first, last) = (self.poses[0].t_s, self.poses[self.poses.len() - 1].t_s);
        let (lo, hi) = (first - POSE_TOLERANCE_S, last + POSE_TOLERANCE_S);
        if !(lo..=hi).contains(&t_s) {
            return Err(Error::OutOfRange { what: "pose", t_s, lo, hi });
        }
        let times: Vec<f64> = self.pose_times().collect();
        Ok(nearest(&times, t_s).expect("poses are nonempty"))
    }

    pub fn pose_at(&self, t_s: f64) -> Result<PoseSample> {
        self.pose_index_at(t_s).map(|i| self.poses[i])
    }

    /// Audio covering `[t_end_s - duration_s, t_end_s]` on the
    /// latency-corrected clock, exactly `round(duration_s * rate)` samples.
    /// Samples before the recording start are zero; a window ending after
    /// the recording is an error.
    pub fn audio_segment(&self, t_end_s: f64, duration_s: f64) -> Result<AudioTrack> {
        if !(duration_s > 0.0) || !t_end_s.is_finite() {
            return Err(Error::InvalidConfig(format!("audio window duration {duration_s} must be positive")));
        }
        let audio = &self.audio;
        let rate = audio.sample_rate_hz as f64;
        let n = libm::round(duration_s * rate) as i64;
        let end = libm::round((t_end_s + self.latency_s - audio.start_time_s) * rate) as i64;
        let len = audio.samples.len() as i64;
        if end > len {
            return Err(Error::OutOfRange {
                what: "audio",
                t_s: t_end_s,
                lo: audio.start_time_s - self.latency_s,
                hi: audio.end_time_s() - self.latency_s,
            });
        }
        let begin = end - n;
        let samples =
            (begin..end).map(|i| if (0..len).contains(&i) { audio.samples[i as usize] } else { 0.0 }).collect();
        Ok(AudioTrack {
            samples,
            sample_rate_hz: audio.sample_rate_hz,
            start_time_s: audio.start_time_s + begin as f64 / rate - self.latency_s,
        })
    }
}

fn check_increasing(track: &'static str, ts: &[f64]) -> Result<()> {
    if let Some(i) = ts.iter().position(|t| !t.is_finite()) {
        return Err(Error::InvalidEpisode(format!("{track} timestamp {i} is not finite")));
    }
    match ts.windows(2).position(|w| w[1] <= w[0]) {
        Some(i) => Err(Error::NonMonotonicTimestamps { track, index: i + 1 }),
        None => Ok(()),
    }
}

/// Nearest element of a sorted slice; equidistant queries resolve to the
/// earlier index.
fn nearest(sorted: &[f64], t: f64) -> Option<usize> {
    if sorted.is_empty() {
        return None;
    }
    let i = sorted.partition_point(|&v| v < t);
    if i == 0 {
        return Some(0);
    }
    if i == sorted.len() {
        return Some(sorted.len() - 1);
    }
    let before = t - sorted[i - 1];
    let after = sorted[i] - t;
    Some(if after < before - TIE_EPS { i } else { i - 1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn pose(t: f64) -> PoseSample {
        PoseSample { t_s: t, position_m: [t, 0.0, 0.0], orientation: Quat::IDENTITY, gripper_width: 0.5 }
    }

    fn episode(poses: Vec<PoseSample>) -> Episode {
        let audio = AudioTrack::new((0..48_000).map(|i| i as f64 / 48_000.0).collect(), 48_000, 0.0).unwrap();
        let frames = FrameIndex::new(
            vec![0.0, 0.5],
            vec![FrameRef { path: "a.png".into(), index: 0 }, FrameRef { path: "b.png".into(), index: 1 }],
        )
        .unwrap();
        Episode::new("ep".into(), audio, frames, poses, "lab".into(), 0.0).unwrap()
    }

    #[test]
    fn exact_and_tie_lookup() {
        let ep = episode(vec![pose(0.0), pose(0.05), pose(0.10)]);
        assert_eq!(ep.pose_at(0.05).unwrap().t_s, 0.05);
        assert_eq!(ep.pose_at(0.025).unwrap().t_s, 0.0);
        assert_eq!(ep.pose_at(0.026).unwrap().t_s, 0.05);
        assert_eq!(ep.pose_at(0.125).unwrap().t_s, 0.10);
        assert!(matches!(ep.pose_at(-1.0), Err(Error::OutOfRange { .. })));
        assert!(matches!(ep.pose_at(0.1251), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn repeated_pose_timestamp_rejected() {
        let audio = AudioTrack::new(vec![0.0; 480], 48_000, 0.0).unwrap();
        let frames = FrameIndex::new(vec![0.0], vec![FrameRef { path: "a".into(), index: 0 }]).unwrap();
        let err = Episode::new("x".into(), audio, frames, vec![pose(0.0), pose(0.0)], String::new(), 0.0);
        assert_eq!(err, Err(Error::NonMonotonicTimestamps { track: "pose", index: 1 }));
    }

    #[test]
    fn frame_refs_must_match_timestamps() {
        assert!(FrameIndex::new(vec![0.0, 1.0], vec![FrameRef { path: "a".into(), index: 0 }]).is_err());
    }

    #[test]
    fn disjoint_tracks_rejected() {
        let audio = AudioTrack::new(vec![0.0; 4800], 48_000, 10.0).unwrap();
        let frames = FrameIndex::new(vec![0.0], vec![FrameRef { path: "a".into(), index: 0 }]).unwrap();
        assert!(Episode::new("x".into(), audio, frames, vec![pose(0.0)], String::new(), 0.0).is_err());
    }

    #[test]
    fn segment_length_and_padding() {
        let ep = episode(vec![pose(0.0), pose(0.5), pose(1.0)]);
        let seg = ep.audio_segment(0.5, 1.0).unwrap();
        assert_eq!(seg.len(), 48_000);
        assert!(seg.samples[..24_000].iter().all(|&s| s == 0.0));
        assert_eq!(seg.samples[24_000], 0.0);
        assert_eq!(seg.samples[24_001], 1.0 / 48_000.0);
        assert_eq!(seg.samples[47_999], 23_999.0 / 48_000.0);
        assert!((seg.start_time_s + 0.5).abs() < 1e-12);
        assert!(matches!(ep.audio_segment(1.01, 0.5), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn latency_shifts_window_later_in_capture_time() {
        let mut ep = episode(vec![pose(0.0), pose(1.0)]);
        let raw = ep.audio_segment(0.73, 0.2).unwrap();
        ep.latency_s = 0.23;
        let corrected = ep.audio_segment(0.5, 0.2).unwrap();
        assert_eq!(raw.samples, corrected.samples);
        assert!((corrected.start_time_s - 0.3).abs() < 1e-12);
    }

    #[test]
    fn pose_lookup_piecewise_constant() {
        let ep = episode((0..10).map(|i| pose(i as f64 * 0.05)).collect());
        for i in 0..10 {
            let center = i as f64 * 0.05;
            for d in [-0.0249, -0.01, 0.0, 0.01, 0.0249] {
                let t = center + d;
                if (-0.025..=0.475).contains(&t) {
                    assert_eq!(ep.pose_index_at(t).unwrap(), i, "t={t}");
                }
            }
        }
    }
}
