//! Mono WAV input and output.
//!
//! 16-bit PCM is scaled by 1/32768 (so -32768 maps to exactly -1.0) and
//! 32-bit float is taken as is. Anything else is rejected.

use std::path::Path;

use contactwav_core::episode::AudioTrack;
use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::error::{Error, Result};

fn hound_error(path: &Path, err: hound::Error) -> Error {
    match err {
        hound::Error::IoError(e) => Error::io(path, e),
        other => Error::UnsupportedAudioFormat { path: path.to_path_buf(), reason: other.to_string() },
    }
}

/// Reads a mono WAV file. The track starts at `start_time_s`.
pub fn read_wav(path: &Path, start_time_s: f64) -> Result<AudioTrack> {
    let mut reader = WavReader::open(path).map_err(|e| hound_error(path, e))?;
    let spec = reader.spec();
    let unsupported = |reason: String| Error::UnsupportedAudioFormat { path: path.to_path_buf(), reason };
    if spec.channels != 1 {
        return Err(unsupported(format!("{} channels, expected mono", spec.channels)));
    }
    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| f64::from(v) / 32768.0))
            .collect::<Result<_, _>>()
            .map_err(|e| hound_error(path, e))?,
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()
            .map_err(|e| hound_error(path, e))?,
        (format, bits) => {
            return Err(unsupported(format!("{bits}-bit {format:?}, expected 16-bit PCM or 32-bit float")))
        }
    };
    Ok(AudioTrack::new(samples, spec.sample_rate, start_time_s)?)
}

/// Writes mono 32-bit float samples.
pub fn write_wav_f32(path: &Path, samples: &[f64], sample_rate_hz: u32) -> Result<()> {
    let spec =
        WavSpec { channels: 1, sample_rate: sample_rate_hz, bits_per_sample: 32, sample_format: SampleFormat::Float };
    let mut writer = WavWriter::create(path, spec).map_err(|e| hound_error(path, e))?;
    for &s in samples {
        writer.write_sample(s as f32).map_err(|e| hound_error(path, e))?;
    }
    writer.finalize().map_err(|e| hound_error(path, e))
}

/// Writes mono 16-bit PCM, rounding and saturating `sample * 32768`.
pub fn write_wav_i16(path: &Path, samples: &[f64], sample_rate_hz: u32) -> Result<()> {
    let spec =
        WavSpec { channels: 1, sample_rate: sample_rate_hz, bits_per_sample: 16, sample_format: SampleFormat::Int };
    let mut writer = WavWriter::create(path, spec).map_err(|e| hound_error(path, e))?;
    for &s in samples {
        let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(v).map_err(|e| hound_error(path, e))?;
    }
    writer.finalize().map_err(|e| hound_error(path, e))
}
