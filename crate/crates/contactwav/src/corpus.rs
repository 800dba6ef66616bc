//! Noise corpora on disk.
//!
//! A corpus is a directory of mono WAV clips. An optional `corpus.json`
//! (`{"label": "...", "clips": ["a.wav", ...]}`) fixes the label and clip
//! order; without it every `*.wav` is used in file-name order and the
//! directory name is the label. Clips are resampled to the target rate on
//! load, since noise is mixed in after resampling.

use std::fs;
use std::path::{Path, PathBuf};

use contactwav_core::augment::NoiseCorpus;
use contactwav_core::resample::{ResampleSpec, Resampler};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::wav::read_wav;

#[derive(Debug, Deserialize)]
struct CorpusListing {
    label: String,
    clips: Vec<String>,
}

fn listing(dir: &Path) -> Result<(String, Vec<PathBuf>)> {
    let listing_path = dir.join("corpus.json");
    if listing_path.is_file() {
        let text = fs::read_to_string(&listing_path).map_err(|e| Error::io(&listing_path, e))?;
        let listing: CorpusListing = serde_json::from_str(&text).map_err(|e| Error::MalformedManifest {
            path: listing_path.clone(),
            field: "corpus".into(),
            message: e.to_string(),
        })?;
        return Ok((listing.label, listing.clips.iter().map(|c| dir.join(c)).collect()));
    }
    let mut clips: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .collect();
    clips.sort();
    let label = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    Ok((label, clips))
}

pub fn load_corpus(dir: &Path, target_rate_hz: u32) -> Result<NoiseCorpus> {
    let (label, paths) = listing(dir)?;
    let mut resamplers: Vec<Resampler> = Vec::new();
    let mut clips = Vec::with_capacity(paths.len());
    for path in &paths {
        let clip = read_wav(path, 0.0)?;
        if clip.sample_rate_hz == target_rate_hz {
            clips.push(clip);
            continue;
        }
        let idx = match resamplers.iter().position(|r| r.spec().src_rate_hz == clip.sample_rate_hz) {
            Some(i) => i,
            None => {
                resamplers.push(Resampler::new(ResampleSpec::new(clip.sample_rate_hz, target_rate_hz))?);
                resamplers.len() - 1
            }
        };
        clips.push(
            resamplers[idx].process_track(&clip).map_err(|e| Error::from(e).context(path.display().to_string()))?,
        );
    }
    Ok(NoiseCorpus::new(label, clips)?)
}
