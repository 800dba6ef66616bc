//! Training-window export.
//!
//! Each episode becomes one shard, `shards/NNNN_<id>.cwav`, holding four
//! tensors per window in this order:
//!
//! | tensor | dims | contents |
//! |---|---|---|
//! | `log_mel` | `[n_mels, n_frames]` | normalized log-mel, mel bins low to high |
//! | `images` | `[obs_image_steps, 224, 224, 3]` | RGB in `[0, 1]`, oldest first |
//! | `proprio` | `[obs_pose_steps, 10]` | pose vectors, oldest first |
//! | `actions` | `[action_horizon, 10]` | future pose vectors |
//!
//! Pose vectors are `[x, y, z, r00, r10, r20, r01, r11, r21, gripper]`: the
//! 6D block is the first rotation-matrix column followed by the second.
//! `dataset.json` lists every window with its tensor offsets and the
//! augmentation draws that produced it.
//!
//! Episodes are exported in id order by parallel workers, one shard each.
//! All randomness is derived from the master seed, the episode id and the
//! window's pose index, so the output is byte-identical for any job count.

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Read};
use std::path::{Path, PathBuf};

use contactwav_core::augment::{AugmentRecord, AugmentSpec, NoiseCorpus};
use contactwav_core::episode::{Episode, FrameRef};
use contactwav_core::image::{augment_image_with, Image, ImageAugmentConfig, ImageDraw};
use contactwav_core::window::{window_times, Corpora, WindowBuilder, WindowConfig, POSE_DIM};
use log::{debug, info};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::container::{check_header, read_tensor_at, ContainerWriter, Tensor, TensorLoc};
use crate::error::{Error, Result};

pub const INDEX_FILE: &str = "dataset.json";
pub const FORMAT_NAME: &str = "contactwav-dataset";
pub const FORMAT_VERSION: u32 = 1;
pub const POSE_LAYOUT: [&str; POSE_DIM] = ["x", "y", "z", "r00", "r10", "r20", "r01", "r11", "r21", "gripper"];
pub const TENSOR_ORDER: [&str; 4] = ["log_mel", "images", "proprio", "actions"];

#[derive(Debug, Clone, PartialEq)]
pub struct ExportConfig {
    pub window: WindowConfig,
    pub master_seed: u64,
    /// Enables audio overlays (from `augment`) and image crop/colour jitter.
    pub augment: Option<AugmentSpec>,
    pub image: ImageAugmentConfig,
    /// Worker threads; 0 uses all cores.
    pub jobs: usize,
}

impl ExportConfig {
    pub fn new(audio_window_s: f64, master_seed: u64) -> Self {
        Self {
            window: WindowConfig::new(audio_window_s),
            master_seed,
            augment: None,
            image: ImageAugmentConfig::default(),
            jobs: 0,
        }
    }

    /// The window configuration actually used, with the augmentation spec
    /// (if any) seeded by the master seed.
    pub fn effective_window(&self) -> WindowConfig {
        WindowConfig {
            augment: self.augment.map(|a| AugmentSpec { seed: self.master_seed, ..a }),
            ..self.window.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowTensors {
    pub log_mel: TensorLoc,
    pub images: TensorLoc,
    pub proprio: TensorLoc,
    pub actions: TensorLoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowEntry {
    pub episode_id: String,
    /// Pose index the window is anchored on.
    pub window_index: usize,
    pub t_s: f64,
    /// Shard path relative to the dataset root.
    pub shard: String,
    pub tensors: WindowTensors,
    pub image_refs: Vec<FrameRef>,
    pub image_seed: u64,
    pub image_draws: Option<Vec<ImageDraw>>,
    pub augment: Option<AugmentRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeEntry {
    pub id: String,
    pub shard: String,
    pub environment: String,
    pub latency_s: f64,
    pub n_windows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub format: String,
    pub version: u32,
    pub master_seed: u64,
    pub window_config: WindowConfig,
    pub image_config: ImageAugmentConfig,
    pub augment_images: bool,
    pub pose_layout: Vec<String>,
    pub tensor_order: Vec<String>,
    pub episodes: Vec<EpisodeEntry>,
    pub windows: Vec<WindowEntry>,
}

impl DatasetIndex {
    pub fn read(root: &Path) -> Result<Self> {
        let path = root.join(INDEX_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn shard_name(position: usize, id: &str) -> String {
    let safe: String =
        id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect();
    format!("shards/{position:04}_{safe}.cwav")
}

/// Decodes an image file to RGB in `[0, 1]`.
pub fn load_image(path: &Path) -> Result<Image> {
    let img = image::open(path).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Image { path: path.to_path_buf(), message: other.to_string() },
    })?;
    let rgb = img.to_rgb8();
    let (w, h) = rgb.dimensions();
    let data = rgb.as_raw().iter().map(|&v| f64::from(v) / 255.0).collect();
    Ok(Image::new(h as usize, w as usize, data))
}

struct ImageCache {
    decoded: HashMap<String, Image>,
    resized: HashMap<String, Image>,
}

impl ImageCache {
    fn new() -> Self {
        Self { decoded: HashMap::new(), resized: HashMap::new() }
    }

    fn decoded(&mut self, r: &FrameRef) -> Result<&Image> {
        if !self.decoded.contains_key(&r.path) {
            let img = load_image(Path::new(&r.path))?;
            self.decoded.insert(r.path.clone(), img);
        }
        Ok(&self.decoded[&r.path])
    }

    /// Plain resize to the output size, cached since it is seed independent.
    fn resized(&mut self, r: &FrameRef, cfg: &ImageAugmentConfig) -> Result<&Image> {
        if !self.resized.contains_key(&r.path) {
            let img = self.decoded(r)?.resize_bilinear(cfg.out_height, cfg.out_width);
            self.resized.insert(r.path.clone(), img);
        }
        Ok(&self.resized[&r.path])
    }
}

fn f32s(values: &[f64]) -> impl Iterator<Item = f32> + '_ {
    values.iter().map(|&v| v as f32)
}

fn export_episode(
    episode: &Episode,
    shard: &str,
    out_dir: &Path,
    cfg: &ExportConfig,
    builder: &WindowBuilder,
    corpora: Option<Corpora<'_>>,
) -> Result<Vec<WindowEntry>> {
    let path = out_dir.join(shard);
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let io_err = |e| Error::io(&path, e);
    let mut writer = ContainerWriter::new(BufWriter::new(file)).map_err(io_err)?;
    let mut cache = ImageCache::new();
    let wcfg = builder.config();
    let augment_images = cfg.augment.is_some();
    let mut entries = Vec::new();

    for (_, t_s) in window_times(episode, wcfg.action_horizon) {
        let window = match builder.build(episode, t_s, corpora) {
            Ok(w) => w,
            Err(contactwav_core::Error::InsufficientFuture { .. }) => continue,
            Err(source) => return Err(Error::Window { episode: episode.id.clone(), t_s, source }),
        };
        let obs = &window.observation;

        let mut pixels = Vec::with_capacity(obs.image_refs.len() * cfg.image.out_height * cfg.image.out_width * 3);
        let mut draws = Vec::new();
        for r in &obs.image_refs {
            if augment_images {
                let (img, draw) = augment_image_with(cache.decoded(r)?, &cfg.image, window.image_seed)
                    .map_err(|source| Error::Window { episode: episode.id.clone(), t_s, source })?;
                pixels.extend_from_slice(&img.data);
                draws.push(draw);
            } else {
                pixels.extend_from_slice(&cache.resized(r, &cfg.image)?.data);
            }
        }

        let mel = &obs.log_mel.values;
        let proprio: Vec<f64> = obs.proprio.iter().flatten().copied().collect();
        let actions: Vec<f64> = window.actions.actions.iter().flatten().copied().collect();
        let tensors = WindowTensors {
            log_mel: writer.write_f32(&[mel.rows(), mel.cols()], f32s(mel.as_slice())).map_err(io_err)?,
            images: writer
                .write_f32(&[obs.image_refs.len(), cfg.image.out_height, cfg.image.out_width, 3], f32s(&pixels))
                .map_err(io_err)?,
            proprio: writer.write_f32(&[obs.proprio.len(), POSE_DIM], f32s(&proprio)).map_err(io_err)?,
            actions: writer.write_f32(&[window.actions.actions.len(), POSE_DIM], f32s(&actions)).map_err(io_err)?,
        };
        entries.push(WindowEntry {
            episode_id: episode.id.clone(),
            window_index: window.window_index,
            t_s: obs.t_s,
            shard: shard.to_owned(),
            tensors,
            image_refs: obs.image_refs.clone(),
            image_seed: window.image_seed,
            image_draws: augment_images.then_some(draws),
            augment: window.augment,
        });
    }
    writer.finish().map_err(io_err)?;
    debug!("episode {}: {} windows -> {}", episode.id, entries.len(), path.display());
    Ok(entries)
}

/// Exports every episode into `out_dir` and writes `dataset.json`.
///
/// `corpora` must be given when `cfg.augment` is set.
pub fn export_dataset(
    episodes: &[Episode],
    cfg: &ExportConfig,
    corpora: Option<(&NoiseCorpus, &NoiseCorpus)>,
    out_dir: &Path,
) -> Result<DatasetIndex> {
    let window_cfg = cfg.effective_window();
    let mut ordered: Vec<&Episode> = episodes.iter().collect();
    ordered.sort_by(|a, b| a.id.cmp(&b.id));
    if let Some(pair) = ordered.windows(2).find(|p| p[0].id == p[1].id) {
        return Err(contactwav_core::Error::InvalidConfig(format!("duplicate episode id `{}`", pair[0].id)).into());
    }
    if cfg.augment.is_some() && corpora.is_none() {
        return Err(
            contactwav_core::Error::InvalidConfig("augmentation needs background and robot corpora".into()).into()
        );
    }

    let mut builder = WindowBuilder::new(window_cfg.clone())?;
    for ep in &ordered {
        builder.prepare_rate(ep.audio.sample_rate_hz)?;
    }
    let shards_dir = out_dir.join("shards");
    fs::create_dir_all(&shards_dir).map_err(|e| Error::io(&shards_dir, e))?;

    let corpora = corpora.map(|(background, robot)| Corpora { background, robot });
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| contactwav_core::Error::InvalidConfig(format!("cannot start workers: {e}")))?;
    let per_episode: Vec<Vec<WindowEntry>> = pool.install(|| {
        ordered
            .par_iter()
            .enumerate()
            .map(|(k, ep)| export_episode(ep, &shard_name(k, &ep.id), out_dir, cfg, &builder, corpora))
            .collect::<Result<_>>()
    })?;

    let episodes_index = ordered
        .iter()
        .zip(&per_episode)
        .enumerate()
        .map(|(k, (ep, windows))| EpisodeEntry {
            id: ep.id.clone(),
            shard: shard_name(k, &ep.id),
            environment: ep.environment_tag.clone(),
            latency_s: ep.latency_s,
            n_windows: windows.len(),
        })
        .collect();
    let index = DatasetIndex {
        format: FORMAT_NAME.into(),
        version: FORMAT_VERSION,
        master_seed: cfg.master_seed,
        window_config: window_cfg,
        image_config: cfg.image,
        augment_images: cfg.augment.is_some(),
        pose_layout: POSE_LAYOUT.iter().map(|s| s.to_string()).collect(),
        tensor_order: TENSOR_ORDER.iter().map(|s| s.to_string()).collect(),
        episodes: episodes_index,
        windows: per_episode.into_iter().flatten().collect(),
    };
    let index_path = out_dir.join(INDEX_FILE);
    let mut json = serde_json::to_string_pretty(&index)?;
    json.push('\n');
    fs::write(&index_path, json).map_err(|e| Error::io(&index_path, e))?;
    info!("exported {} windows from {} episodes", index.windows.len(), index.episodes.len());
    Ok(index)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodedWindow {
    pub log_mel: Tensor,
    pub images: Tensor,
    pub proprio: Tensor,
    pub actions: Tensor,
}

/// Random access to an exported dataset.
#[derive(Debug)]
pub struct DatasetReader {
    root: PathBuf,
    pub index: DatasetIndex,
    shards: HashMap<String, Vec<u8>>,
}

impl DatasetReader {
    pub fn open(root: &Path) -> Result<Self> {
        Ok(Self { root: root.to_path_buf(), index: DatasetIndex::read(root)?, shards: HashMap::new() })
    }

    fn shard(&mut self, name: &str) -> Result<&[u8]> {
        if !self.shards.contains_key(name) {
            let path = self.root.join(name);
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            check_header(&bytes)?;
            self.shards.insert(name.to_owned(), bytes);
        }
        Ok(&self.shards[name])
    }

    pub fn window(&mut self, i: usize) -> Result<DecodedWindow> {
        let entry = self.index.windows.get(i).cloned().ok_or_else(|| {
            contactwav_core::Error::InvalidConfig(format!(
                "window {i} out of range ({} windows)",
                self.index.windows.len()
            ))
        })?;
        let bytes = self.shard(&entry.shard)?;
        let read = |loc: &TensorLoc| -> Result<Tensor> {
            let (t, _) = read_tensor_at(bytes, loc.offset as usize)?;
            if t.dims != loc.dims {
                return Err(Error::Container(format!(
                    "dims {:?} at offset {} but index says {:?}",
                    t.dims, loc.offset, loc.dims
                )));
            }
            Ok(t)
        };
        let t = &entry.tensors;
        Ok(DecodedWindow {
            log_mel: read(&t.log_mel)?,
            images: read(&t.images)?,
            proprio: read(&t.proprio)?,
            actions: read(&t.actions)?,
        })
    }
}

/// Hex SHA-256 of a file.
pub fn file_sha256(path: &Path) -> Result<String> {
    let mut file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 20];
    loop {
        let n = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(format!("{:x}", hasher.finalize()))
}

/// Checksums of `dataset.json` and every shard, keyed by relative path.
pub fn dataset_checksums(root: &Path, index: &DatasetIndex) -> Result<Vec<(String, String)>> {
    let mut names: Vec<String> = index.episodes.iter().map(|e| e.shard.clone()).collect();
    names.push(INDEX_FILE.into());
    names.into_iter().map(|n| Ok((n.clone(), file_sha256(&root.join(&n))?))).collect()
}
