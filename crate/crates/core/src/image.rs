//! Random crop + colour jitter for RGB frames.
//!
//! Jitter follows the usual brightness/contrast/saturation/hue semantics,
//! applied in that fixed order with a clamp to `[0, 1]` after each step:
//!
//! * brightness: `img * b`, `b ~ U[1 - 0.3, 1 + 0.3]`
//! * contrast: blend towards the image's mean luminance, `c ~ U[0.6, 1.4]`
//! * saturation: blend towards per-pixel luminance, `s ~ U[0.5, 1.5]`
//! * hue: rotate HSV hue by `h ~ U[-0.08, 0.08]` of a full turn
//!
//! Luminance is `0.299 R + 0.587 G + 0.114 B`.

use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const MIN_SIDE: usize = 32;

/// Interleaved RGB image, row-major, channel values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), height * width * 3, "image data length mismatch");
        Self { height, width, data }
    }

    pub fn filled(height: usize, width: usize, rgb: [f64; 3]) -> Self {
        let data = (0..height * width).flat_map(|_| rgb).collect();
        Self { height, width, data }
    }

    #[inline]
    pub fn pixel(&self, y: usize, x: usize) -> [f64; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    fn pixels_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.data.chunks_exact_mut(3)
    }

    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Image {
        assert!(top + height <= self.height && left + width <= self.width, "crop out of bounds");
        let mut data = Vec::with_capacity(height * width * 3);
        for y in top..top + height {
            let row = (y * self.width + left) * 3;
            data.extend_from_slice(&self.data[row..row + width * 3]);
        }
        Image { height, width, data }
    }

    /// Bilinear resize with half-pixel centres and edge clamping.
    pub fn resize_bilinear(&self, height: usize, width: usize) -> Image {
        let sy = self.height as f64 / height as f64;
        let sx = self.width as f64 / width as f64;
        let taps = |dst: usize, scale: f64, src_len: usize| {
            let pos = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (src_len - 1) as f64);
            let lo = libm::floor(pos) as usize;
            let hi = (lo + 1).min(src_len - 1);
            (lo, hi, pos - lo as f64)
        };
        let cols: Vec<_> = (0..width).map(|x| taps(x, sx, self.width)).collect();
        let mut data = Vec::with_capacity(height * width * 3);
        for y in 0..height {
            let (y0, y1, fy) = taps(y, sy, self.height);
            for &(x0, x1, fx) in &cols {
                let (a, b, c, d) = (self.pixel(y0, x0), self.pixel(y0, x1), self.pixel(y1, x0), self.pixel(y1, x1));
                for ch in 0..3 {
                    let top = a[ch] + (b[ch] - a[ch]) * fx;
                    let bottom = c[ch] + (d[ch] - c[ch]) * fx;
                    data.push(top + (bottom - top) * fy);
                }
            }
        }
        Image { height, width, data }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageAugmentConfig {
    pub crop_ratio: f64,
    /// Uniform random crop offset; `false` takes the centre crop.
    pub random_crop: bool,
    pub brightness: f64,
    pub contrast: f64,
    pub saturation: f64,
    pub hue: f64,
    pub out_height: usize,
    pub out_width: usize,
}

impl Default for ImageAugmentConfig {
    fn default() -> Self {
        Self {
            crop_ratio: 0.95,
            random_crop: true,
            brightness: 0.3,
            contrast: 0.4,
            saturation: 0.5,
            hue: 0.08,
            out_height: 224,
            out_width: 224,
        }
    }
}

impl ImageAugmentConfig {
    /// Crop and resize only; every jitter factor is the identity.
    pub fn without_jitter() -> Self {
        Self { brightness: 0.0, contrast: 0.0, saturation: 0.0, hue: 0.0, ..Self::default() }
    }
}

/// Every random quantity used by one [`augment_image`] call.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageDraw {
    pub crop_top: usize,
    pub crop_left: usize,
    pub crop_height: usize,
    pub crop_width: usize,
    pub brightness: f64,
    pub contrast: f64,
    pub saturation: f64,
    pub hue_shift: f64,
}

pub fn draw_image_params(height: usize, width: usize, cfg: &ImageAugmentConfig, seed: u64) -> Result<ImageDraw> {
    if height < MIN_SIDE || width < MIN_SIDE {
        return Err(Error::ImageTooSmall { height, width });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let crop_height = (libm::round(cfg.crop_ratio * height as f64) as usize).clamp(1, height);
    let crop_width = (libm::round(cfg.crop_ratio * width as f64) as usize).clamp(1, width);
    let (crop_top, crop_left) = if cfg.random_crop {
        (rng.gen_range(0..=height - crop_height), rng.gen_range(0..=width - crop_width))
    } else {
        ((height - crop_height) / 2, (width - crop_width) / 2)
    };
    let mut factor = |spread: f64, center: f64| {
        let u: f64 = rng.gen();
        if spread == 0.0 {
            center
        } else {
            center - spread + 2.0 * spread * u
        }
    };
    let brightness = factor(cfg.brightness, 1.0);
    let contrast = factor(cfg.contrast, 1.0);
    let saturation = factor(cfg.saturation, 1.0);
    let hue_shift = factor(cfg.hue, 0.0);
    Ok(ImageDraw { crop_top, crop_left, crop_height, crop_width, brightness, contrast, saturation, hue_shift })
}

/// Seeded crop, resize to the configured output size, then colour jitter.
pub fn augment_image(img: &Image, seed: u64) -> Result<Image> {
    augment_image_with(img, &ImageAugmentConfig::default(), seed).map(|(out, _)| out)
}

pub fn augment_image_with(img: &Image, cfg: &ImageAugmentConfig, seed: u64) -> Result<(Image, ImageDraw)> {
    let draw = draw_image_params(img.height, img.width, cfg, seed)?;
    Ok((apply_image_draw(img, &draw, cfg), draw))
}

pub fn apply_image_draw(img: &Image, draw: &ImageDraw, cfg: &ImageAugmentConfig) -> Image {
    let cropped = img.crop(draw.crop_top, draw.crop_left, draw.crop_height, draw.crop_width);
    let mut out = cropped.resize_bilinear(cfg.out_height, cfg.out_width);
    jitter(&mut out, draw);
    out
}

/// Brightness, contrast, saturation, hue, in that order.
pub fn jitter(img: &mut Image, draw: &ImageDraw) {
    if draw.brightness != 1.0 {
        for v in img.data.iter_mut() {
            *v = (*v * draw.brightness).clamp(0.0, 1.0);
        }
    }
    if draw.contrast != 1.0 {
        let n = (img.height * img.width) as f64;
        let mean = img.data.chunks_exact(3).map(|p| luminance([p[0], p[1], p[2]])).sum::<f64>() / n;
        for v in img.data.iter_mut() {
            *v = blend(*v, mean, draw.contrast);
        }
    }
    if draw.saturation != 1.0 {
        for p in img.pixels_mut() {
            let gray = luminance([p[0], p[1], p[2]]);
            for v in p.iter_mut() {
                *v = blend(*v, gray, draw.saturation);
            }
        }
    }
    if draw.hue_shift != 0.0 {
        rotate_hue(img, draw.hue_shift);
    }
}

/// Rotates hue by `shift` turns; a shift of exactly 1.0 is the identity up to
/// HSV round-trip rounding.
pub fn rotate_hue(img: &mut Image, shift: f64) {
    for p in img.pixels_mut() {
        let (h, s, v) = rgb_to_hsv([p[0], p[1], p[2]]);
        let mut h = h + shift;
        h -= libm::floor(h);
        let rgb = hsv_to_rgb(h, s, v);
        p.copy_from_slice(&rgb);
    }
}

pub fn luminance(rgb: [f64; 3]) -> f64 {
    0.299 * rgb[0] + 0.587 * rgb[1] + 0.114 * rgb[2]
}

fn blend(v: f64, toward: f64, factor: f64) -> f64 {
    (factor * v + (1.0 - factor) * toward).clamp(0.0, 1.0)
}

fn rgb_to_hsv([r, g, b]: [f64; 3]) -> (f64, f64, f64) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    if delta == 0.0 {
        return (0.0, s, max);
    }
    let h = if max == r {
        (g - b) / delta
    } else if max == g {
        2.0 + (b - r) / delta
    } else {
        4.0 + (r - g) / delta
    };
    let h = h / 6.0;
    (h - libm::floor(h), s, max)
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [f64; 3] {
    let h6 = h * 6.0;
    let sector = libm::floor(h6);
    let f = h6 - sector;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match (sector as i64).rem_euclid(6) {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gradient(h: usize, w: usize) -> Image {
        let mut data = Vec::new();
        for y in 0..h {
            for x in 0..w {
                data.extend([x as f64 / w as f64, y as f64 / h as f64, ((x * 7 + y * 3) % 11) as f64 / 10.0]);
            }
        }
        Image::new(h, w, data)
    }

    #[test]
    fn too_small() {
        assert_eq!(
            augment_image(&Image::filled(31, 64, [0.5; 3]), 0),
            Err(Error::ImageTooSmall { height: 31, width: 64 })
        );
    }

    #[test]
    fn identity_jitter_is_centre_crop_resize() {
        let img = gradient(224, 224);
        let cfg = ImageAugmentConfig { random_crop: false, ..ImageAugmentConfig::without_jitter() };
        let (out, draw) = augment_image_with(&img, &cfg, 99).unwrap();
        assert_eq!((draw.crop_height, draw.crop_width), (213, 213));
        assert_eq!((draw.crop_top, draw.crop_left), (5, 5));
        let expected = img.crop(5, 5, 213, 213).resize_bilinear(224, 224);
        assert_eq!(out, expected);
    }

    #[test]
    fn resize_same_size_is_identity() {
        let img = gradient(40, 50);
        assert_eq!(img.resize_bilinear(40, 50), img);
    }

    #[test]
    fn gray_only_sees_brightness() {
        let g = 0.4;
        let img = Image::filled(64, 48, [g; 3]);
        for seed in 0..20 {
            let (out, draw) = augment_image_with(&img, &ImageAugmentConfig::default(), seed).unwrap();
            let want = (draw.brightness * g).clamp(0.0, 1.0);
            assert!(out.data.iter().all(|v| (v - want).abs() < 1e-12), "seed {seed}");
        }
    }

    #[test]
    fn full_hue_turn_is_identity() {
        let img = gradient(40, 40);
        let mut turned = img.clone();
        rotate_hue(&mut turned, 1.0);
        for (a, b) in img.data.iter().zip(&turned.data) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn draws_respect_ranges() {
        for seed in 0..200 {
            let d = draw_image_params(100, 120, &ImageAugmentConfig::default(), seed).unwrap();
            assert!((0.7..=1.3).contains(&d.brightness));
            assert!((0.6..=1.4).contains(&d.contrast));
            assert!((0.5..=1.5).contains(&d.saturation));
            assert!((-0.08..=0.08).contains(&d.hue_shift));
            assert_eq!((d.crop_height, d.crop_width), (95, 114));
            assert!(d.crop_top <= 5 && d.crop_left <= 6);
        }
    }

    proptest! {
        #[test]
        fn shape_and_range(h in 32usize..90, w in 32usize..90, seed in any::<u64>()) {
            let out = augment_image(&gradient(h, w), seed).unwrap();
            prop_assert_eq!((out.height, out.width, out.data.len()), (224, 224, 224 * 224 * 3));
            prop_assert!(out.data.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
