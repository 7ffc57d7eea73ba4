//! Deterministic synthetic low-light sequences with exact ground truth.
//!
//! A checkerboard target moves over a background with constant velocity and
//! an optional sinusoidal scale `s(t) = 1 + a sin(2 pi t / T)`. Every frame is
//! multiplied by the illumination `m(t)`, box-blurred, given seeded Gaussian
//! noise and clamped to 8 bits. Each knob drives one attribute: motion and
//! scale feed SV / ARC, `m(t)` feeds IV / LAI, blur sets MB and occlusion
//! intervals set FOC.
//!
//! | preset   | illumination | noise | motion      | scale           | occlusions      |
//! |----------|--------------|-------|-------------|-----------------|-----------------|
//! | easy     | 1            | 0     | 2 px/frame  | none            | none            |
//! | dark     | 15/255       | 3     | 2 px/frame  | none            | none            |
//! | occluded | 1            | 0     | 2 px/frame  | none            | 20-24, 40-42    |
//! | scaled   | 1            | 0     | 1 px/frame  | a = 0.6, T = 40 | none            |
//!
//! All presets use a 320x240 canvas, 60 frames and a 40x30 target with
//! 5 px cells (levels 200 / 90) on a flat background of 40.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::attributes::{Attribute, AttributeSet};
use crate::dataset::{write_annotations, BBox, Frame, Sequence, Visibility, IMG_DIR};
use crate::imaging::save_png;
use crate::{Error, Result};

/// Flat key-value description of a synthetic sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub name: String,
    pub width: u32,
    pub height: u32,
    pub frames: usize,
    /// Target size at scale 1.
    pub target_width: u32,
    pub target_height: u32,
    /// Top-left of the target on the first frame.
    pub start_x: f64,
    pub start_y: f64,
    /// Checkerboard cell side in pixels; 0 gives a flat target.
    pub cell_size: u32,
    pub target_high: f64,
    pub target_low: f64,
    pub background: f64,
    /// Amplitude of a smooth seeded background pattern.
    pub background_texture: f64,
    pub velocity_x: f64,
    pub velocity_y: f64,
    pub scale_amplitude: f64,
    pub scale_period: f64,
    /// Illumination multiplier on the first frame.
    pub illumination: f64,
    /// If set, illumination ramps linearly to this value on the last frame.
    pub illumination_end: Option<f64>,
    pub noise_sigma: f64,
    pub blur_radius: u32,
    /// Inclusive 1-based frame ranges, e.g. `"20-24,40-42"`.
    pub occlusions: String,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            name: "synth".into(),
            width: 320,
            height: 240,
            frames: 60,
            target_width: 40,
            target_height: 30,
            start_x: 40.0,
            start_y: 100.0,
            cell_size: 5,
            target_high: 200.0,
            target_low: 90.0,
            background: 40.0,
            background_texture: 0.0,
            velocity_x: 2.0,
            velocity_y: 0.0,
            scale_amplitude: 0.0,
            scale_period: 40.0,
            illumination: 1.0,
            illumination_end: None,
            noise_sigma: 0.0,
            blur_radius: 0,
            occlusions: String::new(),
            seed: 1,
        }
    }
}

pub const PRESETS: [&str; 4] = ["easy", "dark", "occluded", "scaled"];

pub fn preset(name: &str) -> Result<SynthSpec> {
    let base = SynthSpec {
        name: name.to_string(),
        ..SynthSpec::default()
    };
    let spec = match name {
        "easy" => base,
        "dark" => SynthSpec {
            illumination: 15.0 / 255.0,
            noise_sigma: 3.0,
            seed: 2,
            ..base
        },
        "occluded" => SynthSpec {
            occlusions: "20-24,40-42".into(),
            seed: 3,
            ..base
        },
        "scaled" => SynthSpec {
            velocity_x: 1.0,
            scale_amplitude: 0.6,
            scale_period: 40.0,
            start_x: 80.0,
            seed: 4,
            ..base
        },
        other => {
            return Err(Error::invalid(format!(
                "unknown preset {other:?} (expected one of {})",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(spec)
}

/// In-memory rendering of a sequence. Image paths are relative to the
/// sequence directory.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub sequence: Sequence,
    pub images: Vec<RgbImage>,
}

impl SynthSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SynthSpec = serde_json::from_str(text)?;
        spec.check()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn occlusion_ranges(&self) -> Result<Vec<(usize, usize)>> {
        let mut out = Vec::new();
        for part in self
            .occlusions
            .split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
        {
            let (a, b) = part.split_once('-').unwrap_or((part, part));
            let parse = |s: &str| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::invalid(format!("bad occlusion range {part:?}")))
            };
            let (a, b) = (parse(a)?, parse(b)?);
            if a == 0 || b < a {
                return Err(Error::invalid(format!("bad occlusion range {part:?}")));
            }
            out.push((a, b));
        }
        Ok(out)
    }

    /// `s(t)` for the 0-based frame offset `t`.
    pub fn scale_at(&self, t: usize) -> f64 {
        if self.scale_amplitude == 0.0 {
            return 1.0;
        }
        1.0 + self.scale_amplitude * (2.0 * PI * t as f64 / self.scale_period).sin()
    }

    /// `m(t)` for the 0-based frame offset `t`.
    pub fn illumination_at(&self, t: usize) -> f64 {
        match self.illumination_end {
            Some(end) if self.frames > 1 => {
                let f = t as f64 / (self.frames - 1) as f64;
                self.illumination + (end - self.illumination) * f
            }
            _ => self.illumination,
        }
    }

    /// Exact target extent on the pixel grid for frame offset `t`.
    pub fn box_at(&self, t: usize) -> BBox {
        let s = self.scale_at(t);
        let w = (self.target_width as f64 * s).round().max(1.0);
        let h = (self.target_height as f64 * s).round().max(1.0);
        let cx = self.start_x + self.target_width as f64 / 2.0 + self.velocity_x * t as f64;
        let cy = self.start_y + self.target_height as f64 / 2.0 + self.velocity_y * t as f64;
        BBox::new((cx - w / 2.0).round(), (cy - h / 2.0).round(), w, h)
    }

    pub fn is_occluded(&self, index: usize, ranges: &[(usize, usize)]) -> bool {
        ranges.iter().any(|&(a, b)| (a..=b).contains(&index))
    }

    /// Checks field ranges and occlusion syntax.
    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::invalid(m));
        if self.frames < 2 {
            return bad(format!("frames must be >= 2, got {}", self.frames));
        }
        if self.width == 0 || self.height == 0 || self.target_width == 0 || self.target_height == 0
        {
            return bad("canvas and target sizes must be positive".into());
        }
        if self.scale_amplitude.abs() >= 1.0 {
            return bad("scale_amplitude must be in (-1, 1)".into());
        }
        if self.scale_amplitude != 0.0 && !(self.scale_period > 0.0) {
            return bad("scale_period must be > 0".into());
        }
        if !(self.noise_sigma >= 0.0) {
            return bad("noise_sigma must be >= 0".into());
        }
        for t in 0..self.frames {
            let m = self.illumination_at(t);
            if !(m > 0.0 && m <= 1.0) {
                return bad(format!(
                    "illumination {m} at frame {} is outside (0, 1]",
                    t + 1
                ));
            }
            let b = self.box_at(t);
            if b.x < 0.0
                || b.y < 0.0
                || b.right() > self.width as f64
                || b.bottom() > self.height as f64
            {
                return bad(format!("target {b} leaves the canvas at frame {}", t + 1));
            }
        }
        let ranges = self.occlusion_ranges()?;
        if self.is_occluded(1, &ranges) {
            return bad("the first frame cannot be occluded".into());
        }
        Ok(())
    }

    /// Manual attributes implied by the knobs.
    pub fn implied_attributes(&self) -> Result<AttributeSet> {
        let mut set = AttributeSet::empty();
        if !self.occlusion_ranges()?.is_empty() {
            set.set(Attribute::FOC, true);
        }
        if self.blur_radius > 0 {
            set.set(Attribute::MB, true);
        }
        if matches!(self.illumination_end, Some(e) if e != self.illumination) {
            set.set(Attribute::IV, true);
        }
        Ok(set)
    }

    fn background_at(&self, x: usize, y: usize) -> f64 {
        if self.background_texture == 0.0 {
            return self.background;
        }
        // seeded phases keep the pattern a function of (seed, x, y) only
        let phase = |k: u64| {
            ((self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) >> (8 * k)) & 0xff) as f64 / 40.0
        };
        let (x, y) = (x as f64, y as f64);
        let p = ((0.11 * x + phase(0)).sin() * (0.07 * y + phase(1)).cos()
            + (0.05 * x - 0.09 * y + phase(2)).sin())
            / 2.0;
        self.background + self.background_texture * p
    }

    fn target_at(&self, bbox: &BBox, px: usize, py: usize) -> f64 {
        if self.cell_size == 0 {
            return self.target_high;
        }
        let u = ((px as f64 - bbox.x) + 0.5) * self.target_width as f64 / bbox.w;
        let v = ((py as f64 - bbox.y) + 0.5) * self.target_height as f64 / bbox.h;
        let cell = self.cell_size as f64;
        let parity = ((u / cell).floor() as i64 + (v / cell).floor() as i64).rem_euclid(2);
        if parity == 0 {
            self.target_high
        } else {
            self.target_low
        }
    }

    /// Frame at 0-based offset `t`, before conversion to 8 bits.
    fn render_float(&self, t: usize, occluded: bool) -> Vec<f64> {
        let (w, h) = (self.width as usize, self.height as usize);
        let m = self.illumination_at(t);
        let bbox = self.box_at(t);
        let mut buf = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                buf[y * w + x] = self.background_at(x, y);
            }
        }
        if !occluded {
            let (x0, y0) = (bbox.x as usize, bbox.y as usize);
            for y in y0..y0 + bbox.h as usize {
                for x in x0..x0 + bbox.w as usize {
                    buf[y * w + x] = self.target_at(&bbox, x, y);
                }
            }
        }
        for v in &mut buf {
            *v *= m;
        }
        if self.blur_radius > 0 {
            buf = box_blur(&buf, w, h, self.blur_radius as usize);
        }
        if self.noise_sigma > 0.0 {
            // one stream per frame: noise depends only on (seed, frame, pixel)
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            rng.set_stream(t as u64);
            for v in &mut buf {
                let n: f64 = StandardNormal.sample(&mut rng);
                *v += self.noise_sigma * n;
            }
        }
        buf
    }

    pub fn render_frame(&self, t: usize) -> Result<RgbImage> {
        let ranges = self.occlusion_ranges()?;
        Ok(self.to_image(&self.render_float(t, self.is_occluded(t + 1, &ranges))))
    }

    fn to_image(&self, buf: &[f64]) -> RgbImage {
        let w = self.width as usize;
        RgbImage::from_fn(self.width, self.height, |x, y| {
            let v = buf[y as usize * w + x as usize].round().clamp(0.0, 255.0) as u8;
            Rgb([v, v, v])
        })
    }

    /// Ground-truth sequence without pixels.
    pub fn sequence(&self) -> Result<Sequence> {
        self.check()?;
        let ranges = self.occlusion_ranges()?;
        let frames = (0..self.frames)
            .map(|t| {
                let index = t + 1;
                let occluded = self.is_occluded(index, &ranges);
                Frame {
                    index,
                    image_path: PathBuf::from(IMG_DIR).join(frame_file_name(index)),
                    gt: (!occluded).then(|| self.box_at(t)),
                    visibility: if occluded {
                        Visibility::FOC
                    } else {
                        Visibility::Visible
                    },
                }
            })
            .collect();
        Ok(Sequence {
            name: self.name.clone(),
            frames,
            manual_attributes: self.implied_attributes()?,
            image_size: (self.width, self.height),
        })
    }

    /// Renders every frame; frames are spread over the available cores.
    pub fn render(&self) -> Result<SynthOutput> {
        let sequence = self.sequence()?;
        let occluded: Vec<bool> = sequence
            .frames
            .iter()
            .map(|f| f.visibility == Visibility::FOC)
            .collect();
        let threads = std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
            .min(self.frames);
        let mut images: Vec<Option<RgbImage>> = vec![None; self.frames];
        if threads <= 1 {
            for (t, slot) in images.iter_mut().enumerate() {
                *slot = Some(self.to_image(&self.render_float(t, occluded[t])));
            }
        } else {
            let chunk = self.frames.div_ceil(threads);
            std::thread::scope(|s| {
                for (c, slots) in images.chunks_mut(chunk).enumerate() {
                    let occluded = &occluded;
                    s.spawn(move || {
                        for (k, slot) in slots.iter_mut().enumerate() {
                            let t = c * chunk + k;
                            *slot = Some(self.to_image(&self.render_float(t, occluded[t])));
                        }
                    });
                }
            });
        }
        Ok(SynthOutput {
            sequence,
            images: images.into_iter().map(|i| i.expect("rendered")).collect(),
        })
    }
}

pub fn frame_file_name(index: usize) -> String {
    format!("{index:08}.png")
}

/// Separable mean filter with clamped edges.
fn box_blur(src: &[f64], w: usize, h: usize, r: usize) -> Vec<f64> {
    let k = (2 * r + 1) as f64;
    let clamp = |v: isize, max: usize| v.clamp(0, max as isize - 1) as usize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut s = 0.0;
            for d in -(r as isize)..=(r as isize) {
                s += src[y * w + clamp(x as isize + d, w)];
            }
            tmp[y * w + x] = s / k;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut s = 0.0;
            for d in -(r as isize)..=(r as isize) {
                s += tmp[clamp(y as isize + d, h) * w + x];
            }
            out[y * w + x] = s / k;
        }
    }
    out
}

/// Renders `spec` into `dir` in the dataset layout and returns the sequence
/// with absolute image paths.
pub fn generate(spec: &SynthSpec, dir: &Path) -> Result<Sequence> {
    let SynthOutput {
        mut sequence,
        images,
    } = spec.render()?;
    let img_dir = dir.join(IMG_DIR);
    fs::create_dir_all(&img_dir).map_err(|e| Error::io(&img_dir, e))?;
    for (frame, image) in sequence.frames.iter_mut().zip(&images) {
        frame.image_path = dir.join(&frame.image_path);
        save_png(image, &frame.image_path)?;
    }
    write_annotations(&sequence, dir)?;
    Ok(sequence)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_match_documentation() {
        let easy = preset("easy").unwrap();
        assert_eq!(
            (easy.noise_sigma, easy.illumination, easy.velocity_x),
            (0.0, 1.0, 2.0)
        );
        let dark = preset("dark").unwrap();
        assert_eq!((dark.illumination, dark.noise_sigma), (15.0 / 255.0, 3.0));
        let scaled = preset("scaled").unwrap();
        assert_eq!((scaled.scale_amplitude, scaled.scale_period), (0.6, 40.0));
        assert!(preset("bright").is_err());
        for p in PRESETS {
            preset(p).unwrap().check().unwrap();
        }
    }

    #[test]
    fn easy_moves_two_pixels_per_frame() {
        let s = preset("easy").unwrap();
        for t in 0..s.frames {
            assert_eq!(
                s.box_at(t),
                BBox::new(40.0 + 2.0 * t as f64, 100.0, 40.0, 30.0)
            );
        }
    }

    #[test]
    fn noise_free_target_is_analytic_patch_times_illumination() {
        let spec = SynthSpec {
            illumination: 0.5,
            frames: 3,
            ..SynthSpec::default()
        };
        let img = spec.render_frame(1).unwrap();
        let b = spec.box_at(1);
        for y in b.y as u32..(b.y + b.h) as u32 {
            for x in b.x as u32..(b.x + b.w) as u32 {
                let expected = (spec.target_at(&b, x as usize, y as usize) * 0.5).round() as u8;
                assert_eq!(img.get_pixel(x, y).0[0], expected);
            }
        }
        assert_eq!(img.get_pixel(0, 0).0[0], 20);
    }

    #[test]
    fn invalid_specs_rejected() {
        let frames = SynthSpec {
            frames: 1,
            ..SynthSpec::default()
        };
        assert!(frames.check().is_err());
        let light = SynthSpec {
            illumination: 1.5,
            ..SynthSpec::default()
        };
        assert!(light.check().is_err());
        let off = SynthSpec {
            velocity_x: 10.0,
            ..SynthSpec::default()
        };
        assert!(off.check().is_err());
        let occ = SynthSpec {
            occlusions: "1-3".into(),
            ..SynthSpec::default()
        };
        assert!(occ.check().is_err());
        let bad = SynthSpec {
            occlusions: "5-x".into(),
            ..SynthSpec::default()
        };
        assert!(bad.check().is_err());
    }

    #[test]
    fn json_round_trip_and_unknown_keys() {
        let s = preset("occluded").unwrap();
        assert_eq!(SynthSpec::from_json(&s.to_json()).unwrap(), s);
        assert!(SynthSpec::from_json(r#"{"frames": 10, "warp": 1}"#).is_err());
        let partial = SynthSpec::from_json(r#"{"frames": 10, "noise_sigma": 2.5}"#).unwrap();
        assert_eq!(
            (partial.frames, partial.noise_sigma, partial.width),
            (10, 2.5, 320)
        );
    }

    #[test]
    fn occlusion_labels_frame_exact() {
        let s = preset("occluded").unwrap();
        let seq = s.sequence().unwrap();
        for f in &seq.frames {
            let occluded = (20..=24).contains(&f.index) || (40..=42).contains(&f.index);
            assert_eq!(
                f.visibility == Visibility::FOC,
                occluded,
                "frame {}",
                f.index
            );
            assert_eq!(f.gt.is_none(), occluded);
        }
        assert!(seq.manual_attributes.contains(Attribute::FOC));
    }

    #[test]
    fn blur_preserves_constant() {
        let out = box_blur(&[7.0; 30], 6, 5, 2);
        assert!(out.iter().all(|v| (v - 7.0).abs() < 1e-12));
    }
}
