use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::dataset::BBox;
use crate::imaging::luma_milli;
use crate::ope::Tracker;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NccConfig {
    /// Half-width of the square search region, in pixels.
    pub search_radius: i64,
}

impl Default for NccConfig {
    fn default() -> Self {
        Self { search_radius: 20 }
    }
}

/// Luma scaled by 1000 in exact integers, with summed-area tables for
/// window sums.
#[derive(Debug, Clone)]
pub struct LumaIntegral {
    pub width: i64,
    pub height: i64,
    pub values: Vec<i64>,
    sum: Vec<i128>,
    sum_sq: Vec<i128>,
}

impl LumaIntegral {
    pub fn new(image: &RgbImage) -> Self {
        let width = image.width() as i64;
        let height = image.height() as i64;
        let values: Vec<i64> = image.pixels().map(|p| luma_milli(p.0) as i64).collect();
        let stride = (width + 1) as usize;
        let mut sum = vec![0i128; stride * (height + 1) as usize];
        let mut sum_sq = sum.clone();
        for y in 0..height as usize {
            let mut row = 0i128;
            let mut row_sq = 0i128;
            for x in 0..width as usize {
                let v = values[y * width as usize + x] as i128;
                row += v;
                row_sq += v * v;
                sum[(y + 1) * stride + x + 1] = sum[y * stride + x + 1] + row;
                sum_sq[(y + 1) * stride + x + 1] = sum_sq[y * stride + x + 1] + row_sq;
            }
        }
        Self {
            width,
            height,
            values,
            sum,
            sum_sq,
        }
    }

    fn rect(table: &[i128], stride: usize, x: i64, y: i64, w: i64, h: i64) -> i128 {
        let (x0, y0, x1, y1) = (x as usize, y as usize, (x + w) as usize, (y + h) as usize);
        table[y1 * stride + x1] - table[y0 * stride + x1] - table[y1 * stride + x0]
            + table[y0 * stride + x0]
    }

    /// (sum, sum of squares) over the window.
    pub fn window_sums(&self, x: i64, y: i64, w: i64, h: i64) -> (i128, i128) {
        let stride = (self.width + 1) as usize;
        (
            Self::rect(&self.sum, stride, x, y, w, h),
            Self::rect(&self.sum_sq, stride, x, y, w, h),
        )
    }

    pub fn contains(&self, x: i64, y: i64, w: i64, h: i64) -> bool {
        x >= 0 && y >= 0 && x + w <= self.width && y + h <= self.height
    }

    pub fn window(&self, x: i64, y: i64, w: i64, h: i64) -> Vec<i64> {
        let mut out = Vec::with_capacity((w * h) as usize);
        for row in y..y + h {
            let start = (row * self.width + x) as usize;
            out.extend_from_slice(&self.values[start..start + w as usize]);
        }
        out
    }
}

/// Candidate displacement with its zero-normalized cross-correlation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub dx: i64,
    pub dy: i64,
    pub score: f64,
}

impl Candidate {
    fn dist2(&self) -> i64 {
        self.dx * self.dx + self.dy * self.dy
    }
}

/// Exhaustive zero-normalized cross-correlation against a fixed template.
///
/// The template is the initialization box rounded to the pixel grid and is
/// never updated. Each update scores every in-image offset within the
/// search radius; windows (or templates) without variance score -1.
#[derive(Debug, Clone)]
pub struct NccTracker {
    config: NccConfig,
    template: Vec<i64>,
    tw: i64,
    th: i64,
    t_sum: i128,
    t_var: i128,
    /// Integer top-left of the current window.
    pos: (i64, i64),
    bbox: Option<BBox>,
}

impl NccTracker {
    pub fn new(config: NccConfig) -> Self {
        Self {
            config,
            template: Vec::new(),
            tw: 0,
            th: 0,
            t_sum: 0,
            t_var: 0,
            pos: (0, 0),
            bbox: None,
        }
    }

    pub fn current(&self) -> Option<BBox> {
        self.bbox
    }

    pub fn init_with(&mut self, luma: &LumaIntegral, bbox: BBox) -> Result<()> {
        let x = bbox.x.round() as i64;
        let y = bbox.y.round() as i64;
        let w = bbox.w.round() as i64;
        let h = bbox.h.round() as i64;
        if w < 1 || h < 1 || !luma.contains(x, y, w, h) {
            return Err(Error::data(format!(
                "template {bbox} does not fit inside the {}x{} image",
                luma.width, luma.height
            )));
        }
        self.template = luma.window(x, y, w, h);
        self.tw = w;
        self.th = h;
        let n = (w * h) as i128;
        self.t_sum = self.template.iter().map(|&v| v as i128).sum();
        let t_sq: i128 = self
            .template
            .iter()
            .map(|&v| (v as i128) * (v as i128))
            .sum();
        self.t_var = n * t_sq - self.t_sum * self.t_sum;
        self.pos = (x, y);
        self.bbox = Some(bbox);
        Ok(())
    }

    /// Score of the window with top-left `(x, y)`.
    fn score_at(&self, luma: &LumaIntegral, x: i64, y: i64) -> f64 {
        if self.t_var == 0 {
            return -1.0;
        }
        let n = (self.tw * self.th) as i128;
        let (s, sq) = luma.window_sums(x, y, self.tw, self.th);
        let w_var = n * sq - s * s;
        if w_var == 0 {
            return -1.0;
        }
        let mut cross: i128 = 0;
        let mut t = self.template.iter();
        for row in y..y + self.th {
            let start = (row * luma.width + x) as usize;
            for &v in &luma.values[start..start + self.tw as usize] {
                cross += (*t.next().unwrap() as i128) * (v as i128);
            }
        }
        let num = n * cross - self.t_sum * s;
        num as f64 / ((self.t_var as f64) * (w_var as f64)).sqrt()
    }

    /// Every in-image offset within the radius, row-major (dy, then dx).
    pub fn candidates(&self, luma: &LumaIntegral) -> Vec<Candidate> {
        let r = self.config.search_radius;
        let mut out = Vec::with_capacity(((2 * r + 1) * (2 * r + 1)) as usize);
        for dy in -r..=r {
            for dx in -r..=r {
                let (x, y) = (self.pos.0 + dx, self.pos.1 + dy);
                if !luma.contains(x, y, self.tw, self.th) {
                    continue;
                }
                out.push(Candidate {
                    dx,
                    dy,
                    score: self.score_at(luma, x, y),
                });
            }
        }
        out
    }

    /// Highest score; ties go to the smallest displacement, then to the
    /// first in row-major order.
    pub fn best(candidates: &[Candidate]) -> Option<Candidate> {
        let mut best: Option<Candidate> = None;
        for c in candidates {
            best = match best {
                None => Some(*c),
                Some(b) if c.score > b.score || (c.score == b.score && c.dist2() < b.dist2()) => {
                    Some(*c)
                }
                keep => keep,
            };
        }
        best
    }

    /// Moves the window by an accepted displacement.
    pub fn shift(&mut self, dx: i64, dy: i64) -> BBox {
        let b = self
            .bbox
            .expect("update before init")
            .translated(dx as f64, dy as f64);
        self.pos = (self.pos.0 + dx, self.pos.1 + dy);
        self.bbox = Some(b);
        b
    }

    pub fn update_with(&mut self, luma: &LumaIntegral) -> BBox {
        match Self::best(&self.candidates(luma)) {
            Some(c) => self.shift(c.dx, c.dy),
            None => self.bbox.expect("update before init"),
        }
    }
}

impl Tracker for NccTracker {
    fn name(&self) -> &str {
        "ncc"
    }

    fn init(&mut self, image: &RgbImage, bbox: BBox) -> Result<()> {
        self.init_with(&LumaIntegral::new(image), bbox)
    }

    fn update(&mut self, image: &RgbImage) -> BBox {
        self.update_with(&LumaIntegral::new(image))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;

    fn textured(w: u32, h: u32, seed: u64) -> RgbImage {
        RgbImage::from_fn(w, h, |x, y| {
            let mut v = seed ^ ((x as u64) << 32 | y as u64);
            v = v.wrapping_mul(0x9E37_79B9_7F4A_7C15);
            v ^= v >> 29;
            let g = (v % 100) as u8 + 20;
            Rgb([g, g, g])
        })
    }

    /// Shifted copy: content at (x, y) moves to (x + dx, y + dy).
    fn shifted(img: &RgbImage, dx: i64, dy: i64) -> RgbImage {
        RgbImage::from_fn(img.width(), img.height(), |x, y| {
            let sx = (x as i64 - dx).clamp(0, img.width() as i64 - 1) as u32;
            let sy = (y as i64 - dy).clamp(0, img.height() as i64 - 1) as u32;
            *img.get_pixel(sx, sy)
        })
    }

    #[test]
    fn exact_shift_recovered() {
        let img = textured(120, 100, 3);
        let b = BBox::new(40.0, 30.0, 20.0, 16.0);
        let mut t = NccTracker::new(NccConfig::default());
        t.init(&img, b).unwrap();
        let out = t.update(&shifted(&img, 7, -5));
        assert_eq!(out, b.translated(7.0, -5.0));
    }

    #[test]
    fn textureless_holds_position() {
        let img = RgbImage::from_pixel(80, 80, Rgb([90, 90, 90]));
        let b = BBox::new(20.0, 20.0, 10.0, 10.0);
        let mut t = NccTracker::new(NccConfig::default());
        t.init(&img, b).unwrap();
        assert_eq!(t.update(&img), b);
    }

    #[test]
    fn jump_beyond_radius_matches_exhaustive_window() {
        let img = textured(160, 120, 5);
        let b = BBox::new(50.0, 40.0, 20.0, 20.0);
        let moved = shifted(&img, 30, 0);
        let mut t = NccTracker::new(NccConfig::default());
        t.init(&img, b).unwrap();
        let luma = LumaIntegral::new(&moved);
        let cands = t.candidates(&luma);
        // brute force over the same window with a float ZNCC
        let tpl = LumaIntegral::new(&img).window(50, 40, 20, 20);
        let zncc = |xs: &[i64], ys: &[i64]| {
            let n = xs.len() as f64;
            let mx = xs.iter().sum::<i64>() as f64 / n;
            let my = ys.iter().sum::<i64>() as f64 / n;
            let (mut c, mut vx, mut vy) = (0.0, 0.0, 0.0);
            for (a, b) in xs.iter().zip(ys) {
                let (a, b) = (*a as f64 - mx, *b as f64 - my);
                c += a * b;
                vx += a * a;
                vy += b * b;
            }
            c / (vx * vy).sqrt()
        };
        let mut best = (f64::MIN, 0, 0);
        for dy in -20..=20i64 {
            for dx in -20..=20i64 {
                let s = zncc(&tpl, &luma.window(50 + dx, 40 + dy, 20, 20));
                assert!(
                    (s - cands
                        .iter()
                        .find(|c| c.dx == dx && c.dy == dy)
                        .unwrap()
                        .score)
                        .abs()
                        < 1e-9
                );
                if s > best.0 {
                    best = (s, dx, dy);
                }
            }
        }
        let out = t.update(&moved);
        assert_eq!(out, b.translated(best.1 as f64, best.2 as f64));
        assert!(crate::metrics::iou(&out, &b.translated(30.0, 0.0)) < 1.0);
    }

    #[test]
    fn affine_intensity_invariance() {
        let img = textured(100, 90, 9);
        let moved = shifted(&img, -4, 6);
        let affine = |im: &RgbImage| {
            RgbImage::from_fn(im.width(), im.height(), |x, y| {
                let p = im.get_pixel(x, y).0;
                Rgb(p.map(|c| c * 2 + 10))
            })
        };
        let b = BBox::new(30.0, 30.0, 16.0, 16.0);
        let mut a = NccTracker::new(NccConfig::default());
        let mut c = NccTracker::new(NccConfig::default());
        a.init(&img, b).unwrap();
        c.init(&affine(&img), b).unwrap();
        assert_eq!(a.update(&moved), c.update(&affine(&moved)));
    }

    #[test]
    fn tie_break_prefers_smallest_displacement() {
        let cands = [
            Candidate {
                dx: -1,
                dy: -1,
                score: 0.5,
            },
            Candidate {
                dx: 2,
                dy: 0,
                score: 0.9,
            },
            Candidate {
                dx: 0,
                dy: 1,
                score: 0.9,
            },
            Candidate {
                dx: 1,
                dy: 0,
                score: 0.9,
            },
        ];
        assert_eq!(NccTracker::best(&cands).unwrap(), cands[2]);
    }

    #[test]
    fn init_outside_image_fails() {
        let img = textured(20, 20, 1);
        let mut t = NccTracker::new(NccConfig::default());
        assert!(t.init(&img, BBox::new(15.0, 15.0, 10.0, 10.0)).is_err());
    }
}
