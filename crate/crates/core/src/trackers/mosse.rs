use std::f64::consts::PI;

use image::RgbImage;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fft::Fft2d;
use crate::dataset::BBox;
use crate::imaging::GrayF64;
use crate::ope::Tracker;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MosseConfig {
    /// Running-average rate for the filter numerator / denominator.
    pub learning_rate: f64,
    /// Width of the Gaussian target response, in patch pixels.
    pub sigma: f64,
    /// Regularizer added to the denominator.
    pub epsilon: f64,
    /// Search patch side relative to the box side.
    pub padding: f64,
    /// Patch side in pixels; power of two.
    pub window: usize,
}

impl Default for MosseConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.125,
            sigma: 2.0,
            epsilon: 1e-5,
            padding: 2.0,
            window: 64,
        }
    }
}

impl MosseConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::invalid("learning_rate must be in (0, 1]"));
        }
        if !(self.sigma > 0.0 && self.epsilon > 0.0 && self.padding > 0.0) {
            return Err(Error::invalid("sigma, epsilon and padding must be > 0"));
        }
        if self.window < 2 || !self.window.is_power_of_two() {
            return Err(Error::invalid("window must be a power of two >= 2"));
        }
        Ok(())
    }
}

/// MOSSE correlation filter on grayscale patches, fixed box size.
///
/// `A <- lr * G . conj(F) + (1 - lr) * A`, `B <- lr * F . conj(F) + (1 - lr) * B`,
/// response `= IFFT(A . Z / (B + eps))`.
#[derive(Debug, Clone)]
pub struct MosseTracker {
    config: MosseConfig,
    fft: Fft2d,
    target: Vec<Complex64>,
    window: Vec<f64>,
    num: Vec<Complex64>,
    den: Vec<Complex64>,
    trained: bool,
    bbox: Option<BBox>,
    last_response: Vec<f64>,
}

impl MosseTracker {
    pub fn new(config: MosseConfig) -> Self {
        let n = config.window;
        let fft = Fft2d::new(n);
        let c = (n / 2) as f64;
        let mut g = vec![0.0; n * n];
        let mut window = vec![0.0; n * n];
        // periodic Hann, peak 1 at the patch center
        let hann: Vec<f64> = (0..n)
            .map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / n as f64).cos()))
            .collect();
        for y in 0..n {
            for x in 0..n {
                let d2 = (x as f64 - c).powi(2) + (y as f64 - c).powi(2);
                g[y * n + x] = (-d2 / (2.0 * config.sigma * config.sigma)).exp();
                window[y * n + x] = hann[x] * hann[y];
            }
        }
        let target = fft.forward_real(&g);
        Self {
            config,
            fft,
            target,
            window,
            num: vec![Complex64::new(0.0, 0.0); n * n],
            den: vec![Complex64::new(0.0, 0.0); n * n],
            trained: false,
            bbox: None,
            last_response: Vec::new(),
        }
    }

    /// Spatial response of the most recent update, row-major `window^2`.
    pub fn last_response(&self) -> &[f64] {
        &self.last_response
    }

    fn patch_scale(&self, bbox: &BBox) -> (f64, f64) {
        let n = self.config.window as f64;
        (
            bbox.w * self.config.padding / n,
            bbox.h * self.config.padding / n,
        )
    }

    /// Resampled, log-transformed, normalized and windowed patch; `None`
    /// when the patch has no contrast.
    fn features(&self, gray: &GrayF64, bbox: &BBox) -> Option<Vec<f64>> {
        let n = self.config.window;
        let (cx, cy) = bbox.center();
        let (sx, sy) = self.patch_scale(bbox);
        let half = (n / 2) as f64;
        let mut patch = Vec::with_capacity(n * n);
        for y in 0..n {
            for x in 0..n {
                let v = gray.sample(cx + (x as f64 - half) * sx, cy + (y as f64 - half) * sy);
                patch.push((v + 1.0).ln());
            }
        }
        let mean = patch.iter().sum::<f64>() / patch.len() as f64;
        patch.iter_mut().for_each(|v| *v -= mean);
        let norm = patch.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= 1e-12 {
            return None;
        }
        Some(
            patch
                .iter()
                .zip(&self.window)
                .map(|(v, w)| v / norm * w)
                .collect(),
        )
    }

    fn train(&mut self, spectrum: &[Complex64], rate: f64) {
        for i in 0..spectrum.len() {
            let f = spectrum[i];
            let a = self.target[i] * f.conj();
            let b = f * f.conj();
            self.num[i] = a * rate + self.num[i] * (1.0 - rate);
            self.den[i] = b * rate + self.den[i] * (1.0 - rate);
        }
    }

    fn correlate(&self, spectrum: &[Complex64]) -> Vec<f64> {
        let eps = self.config.epsilon;
        let mut resp: Vec<Complex64> = spectrum
            .iter()
            .zip(self.num.iter().zip(&self.den))
            .map(|(z, (a, b))| a * z / (b + eps))
            .collect();
        self.fft.inverse(&mut resp);
        resp.into_iter().map(|c| c.re).collect()
    }

    /// Peak location in patch pixels relative to the patch center, refined
    /// by a parabola through the neighbors on each axis.
    fn peak_offset(&self, response: &[f64]) -> (f64, f64) {
        let n = self.config.window;
        let (idx, _) =
            response.iter().enumerate().fold(
                (0, f64::MIN),
                |best, (i, &v)| if v > best.1 { (i, v) } else { best },
            );
        let (px, py) = (idx % n, idx / n);
        let at = |x: usize, y: usize| response[y * n + x];
        let refine = |l: f64, c: f64, r: f64| {
            let denom = l - 2.0 * c + r;
            if denom.abs() < 1e-15 {
                0.0
            } else {
                (0.5 * (l - r) / denom).clamp(-0.5, 0.5)
            }
        };
        let dx = refine(at((px + n - 1) % n, py), at(px, py), at((px + 1) % n, py));
        let dy = refine(at(px, (py + n - 1) % n), at(px, py), at(px, (py + 1) % n));
        let half = (n / 2) as f64;
        (px as f64 + dx - half, py as f64 + dy - half)
    }

    pub fn init_gray(&mut self, gray: &GrayF64, bbox: BBox) -> Result<()> {
        if !bbox.is_valid() {
            return Err(Error::data(format!("invalid init box {bbox}")));
        }
        let (cx, cy) = bbox.center();
        if cx < 0.0 || cy < 0.0 || cx >= gray.width as f64 || cy >= gray.height as f64 {
            return Err(Error::data(format!("init box {bbox} is outside the image")));
        }
        self.bbox = Some(bbox);
        self.num.fill(Complex64::new(0.0, 0.0));
        self.den.fill(Complex64::new(0.0, 0.0));
        self.trained = false;
        if let Some(f) = self.features(gray, &bbox) {
            let spectrum = self.fft.forward_real(&f);
            self.train(&spectrum, 1.0);
            self.trained = true;
        }
        Ok(())
    }

    pub fn update_gray(&mut self, gray: &GrayF64) -> BBox {
        let bbox = self.bbox.expect("update before init");
        if !self.trained {
            // nothing to correlate against yet; try to learn from this frame
            if let Some(f) = self.features(gray, &bbox) {
                let spectrum = self.fft.forward_real(&f);
                self.train(&spectrum, 1.0);
                self.trained = true;
            }
            return bbox;
        }
        let Some(z) = self.features(gray, &bbox) else {
            return bbox;
        };
        let response = self.correlate(&self.fft.forward_real(&z));
        let (ox, oy) = self.peak_offset(&response);
        self.last_response = response;
        let (sx, sy) = self.patch_scale(&bbox);
        let moved = bbox.translated(ox * sx, oy * sy);
        self.bbox = Some(moved);
        if let Some(f) = self.features(gray, &moved) {
            let spectrum = self.fft.forward_real(&f);
            self.train(&spectrum, self.config.learning_rate);
        }
        moved
    }
}

impl Tracker for MosseTracker {
    fn name(&self) -> &str {
        "mosse"
    }

    fn init(&mut self, image: &RgbImage, bbox: BBox) -> Result<()> {
        self.init_gray(&GrayF64::from_rgb(image), bbox)
    }

    fn update(&mut self, image: &RgbImage) -> BBox {
        self.update_gray(&GrayF64::from_rgb(image))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Smooth multi-frequency texture evaluated at continuous coordinates.
    fn scene(x: f64, y: f64) -> f64 {
        100.0
            + 30.0 * (0.31 * x + 0.7).sin() * (0.23 * y).cos()
            + 25.0 * (0.17 * x - 0.41 * y).sin()
            + 15.0 * (0.53 * y + 0.05 * x).cos()
    }

    fn frame(w: usize, h: usize, dx: f64, dy: f64) -> GrayF64 {
        let mut g = GrayF64::new(w, h);
        for y in 0..h {
            for x in 0..w {
                g.data[y * w + x] = scene(x as f64 - dx, y as f64 - dy);
            }
        }
        g
    }

    #[test]
    fn identical_frame_keeps_box() {
        let g = frame(160, 160, 0.0, 0.0);
        let b = BBox::new(64.0, 64.0, 32.0, 32.0);
        let mut t = MosseTracker::new(MosseConfig::default());
        t.init_gray(&g, b).unwrap();
        let out = t.update_gray(&g);
        assert!(
            (out.x - b.x).abs() <= 0.5 && (out.y - b.y).abs() <= 0.5,
            "{out}"
        );
        let resp = t.last_response();
        let n = 64;
        let peak = resp
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!((peak % n, peak / n), (32, 32));
    }

    #[test]
    fn integer_translation_recovered() {
        let b = BBox::new(64.0, 64.0, 32.0, 32.0);
        for (dx, dy) in [(3.0, 0.0), (0.0, -4.0), (5.0, 2.0), (-2.0, -3.0)] {
            let mut t = MosseTracker::new(MosseConfig::default());
            t.init_gray(&frame(160, 160, 0.0, 0.0), b).unwrap();
            let out = t.update_gray(&frame(160, 160, dx, dy));
            assert!((out.x - b.x - dx).abs() <= 0.5, "dx {dx}: {out}");
            assert!((out.y - b.y - dy).abs() <= 0.5, "dy {dy}: {out}");
        }
    }

    #[test]
    fn flat_patch_skips_update() {
        let g = GrayF64 {
            width: 100,
            height: 100,
            data: vec![50.0; 100 * 100],
        };
        let b = BBox::new(30.0, 30.0, 20.0, 20.0);
        let mut t = MosseTracker::new(MosseConfig::default());
        t.init_gray(&g, b).unwrap();
        assert_eq!(t.update_gray(&g), b);
    }
}
