//! Pixel helpers shared by trackers, enhancement and attribute code.

use std::path::Path;

use image::RgbImage;

use crate::{Error, Result};

/// BT.601 luma scaled by 1000, exact in integer arithmetic.
#[inline]
pub fn luma_milli(p: [u8; 3]) -> u32 {
    299 * p[0] as u32 + 587 * p[1] as u32 + 114 * p[2] as u32
}

#[inline]
pub fn luma(p: [u8; 3]) -> f64 {
    luma_milli(p) as f64 / 1000.0
}

/// Luma rounded to the nearest 8-bit level.
#[inline]
pub fn luma_u8(p: [u8; 3]) -> u8 {
    ((luma_milli(p) + 500) / 1000).min(255) as u8
}

/// Row-major single-channel float image.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayF64 {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl GrayF64 {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn from_rgb(img: &RgbImage) -> Self {
        let data = img.pixels().map(|p| luma(p.0)).collect();
        Self {
            width: img.width() as usize,
            height: img.height() as usize,
            data,
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Bilinear sample with edge clamping.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let max_x = (self.width - 1) as f64;
        let max_y = (self.height - 1) as f64;
        let x = x.clamp(0.0, max_x);
        let y = y.clamp(0.0, max_y);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bottom = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }
}

/// Loads any supported image as 8-bit RGB; grayscale inputs are promoted.
pub fn load_rgb(path: &Path) -> Result<RgbImage> {
    let img = image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(img.to_rgb8())
}

/// Writes a PNG, creating missing parent directories.
pub fn save_png(img: &RgbImage, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
}
