//! Per-frame low-light preprocessing applied before a tracker sees a frame.

use std::fmt;
use std::str::FromStr;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::imaging::{luma, luma_u8};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnhanceOp {
    #[default]
    None,
    /// Power-law curve; values below 1 brighten.
    Gamma(f64),
    /// CDF equalization of luma with chroma rescaling.
    HistEq,
}

impl EnhanceOp {
    pub fn apply(&self, image: &RgbImage) -> Result<RgbImage> {
        match *self {
            EnhanceOp::None => Ok(image.clone()),
            EnhanceOp::Gamma(g) => gamma(image, g),
            EnhanceOp::HistEq => Ok(hist_eq(image)),
        }
    }
}

impl FromStr for EnhanceOp {
    type Err = Error;

    /// `none`, `histeq` or `gamma:<value>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.to_ascii_lowercase().as_str() {
            "none" => return Ok(EnhanceOp::None),
            "histeq" | "hist_eq" => return Ok(EnhanceOp::HistEq),
            _ => {}
        }
        if let Some(v) = s.strip_prefix("gamma:") {
            let g: f64 = v
                .parse()
                .map_err(|_| Error::invalid(format!("bad gamma value {v:?}")))?;
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::invalid(format!("gamma must be > 0, got {g}")));
            }
            return Ok(EnhanceOp::Gamma(g));
        }
        Err(Error::invalid(format!(
            "unknown enhancement {s:?} (expected none, histeq or gamma:<value>)"
        )))
    }
}

impl fmt::Display for EnhanceOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnhanceOp::None => f.write_str("none"),
            EnhanceOp::Gamma(g) => write!(f, "gamma:{g}"),
            EnhanceOp::HistEq => f.write_str("histeq"),
        }
    }
}

pub fn gamma_lut(gamma: f64) -> Result<[u8; 256]> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::invalid(format!("gamma must be > 0, got {gamma}")));
    }
    let mut lut = [0u8; 256];
    for (i, slot) in lut.iter_mut().enumerate() {
        *slot = (255.0 * (i as f64 / 255.0).powf(gamma)).round() as u8;
    }
    Ok(lut)
}

/// `out = round(255 * (in / 255)^gamma)` on every channel.
pub fn gamma(image: &RgbImage, gamma: f64) -> Result<RgbImage> {
    let lut = gamma_lut(gamma)?;
    let mut out = image.clone();
    for p in out.pixels_mut() {
        for c in p.0.iter_mut() {
            *c = lut[*c as usize];
        }
    }
    Ok(out)
}

/// Equalization map over 8-bit luma levels:
/// `round((cdf(v) - cdf_min) / (n - cdf_min) * 255)`. A single-level
/// histogram maps to itself.
pub fn equalization_lut(histogram: &[u64; 256]) -> [u8; 256] {
    let total: u64 = histogram.iter().sum();
    let cdf_min = histogram.iter().copied().find(|&c| c > 0).unwrap_or(0);
    let mut lut = [0u8; 256];
    if total == cdf_min {
        for (i, slot) in lut.iter_mut().enumerate() {
            *slot = i as u8;
        }
        return lut;
    }
    let denom = (total - cdf_min) as f64;
    let mut cdf = 0u64;
    for (i, slot) in lut.iter_mut().enumerate() {
        cdf += histogram[i];
        let v = (cdf.saturating_sub(cdf_min)) as f64 / denom * 255.0;
        *slot = v.round().clamp(0.0, 255.0) as u8;
    }
    lut
}

pub fn luma_histogram(image: &RgbImage) -> [u64; 256] {
    let mut hist = [0u64; 256];
    for p in image.pixels() {
        hist[luma_u8(p.0) as usize] += 1;
    }
    hist
}

/// Histogram equalization on luma; each pixel's R, G, B are scaled by
/// `luma_out / luma_in`, pixels with zero luma are left alone.
pub fn hist_eq(image: &RgbImage) -> RgbImage {
    let lut = equalization_lut(&luma_histogram(image));
    let mut out = image.clone();
    for p in out.pixels_mut() {
        let y_in = luma(p.0);
        if y_in == 0.0 {
            continue;
        }
        let y_out = lut[luma_u8(p.0) as usize] as f64;
        let k = y_out / y_in;
        for c in p.0.iter_mut() {
            *c = (*c as f64 * k).round().clamp(0.0, 255.0) as u8;
        }
    }
    out
}
