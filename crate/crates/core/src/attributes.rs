//! Challenge attributes: the twelve per-sequence flags, the four that are
//! computed from annotations (SV, ARC, LR, LAI), and the co-occurrence
//! matrix over a dataset.

use std::fmt;
use std::str::FromStr;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::dataset::{BBox, Frame, Sequence};
use crate::imaging::luma_milli;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Attribute {
    /// Illumination variation.
    IV,
    /// Scale variation.
    SV,
    /// Motion blur.
    MB,
    /// Out of view.
    OV,
    /// Partial occlusion.
    POC,
    /// Rotation.
    ROT,
    /// Full occlusion.
    FOC,
    /// Viewpoint change.
    VC,
    /// Similar objects.
    SOB,
    /// Aspect ratio change.
    ARC,
    /// Low resolution.
    LR,
    /// Low ambient intensity.
    LAI,
}

impl Attribute {
    /// Canonical order, also the column order of `attributes.txt`.
    pub const ALL: [Attribute; 12] = [
        Attribute::IV,
        Attribute::SV,
        Attribute::MB,
        Attribute::OV,
        Attribute::POC,
        Attribute::ROT,
        Attribute::FOC,
        Attribute::VC,
        Attribute::SOB,
        Attribute::ARC,
        Attribute::LR,
        Attribute::LAI,
    ];

    pub const COMPUTED: [Attribute; 4] =
        [Attribute::SV, Attribute::ARC, Attribute::LR, Attribute::LAI];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Manual attributes come from human annotation; the rest are derived
    /// from boxes and pixels.
    pub fn is_manual(self) -> bool {
        !Self::COMPUTED.contains(&self)
    }

    pub fn name(self) -> &'static str {
        match self {
            Attribute::IV => "IV",
            Attribute::SV => "SV",
            Attribute::MB => "MB",
            Attribute::OV => "OV",
            Attribute::POC => "POC",
            Attribute::ROT => "ROT",
            Attribute::FOC => "FOC",
            Attribute::VC => "VC",
            Attribute::SOB => "SOB",
            Attribute::ARC => "ARC",
            Attribute::LR => "LR",
            Attribute::LAI => "LAI",
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Attribute {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Attribute::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown attribute {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AttributeSet {
    flags: [bool; 12],
}

impl AttributeSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_flags(flags: [bool; 12]) -> Self {
        Self { flags }
    }

    pub fn flags(&self) -> [bool; 12] {
        self.flags
    }

    pub fn contains(&self, attr: Attribute) -> bool {
        self.flags[attr.index()]
    }

    pub fn set(&mut self, attr: Attribute, value: bool) {
        self.flags[attr.index()] = value;
    }

    pub fn with(mut self, attr: Attribute) -> Self {
        self.set(attr, true);
        self
    }

    pub fn iter(&self) -> impl Iterator<Item = Attribute> + '_ {
        Attribute::ALL.into_iter().filter(|a| self.contains(*a))
    }

    /// Copy keeping only the manually annotated flags.
    pub fn manual_only(&self) -> Self {
        let mut out = *self;
        for a in Attribute::COMPUTED {
            out.set(a, false);
        }
        out
    }

    /// `0 1 0 ...` in canonical order.
    pub fn to_line(&self) -> String {
        self.flags
            .iter()
            .map(|&f| if f { "1" } else { "0" })
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn parse_line(line: &str) -> std::result::Result<Self, String> {
        let tokens: Vec<&str> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .collect();
        if tokens.len() != 12 {
            return Err(format!(
                "expected 12 attribute flags, found {}",
                tokens.len()
            ));
        }
        let mut flags = [false; 12];
        for (slot, tok) in flags.iter_mut().zip(&tokens) {
            *slot = match *tok {
                "0" => false,
                "1" => true,
                other => return Err(format!("attribute flag must be 0 or 1, got {other:?}")),
            };
        }
        Ok(Self { flags })
    }
}

/// Thresholds and aggregation rules for the computed attributes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttributeConfig {
    /// LR fires when the box area is strictly below this.
    pub lr_area: f64,
    /// SV / ARC fire when the ratio leaves `[ratio_low, ratio_high]`.
    pub ratio_low: f64,
    pub ratio_high: f64,
    /// LAI fires when the local mean luma is strictly below this.
    pub lai_threshold: f64,
    /// Side-length factor for the LAI neighborhood around the box center.
    pub lai_expansion: f64,
    /// Fraction of boxed frames that must fire for a sequence-level LR / LAI.
    pub state_fraction: f64,
}

impl Default for AttributeConfig {
    fn default() -> Self {
        Self {
            lr_area: 1000.0,
            ratio_low: 0.5,
            ratio_high: 2.0,
            lai_threshold: 20.0,
            lai_expansion: 1.0,
            state_fraction: 0.5,
        }
    }
}

impl AttributeConfig {
    pub fn is_low_resolution(&self, area: f64) -> bool {
        area < self.lr_area
    }

    /// Out-of-range test shared by SV (area ratio) and ARC (aspect ratio).
    pub fn is_ratio_change(&self, ratio: f64) -> bool {
        ratio < self.ratio_low || ratio > self.ratio_high
    }

    pub fn is_low_light(&self, lai: f64) -> bool {
        lai < self.lai_threshold
    }
}

/// Mean BT.601 luma over the pixels whose centers fall inside `bbox`
/// (clipped to the image).
pub fn lai_value(image: &RgbImage, bbox: &BBox) -> Result<f64> {
    let (w, h) = (image.width() as i64, image.height() as i64);
    // pixel i is inside when x <= i + 0.5 < x + w
    let x0 = ((bbox.x - 0.5).ceil() as i64).max(0);
    let y0 = ((bbox.y - 0.5).ceil() as i64).max(0);
    let x1 = ((bbox.right() - 0.5).ceil() as i64).min(w);
    let y1 = ((bbox.bottom() - 0.5).ceil() as i64).min(h);
    if x0 >= x1 || y0 >= y1 {
        return Err(Error::data(format!(
            "box {bbox} covers no pixel of the {w}x{h} image"
        )));
    }
    let mut sum: u64 = 0;
    for y in y0..y1 {
        for x in x0..x1 {
            sum += luma_milli(image.get_pixel(x as u32, y as u32).0) as u64;
        }
    }
    let count = ((x1 - x0) * (y1 - y0)) as u64;
    Ok(sum as f64 / (1000 * count) as f64)
}

/// Computed flags for one frame that carries a ground-truth box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameAttributeFlags {
    /// 1-based frame index.
    pub index: usize,
    pub sv: bool,
    pub arc: bool,
    pub lr: bool,
    pub lai: bool,
    pub lai_value: f64,
}

/// Flags for a single box against the reference (first-frame) box.
pub fn box_flags(
    reference: &BBox,
    bbox: &BBox,
    lai_value: f64,
    index: usize,
    config: &AttributeConfig,
) -> FrameAttributeFlags {
    let area_ratio = bbox.area() / reference.area();
    let aspect_ratio = (bbox.w / bbox.h) / (reference.w / reference.h);
    FrameAttributeFlags {
        index,
        sv: config.is_ratio_change(area_ratio),
        arc: config.is_ratio_change(aspect_ratio),
        lr: config.is_low_resolution(bbox.area()),
        lai: config.is_low_light(lai_value),
        lai_value,
    }
}

/// Per-frame computed flags for every frame with a box. `load` supplies the
/// pixels of a frame on demand.
pub fn frame_flags<F>(
    seq: &Sequence,
    config: &AttributeConfig,
    mut load: F,
) -> Result<Vec<FrameAttributeFlags>>
where
    F: FnMut(&Frame) -> Result<RgbImage>,
{
    let reference = seq
        .frames
        .first()
        .and_then(|f| f.gt)
        .ok_or_else(|| Error::data(format!("{}: first frame has no box", seq.name)))?;
    let mut out = Vec::new();
    for frame in &seq.frames {
        let Some(gt) = frame.gt else { continue };
        let image = load(frame)?;
        let region = gt.scaled_about_center(config.lai_expansion);
        let lai = lai_value(&image, &region)?;
        out.push(box_flags(&reference, &gt, lai, frame.index, config));
    }
    Ok(out)
}

/// Sequence-level set: SV / ARC if any frame fires, LR / LAI if at least
/// `state_fraction` of boxed frames fire; manual flags are copied.
pub fn sequence_attributes(
    seq: &Sequence,
    flags: &[FrameAttributeFlags],
    config: &AttributeConfig,
) -> AttributeSet {
    let mut set = seq.manual_attributes.manual_only();
    let n = flags.len() as f64;
    let count = |f: fn(&FrameAttributeFlags) -> bool| flags.iter().filter(|x| f(x)).count() as f64;
    set.set(Attribute::SV, flags.iter().any(|f| f.sv));
    set.set(Attribute::ARC, flags.iter().any(|f| f.arc));
    if n > 0.0 {
        set.set(Attribute::LR, count(|f| f.lr) >= config.state_fraction * n);
        set.set(
            Attribute::LAI,
            count(|f| f.lai) >= config.state_fraction * n,
        );
    }
    set
}

/// 12x12 co-occurrence counts in canonical attribute order.
pub fn cooccurrence_matrix<'a, I>(sets: I) -> [[u32; 12]; 12]
where
    I: IntoIterator<Item = &'a AttributeSet>,
{
    let mut m = [[0u32; 12]; 12];
    for set in sets {
        let flags = set.flags();
        for i in 0..12 {
            if !flags[i] {
                continue;
            }
            for j in 0..12 {
                if flags[j] {
                    m[i][j] += 1;
                }
            }
        }
    }
    m
}
