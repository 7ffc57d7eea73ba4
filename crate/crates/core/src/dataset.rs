//! Sequence directories, result files and their validation.
//!
//! Layout of a sequence directory:
//!
//! ```text
//! <name>/img/00000001.png        1-based frame images (png or jpg)
//! <name>/groundtruth_rect.txt    one "x,y,w,h" line per frame
//! <name>/visibility.txt          optional, one of 0=Visible 1=POC 2=FOC 3=OV per line
//! <name>/attributes.txt          optional, 12 space-separated 0/1 flags
//! ```
//!
//! Frames labeled FOC or OV have no box; their ground-truth line is a
//! `0,0,0,0` placeholder. Coordinates are 0-based with a top-left origin.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attributes::{lai_value, AttributeConfig, AttributeSet};
use crate::imaging::load_rgb;
use crate::{Error, Result};

pub const GT_FILE: &str = "groundtruth_rect.txt";
pub const VISIBILITY_FILE: &str = "visibility.txt";
pub const ATTRIBUTES_FILE: &str = "attributes.txt";
pub const IMG_DIR: &str = "img";

/// Axis-aligned box in pixels, top-left corner plus size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub const ZERO: BBox = BBox {
        x: 0.0,
        y: 0.0,
        w: 0.0,
        h: 0.0,
    };

    pub const fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self::new(cx - w / 2.0, cy - h / 2.0, w, h)
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.w.is_finite() && self.h.is_finite()
    }

    /// Finite with strictly positive size.
    pub fn is_valid(&self) -> bool {
        self.is_finite() && self.w > 0.0 && self.h > 0.0
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self::new(self.x + dx, self.y + dy, self.w, self.h)
    }

    /// Scales the side lengths by `factor`, keeping the center.
    pub fn scaled_about_center(&self, factor: f64) -> Self {
        let (cx, cy) = self.center();
        Self::from_center(cx, cy, self.w * factor, self.h * factor)
    }

    pub fn approx_eq(&self, other: &BBox, tol: f64) -> bool {
        (self.x - other.x).abs() <= tol
            && (self.y - other.y).abs() <= tol
            && (self.w - other.w).abs() <= tol
            && (self.h - other.h).abs() <= tol
    }

    /// Parses `x,y,w,h`; tabs or spaces are accepted as separators too.
    pub fn parse_line(line: &str) -> std::result::Result<Self, String> {
        let values: Vec<f64> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<f64>().map_err(|_| format!("bad number {t:?}")))
            .collect::<std::result::Result<_, _>>()?;
        match values[..] {
            [x, y, w, h] => Ok(Self::new(x, y, w, h)),
            _ => Err(format!("expected 4 values, found {}", values.len())),
        }
    }

    /// Shortest round-trip decimal form, so a written box reloads bit-exact.
    pub fn to_line(&self) -> String {
        format!("{},{},{},{}", self.x, self.y, self.w, self.h)
    }
}

impl fmt::Display for BBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.x, self.y, self.w, self.h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Visibility {
    Visible,
    POC,
    FOC,
    OV,
}

impl Visibility {
    pub fn code(self) -> u8 {
        match self {
            Visibility::Visible => 0,
            Visibility::POC => 1,
            Visibility::FOC => 2,
            Visibility::OV => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Visibility::Visible),
            1 => Some(Visibility::POC),
            2 => Some(Visibility::FOC),
            3 => Some(Visibility::OV),
            _ => None,
        }
    }

    /// Whether frames with this label carry a ground-truth box.
    pub fn has_box(self) -> bool {
        matches!(self, Visibility::Visible | Visibility::POC)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    /// 1-based.
    pub index: usize,
    pub image_path: PathBuf,
    pub gt: Option<BBox>,
    pub visibility: Visibility,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sequence {
    pub name: String,
    pub frames: Vec<Frame>,
    pub manual_attributes: AttributeSet,
    /// (width, height)
    pub image_size: (u32, u32),
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn init_box(&self) -> Option<BBox> {
        self.frames.first().and_then(|f| f.gt)
    }

    /// Ground truth written in the on-disk line format, placeholders
    /// included.
    pub fn gt_lines(&self) -> Vec<BBox> {
        self.frames
            .iter()
            .map(|f| f.gt.unwrap_or(BBox::ZERO))
            .collect()
    }
}

/// One predicted box per frame for one sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackResult {
    pub sequence_name: String,
    pub boxes: Vec<BBox>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationConfig {
    pub max_box_fraction: f64,
    pub min_length: usize,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            max_box_fraction: 0.5,
            min_length: 30,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// (1-based frame index, or 0 for sequence-level issues; message)
    pub errors: Vec<(usize, String)>,
    pub warnings: Vec<(usize, String)>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn is_clean(&self) -> bool {
        self.errors.is_empty() && self.warnings.is_empty()
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_string(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Non-empty lines with their 1-based line numbers.
fn content_lines(text: &str) -> Vec<(usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
        .collect()
}

fn parse_boxes(path: &Path) -> Result<Vec<BBox>> {
    let text = read_to_string(path)?;
    content_lines(&text)
        .into_iter()
        .map(|(line, l)| {
            BBox::parse_line(l).map_err(|message| Error::Parse {
                path: path.to_path_buf(),
                line,
                message,
            })
        })
        .collect()
}

fn write_boxes(path: &Path, boxes: &[BBox]) -> Result<()> {
    let mut out = String::new();
    for b in boxes {
        out.push_str(&b.to_line());
        out.push('\n');
    }
    write_string(path, &out)
}

/// Frame images sorted by their numeric file stem.
fn list_frame_images(img_dir: &Path) -> Result<Vec<(usize, PathBuf)>> {
    let entries = fs::read_dir(img_dir).map_err(|e| Error::io(img_dir, e))?;
    let mut images = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(img_dir, e))?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase());
        if !matches!(ext.as_deref(), Some("png" | "jpg" | "jpeg")) {
            continue;
        }
        let index = path
            .file_stem()
            .and_then(|s| s.to_str())
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| {
                Error::data(format!("{}: frame name is not a number", path.display()))
            })?;
        images.push((index, path));
    }
    images.sort();
    for pair in images.windows(2) {
        if pair[0].0 == pair[1].0 {
            return Err(Error::data(format!(
                "{}: duplicate frame index {}",
                img_dir.display(),
                pair[0].0
            )));
        }
    }
    Ok(images)
}

fn image_dimensions(path: &Path) -> Result<(u32, u32)> {
    image::image_dimensions(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads one sequence directory, enforcing the format invariants.
pub fn load_sequence(dir: &Path) -> Result<Sequence> {
    let name = dir
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or_default()
        .to_string();
    let gt_path = dir.join(GT_FILE);
    if !gt_path.is_file() {
        return Err(Error::data(format!("{name}: missing {GT_FILE}")));
    }
    let images = list_frame_images(&dir.join(IMG_DIR))?;
    let boxes = parse_boxes(&gt_path)?;
    if boxes.len() != images.len() {
        return Err(Error::data(format!(
            "{name}: GT line count mismatch ({} lines for {} frames)",
            boxes.len(),
            images.len()
        )));
    }
    if images.len() < 2 {
        return Err(Error::data(format!(
            "{name}: a sequence needs at least 2 frames"
        )));
    }

    let vis_path = dir.join(VISIBILITY_FILE);
    let visibility = if vis_path.is_file() {
        let text = read_to_string(&vis_path)?;
        let labels = content_lines(&text)
            .into_iter()
            .map(|(line, l)| {
                l.parse::<u8>()
                    .ok()
                    .and_then(Visibility::from_code)
                    .ok_or_else(|| Error::Parse {
                        path: vis_path.clone(),
                        line,
                        message: format!("visibility must be 0..=3, got {l:?}"),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        if labels.len() != images.len() {
            return Err(Error::data(format!(
                "{name}: visibility line count mismatch ({} lines for {} frames)",
                labels.len(),
                images.len()
            )));
        }
        labels
    } else {
        vec![Visibility::Visible; images.len()]
    };

    let attr_path = dir.join(ATTRIBUTES_FILE);
    let manual_attributes = if attr_path.is_file() {
        let text = read_to_string(&attr_path)?;
        let (line, l) = content_lines(&text)
            .into_iter()
            .next()
            .ok_or_else(|| Error::data(format!("{name}: empty {ATTRIBUTES_FILE}")))?;
        AttributeSet::parse_line(l)
            .map_err(|message| Error::Parse {
                path: attr_path.clone(),
                line,
                message,
            })?
            .manual_only()
    } else {
        AttributeSet::empty()
    };

    let image_size = image_dimensions(&images[0].1)?;
    let mut frames = Vec::with_capacity(images.len());
    for (((index, image_path), bbox), vis) in images.into_iter().zip(boxes).zip(visibility) {
        let gt = if vis.has_box() {
            if !bbox.is_valid() {
                return Err(Error::data(format!(
                    "{name}: frame {index}: non-positive box size {bbox}"
                )));
            }
            Some(bbox)
        } else {
            None
        };
        let size = image_dimensions(&image_path)?;
        if size != image_size {
            return Err(Error::data(format!(
                "{name}: frame {index} is {}x{}, expected {}x{}",
                size.0, size.1, image_size.0, image_size.1
            )));
        }
        frames.push(Frame {
            index,
            image_path,
            gt,
            visibility: vis,
        });
    }
    if frames[0].visibility != Visibility::Visible {
        return Err(Error::data(format!("{name}: first frame must be Visible")));
    }

    Ok(Sequence {
        name,
        frames,
        manual_attributes,
        image_size,
    })
}

/// Writes the annotation files (ground truth, visibility, attributes) of a
/// sequence into `dir`. Frame images are not touched.
pub fn write_annotations(seq: &Sequence, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_boxes(&dir.join(GT_FILE), &seq.gt_lines())?;
    let mut vis = String::new();
    for f in &seq.frames {
        vis.push_str(&f.visibility.code().to_string());
        vis.push('\n');
    }
    write_string(&dir.join(VISIBILITY_FILE), &vis)?;
    write_string(
        &dir.join(ATTRIBUTES_FILE),
        &format!("{}\n", seq.manual_attributes.to_line()),
    )
}

/// Sequences found directly under `root`, in name order.
#[derive(Debug, Default)]
pub struct DatasetLoad {
    pub sequences: Vec<Sequence>,
    /// Sequences that failed to load: (directory name, error).
    pub failures: Vec<(String, Error)>,
}

/// Loads every subdirectory of `root` holding a ground-truth file. A
/// directory that is itself a sequence is loaded as a one-sequence dataset.
pub fn load_dataset(root: &Path) -> Result<DatasetLoad> {
    if root.join(GT_FILE).is_file() {
        let mut load = DatasetLoad::default();
        match load_sequence(root) {
            Ok(s) => load.sequences.push(s),
            Err(e) => load.failures.push((dir_name(root), e)),
        }
        return Ok(load);
    }
    let entries = fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(GT_FILE).is_file())
        .collect();
    dirs.sort();
    let mut load = DatasetLoad::default();
    for dir in dirs {
        match load_sequence(&dir) {
            Ok(s) => load.sequences.push(s),
            Err(e) => load.failures.push((dir_name(&dir), e)),
        }
    }
    Ok(load)
}

fn dir_name(p: &Path) -> String {
    p.file_name()
        .and_then(|n| n.to_str())
        .unwrap_or_default()
        .to_string()
}

/// Checks the sequence invariants; never fails, reports instead.
pub fn validate_sequence(seq: &Sequence, config: &ValidationConfig) -> ValidationReport {
    let mut report = ValidationReport::default();
    if seq.frames.len() < 2 {
        report
            .errors
            .push((0, "a sequence needs at least 2 frames".into()));
    }
    match seq.frames.first() {
        Some(f) if f.visibility == Visibility::Visible && f.gt.is_some() => {}
        Some(f) => report
            .errors
            .push((f.index, "first frame must be Visible with a box".into())),
        None => {}
    }
    let (iw, ih) = seq.image_size;
    let image_area = iw as f64 * ih as f64;
    let mut prev_index = 0;
    for f in &seq.frames {
        if f.index <= prev_index {
            report
                .errors
                .push((f.index, "frame index not strictly increasing".into()));
        }
        prev_index = f.index;
        match (f.visibility.has_box(), f.gt) {
            (true, None) => report
                .errors
                .push((f.index, format!("{:?} frame without a box", f.visibility))),
            (false, Some(_)) => report.errors.push((
                f.index,
                format!("{:?} frame must not carry a box", f.visibility),
            )),
            (true, Some(b)) if !b.is_valid() => report
                .errors
                .push((f.index, format!("non-positive box size {b}"))),
            (true, Some(b)) => {
                if image_area > 0.0 {
                    let fraction = b.area() / image_area;
                    if fraction > config.max_box_fraction {
                        report
                            .warnings
                            .push((f.index, format!("box occupies {fraction:.2} of image")));
                    }
                }
            }
            (false, None) => {}
        }
    }
    if seq.frames.len() < config.min_length {
        report
            .warnings
            .push((0, format!("length below {}", config.min_length)));
    }
    report
}

pub fn write_result(result: &TrackResult, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    write_boxes(path, &result.boxes)
}

pub fn read_result(path: &Path, sequence_name: &str) -> Result<TrackResult> {
    Ok(TrackResult {
        sequence_name: sequence_name.to_string(),
        boxes: parse_boxes(path)?,
    })
}

/// Checks a result against its sequence: frame count and OPE initialization.
pub fn check_result(result: &TrackResult, seq: &Sequence) -> Result<()> {
    if result.boxes.len() != seq.frames.len() {
        return Err(Error::data(format!(
            "{}: result count mismatch ({} boxes for {} frames)",
            seq.name,
            result.boxes.len(),
            seq.frames.len()
        )));
    }
    let init = seq
        .init_box()
        .ok_or_else(|| Error::data(format!("{}: first frame has no box", seq.name)))?;
    if !result.boxes[0].approx_eq(&init, 1e-6) {
        return Err(Error::data(format!(
            "{}: OPE init violated (first result {} != ground truth {})",
            seq.name, result.boxes[0], init
        )));
    }
    Ok(())
}

/// Reads `<dir>/<sequence>.txt` for every sequence of the dataset.
pub fn load_results(dir: &Path, dataset: &[Sequence]) -> Result<BTreeMap<String, TrackResult>> {
    let mut out = BTreeMap::new();
    for seq in dataset {
        let path = dir.join(format!("{}.txt", seq.name));
        if !path.is_file() {
            return Err(Error::data(format!(
                "{}: missing result file {}",
                seq.name,
                path.display()
            )));
        }
        let result = read_result(&path, &seq.name)?;
        check_result(&result, seq)?;
        out.insert(seq.name.clone(), result);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub sequences: usize,
    pub frames: usize,
    pub visible: usize,
    pub poc: usize,
    pub foc: usize,
    pub ov: usize,
    /// Mean over all boxed frames of the per-frame LAI value.
    pub mean_lai: f64,
}

/// Frame counts and the per-frame average LAI; the pixel values come from
/// `lai_of`, which returns the LAI of one boxed frame.
pub fn dataset_stats_with<F>(dataset: &[Sequence], mut lai_of: F) -> Result<DatasetStats>
where
    F: FnMut(&Frame, &BBox) -> Result<f64>,
{
    if dataset.is_empty() {
        return Err(Error::data("empty dataset"));
    }
    let mut stats = DatasetStats {
        sequences: dataset.len(),
        frames: 0,
        visible: 0,
        poc: 0,
        foc: 0,
        ov: 0,
        mean_lai: 0.0,
    };
    let mut lai_sum = 0.0;
    let mut lai_frames = 0usize;
    for seq in dataset {
        for f in &seq.frames {
            stats.frames += 1;
            match f.visibility {
                Visibility::Visible => stats.visible += 1,
                Visibility::POC => stats.poc += 1,
                Visibility::FOC => stats.foc += 1,
                Visibility::OV => stats.ov += 1,
            }
            if let Some(gt) = f.gt {
                lai_sum += lai_of(f, &gt)?;
                lai_frames += 1;
            }
        }
    }
    if lai_frames == 0 {
        return Err(Error::data("dataset has no boxed frames"));
    }
    stats.mean_lai = lai_sum / lai_frames as f64;
    Ok(stats)
}

/// [`dataset_stats_with`] reading frames from disk.
pub fn dataset_stats(dataset: &[Sequence], config: &AttributeConfig) -> Result<DatasetStats> {
    dataset_stats_with(dataset, |frame, gt| {
        let image = load_rgb(&frame.image_path)?;
        lai_value(&image, &gt.scaled_about_center(config.lai_expansion))
    })
}
