//! One-pass evaluation: initialize on the first ground-truth box, then call
//! the tracker once per frame with no re-initialization.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use image::RgbImage;
use log::{error, warn};

use crate::dataset::{
    validate_sequence, write_result, BBox, Sequence, TrackResult, ValidationConfig,
};
use crate::enhance::EnhanceOp;
use crate::imaging::load_rgb;
use crate::{Error, Result};

/// Single-object tracker driven under the one-pass protocol.
///
/// `init` is the only call that sees a ground-truth box; `update` is called
/// exactly once for every later frame and must return a box.
pub trait Tracker: Send {
    fn name(&self) -> &str;
    fn init(&mut self, image: &RgbImage, bbox: BBox) -> Result<()>;
    fn update(&mut self, image: &RgbImage) -> BBox;
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub workers: usize,
    pub enhance: EnhanceOp,
    pub output_dir: PathBuf,
    /// Recorded for reproducibility; the built-in trackers are deterministic
    /// and do not draw from it.
    pub seed: u64,
    pub validation: ValidationConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            workers: 1,
            enhance: EnhanceOp::None,
            output_dir: PathBuf::from("results"),
            seed: 0,
            validation: ValidationConfig::default(),
        }
    }
}

/// A frame where the tracker's output was replaced by the previous box.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameWarning {
    pub sequence: String,
    /// 1-based.
    pub frame: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceRun {
    pub result: TrackResult,
    pub warnings: Vec<FrameWarning>,
}

/// Runs `tracker` over in-memory frames. `frames` yields one image per
/// frame of `seq`, in order.
pub fn run_frames<I>(
    tracker: &mut dyn Tracker,
    seq: &Sequence,
    frames: I,
    enhance: &EnhanceOp,
) -> Result<SequenceRun>
where
    I: IntoIterator<Item = Result<RgbImage>>,
{
    let init = seq
        .init_box()
        .filter(|b| b.is_valid())
        .ok_or_else(|| Error::data(format!("{}: first frame has no valid box", seq.name)))?;
    let mut frames = frames.into_iter();
    let mut boxes = Vec::with_capacity(seq.frames.len());
    let mut warnings = Vec::new();

    let first = frames
        .next()
        .ok_or_else(|| Error::data(format!("{}: no frames", seq.name)))??;
    tracker.init(&enhance.apply(&first)?, init)?;
    boxes.push(init);

    for frame in seq.frames.iter().skip(1) {
        let image = frames
            .next()
            .ok_or_else(|| Error::data(format!("{}: frame {} missing", seq.name, frame.index)))??;
        let out = tracker.update(&enhance.apply(&image)?);
        if out.is_valid() {
            boxes.push(out);
        } else {
            let prev = *boxes.last().expect("init box pushed");
            let message = format!("tracker returned {out}, holding previous box");
            warn!("{} frame {}: {}", seq.name, frame.index, message);
            warnings.push(FrameWarning {
                sequence: seq.name.clone(),
                frame: frame.index,
                message,
            });
            boxes.push(prev);
        }
    }
    Ok(SequenceRun {
        result: TrackResult {
            sequence_name: seq.name.clone(),
            boxes,
        },
        warnings,
    })
}

/// Runs `tracker` over a sequence whose frames are read from disk.
pub fn run_sequence(
    tracker: &mut dyn Tracker,
    seq: &Sequence,
    config: &RunConfig,
) -> Result<SequenceRun> {
    let frames = seq.frames.iter().map(|f| load_rgb(&f.image_path));
    run_frames(tracker, seq, frames, &config.enhance)
}

#[derive(Debug, Default)]
pub struct BenchmarkRun {
    /// In dataset order.
    pub runs: Vec<SequenceRun>,
    /// Sequences that were not run: (name, reason).
    pub skipped: Vec<(String, String)>,
}

impl BenchmarkRun {
    pub fn results(&self) -> impl Iterator<Item = &TrackResult> {
        self.runs.iter().map(|r| &r.result)
    }
}

/// Runs every valid sequence with a fresh tracker from `make_tracker`,
/// spread across `config.workers` threads. Nothing is written.
pub fn run_all<F>(make_tracker: F, dataset: &[Sequence], config: &RunConfig) -> BenchmarkRun
where
    F: Fn() -> Box<dyn Tracker> + Sync,
{
    run_all_with(make_tracker, dataset, config, |seq, tracker| {
        run_sequence(tracker, seq, config)
    })
}

/// Like [`run_all`] but with a custom per-sequence driver.
pub fn run_all_with<F, D>(
    make_tracker: F,
    dataset: &[Sequence],
    config: &RunConfig,
    drive: D,
) -> BenchmarkRun
where
    F: Fn() -> Box<dyn Tracker> + Sync,
    D: Fn(&Sequence, &mut dyn Tracker) -> Result<SequenceRun> + Sync,
{
    let slots: Vec<Mutex<Option<std::result::Result<SequenceRun, String>>>> =
        dataset.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let job = || loop {
        let i = next.fetch_add(1, Ordering::Relaxed);
        if i >= dataset.len() {
            break;
        }
        let seq = &dataset[i];
        let report = validate_sequence(seq, &config.validation);
        let outcome = if let Some((frame, msg)) = report.errors.first() {
            Err(format!("validation failed at frame {frame}: {msg}"))
        } else {
            let mut tracker = make_tracker();
            drive(seq, tracker.as_mut()).map_err(|e| e.to_string())
        };
        *slots[i].lock().unwrap() = Some(outcome);
    };
    let workers = config.workers.max(1).min(dataset.len().max(1));
    if workers == 1 {
        job();
    } else {
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(job);
            }
        });
    }

    let mut out = BenchmarkRun::default();
    for (seq, slot) in dataset.iter().zip(slots) {
        match slot.into_inner().unwrap() {
            Some(Ok(run)) => out.runs.push(run),
            Some(Err(reason)) => {
                error!("skipping {}: {}", seq.name, reason);
                out.skipped.push((seq.name.clone(), reason));
            }
            None => unreachable!("every slot is filled"),
        }
    }
    out
}

/// Results directory of one tracker: `<output_dir>/<tracker>`.
pub fn results_dir(output_dir: &Path, tracker_name: &str) -> PathBuf {
    output_dir.join(tracker_name)
}

/// [`run_all`] followed by writing `<output_dir>/<tracker>/<sequence>.txt`.
pub fn run_benchmark<F>(
    tracker_name: &str,
    make_tracker: F,
    dataset: &[Sequence],
    config: &RunConfig,
) -> Result<BenchmarkRun>
where
    F: Fn() -> Box<dyn Tracker> + Sync,
{
    let run = run_all(make_tracker, dataset, config);
    let dir = results_dir(&config.output_dir, tracker_name);
    for result in run.results() {
        write_result(result, &dir.join(format!("{}.txt", result.sequence_name)))?;
    }
    Ok(run)
}
