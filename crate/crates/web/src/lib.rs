//! Browser bindings for the interactive demo page in `www/`.
//!
//! Every export returns plain data (RGBA bytes or a JSON string) so the page
//! needs no generated classes. The `*_json` functions hold the logic and are
//! what the native tests exercise.

use std::collections::BTreeMap;

use llbench::attributes::{frame_flags, sequence_attributes, AttributeConfig};
use llbench::enhance::EnhanceOp;
use llbench::metrics::{evaluate, iou, MetricsConfig};
use llbench::ope::run_frames;
use llbench::prompt_gate::{unrolled_coefficients, GateGranularity, GateParams};
use llbench::synth::{preset, PRESETS};
use llbench::trackers::TrackerKind;
use llbench::{BBox, Result};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

const GATE_CHANNELS: usize = 8;
const GATE_MAX_LAYERS: usize = 12;

fn js(r: Result<String>) -> std::result::Result<String, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

fn box_json(b: &BBox) -> Value {
    json!([b.x, b.y, b.w, b.h])
}

/// Names of the built-in synthetic sequences.
#[wasm_bindgen]
pub fn preset_names() -> String {
    serde_json::to_string(&PRESETS).expect("string list")
}

pub fn sequence_info_json(name: &str) -> Result<String> {
    let spec = preset(name)?;
    let seq = spec.sequence()?;
    let gt: Vec<Value> = seq
        .frames
        .iter()
        .map(|f| f.gt.as_ref().map_or(Value::Null, box_json))
        .collect();
    Ok(json!({
        "name": seq.name,
        "width": spec.width,
        "height": spec.height,
        "frames": seq.len(),
        "gt": gt,
    })
    .to_string())
}

/// Size, frame count and per-frame ground truth (`null` when hidden).
#[wasm_bindgen]
pub fn sequence_info(name: &str) -> std::result::Result<String, JsError> {
    js(sequence_info_json(name))
}

pub fn render_rgba(name: &str, frame: usize, enhance: &str) -> Result<Vec<u8>> {
    let op: EnhanceOp = enhance.parse()?;
    let spec = preset(name)?;
    if frame >= spec.frames {
        return Err(llbench::Error::InvalidArgument(format!(
            "frame {frame} out of range (sequence has {})",
            spec.frames
        )));
    }
    let rgb = op.apply(&spec.render_frame(frame)?)?;
    let mut out = Vec::with_capacity(rgb.as_raw().len() / 3 * 4);
    for p in rgb.pixels() {
        out.extend_from_slice(&[p[0], p[1], p[2], 255]);
    }
    Ok(out)
}

/// Frame `frame` (0-based) of a preset after enhancement, as RGBA bytes.
#[wasm_bindgen]
pub fn render_frame(
    name: &str,
    frame: usize,
    enhance: &str,
) -> std::result::Result<Vec<u8>, JsError> {
    render_rgba(name, frame, enhance).map_err(|e| JsError::new(&e.to_string()))
}

pub fn track_json(name: &str, tracker: &str, enhance: &str) -> Result<String> {
    let op: EnhanceOp = enhance.parse()?;
    let kind: TrackerKind = tracker.parse()?;
    let out = preset(name)?.render()?;
    let seq = out.sequence;
    let mut t = kind.build();
    let run = run_frames(t.as_mut(), &seq, out.images.iter().cloned().map(Ok), &op)?;

    let attr_cfg = AttributeConfig::default();
    let mut images = out.images.iter();
    let flags = frame_flags(&seq, &attr_cfg, |_| {
        Ok(images.next().expect("one image per frame").clone())
    })?;
    let set = sequence_attributes(&seq, &flags, &attr_cfg);

    let ious: Vec<Value> = seq
        .frames
        .iter()
        .zip(&run.result.boxes)
        .map(|(f, b)| match &f.gt {
            Some(gt) if f.visibility.has_box() => json!(iou(b, gt)),
            _ => Value::Null,
        })
        .collect();
    let boxes: Vec<Value> = run.result.boxes.iter().map(box_json).collect();
    let results = BTreeMap::from([(seq.name.clone(), run.result)]);
    let report = evaluate(
        kind.name(),
        &results,
        &[seq],
        &[set],
        &MetricsConfig::default(),
    )?;
    Ok(json!({
        "tracker": kind.name(),
        "boxes": boxes,
        "iou": ious,
        "s_auc": report.s_auc,
        "p": report.p_at_20,
        "p_norm": report.p_norm_auc,
        "success": report.success_curve.values,
        "precision": report.precision_curve.values,
        "attributes": set.iter().map(|a| a.name()).collect::<Vec<_>>(),
        "held_frames": run.warnings.len(),
    })
    .to_string())
}

/// Runs a tracker over a preset and scores it.
#[wasm_bindgen]
pub fn track(name: &str, tracker: &str, enhance: &str) -> std::result::Result<String, JsError> {
    js(track_json(name, tracker, enhance))
}

pub fn gate_coefficients_json(layers: usize, per_channel: bool, seed: u64) -> Result<String> {
    let gran = if per_channel {
        GateGranularity::PerChannel
    } else {
        GateGranularity::Scalar
    };
    let params = GateParams::random(GATE_CHANNELS, GATE_MAX_LAYERS, gran, 1.0, seed);
    let coeffs = unrolled_coefficients(&params, layers)?;
    let rows: Vec<Vec<f64>> = coeffs.iter().map(|c| c.iter().copied().collect()).collect();
    let sums: Vec<f64> = (0..GATE_CHANNELS)
        .map(|ch| coeffs.iter().map(|c| c[ch]).sum())
        .collect();
    let gates: Vec<Vec<f64>> = (1..=layers)
        .map(|i| params.gate(i).iter().copied().collect())
        .collect();
    Ok(json!({
        "layers": layers,
        "channels": GATE_CHANNELS,
        "gates": gates,
        "coefficients": rows,
        "sums": sums,
        "rho": params.rho(),
    })
    .to_string())
}

/// Weight of each layer's darkness clue in the final prompt, per channel,
/// for seeded random gates.
#[wasm_bindgen]
pub fn gate_coefficients(
    layers: usize,
    per_channel: bool,
    seed: u32,
) -> std::result::Result<String, JsError> {
    js(gate_coefficients_json(layers, per_channel, seed as u64))
}
