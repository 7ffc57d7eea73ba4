//! Success (S_AUC), precision (P) and normalized precision (P_Norm), their
//! curves, per-attribute breakdowns and the tracker ranking.
//!
//! Conventions:
//! - success counts frames with IoU strictly above the threshold, on the
//!   51-point grid 0, 0.02, ..., 1; S_AUC is the exact area under the
//!   continuous curve, which is the mean IoU;
//! - precision counts center errors `<=` the threshold, grid 0..=50 px,
//!   headline value at 20 px;
//! - normalized precision divides the center offset by the ground-truth
//!   width and height, grid 0, 0.01, ..., 0.5, and P_Norm is the mean of
//!   that curve;
//! - frames labeled FOC or OV are excluded, POC frames are kept;
//! - sequences are weighted equally unless configured otherwise.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::attributes::{Attribute, AttributeSet};
use crate::dataset::{BBox, Sequence, TrackResult};
use crate::{Error, Result};

pub const CURVE_POINTS: usize = 51;

pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.right().min(b.right()) - a.x.max(b.x)).max(0.0);
    let ih = (a.bottom().min(b.bottom()) - a.y.max(b.y)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    inter / union
}

pub fn center_error(a: &BBox, b: &BBox) -> f64 {
    let (ax, ay) = a.center();
    let (bx, by) = b.center();
    (ax - bx).hypot(ay - by)
}

/// How the center offset is normalized for P_Norm.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormDivisor {
    /// Divide by the ground-truth width / height.
    #[default]
    GroundTruth,
    /// Divide by the mean of predicted and ground-truth width / height.
    Mean,
}

pub fn norm_center_error(tr: &BBox, gt: &BBox) -> f64 {
    norm_center_error_with(tr, gt, NormDivisor::GroundTruth)
}

pub fn norm_center_error_with(tr: &BBox, gt: &BBox, divisor: NormDivisor) -> f64 {
    let (tx, ty) = tr.center();
    let (gx, gy) = gt.center();
    let (w, h) = match divisor {
        NormDivisor::GroundTruth => (gt.w, gt.h),
        NormDivisor::Mean => ((tr.w + gt.w) / 2.0, (tr.h + gt.h) / 2.0),
    };
    ((tx - gx) / w).hypot((ty - gy) / h)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricCurve {
    pub thresholds: Vec<f64>,
    pub values: Vec<f64>,
}

impl MetricCurve {
    fn over_grid(step: f64, mut pass: impl FnMut(f64) -> f64) -> Self {
        let thresholds: Vec<f64> = (0..CURVE_POINTS).map(|i| i as f64 * step).collect();
        let values = thresholds.iter().map(|&t| pass(t)).collect();
        Self { thresholds, values }
    }

    /// Value at the grid point closest to `threshold`.
    pub fn value_at(&self, threshold: f64) -> f64 {
        let i = self
            .thresholds
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - threshold).abs().total_cmp(&(b.1 - threshold).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        self.values[i]
    }

    /// Trapezoidal area normalized by the threshold span.
    pub fn trapezoid_auc(&self) -> f64 {
        let span = self.thresholds.last().unwrap_or(&0.0) - self.thresholds.first().unwrap_or(&0.0);
        if span <= 0.0 {
            return self.values.first().copied().unwrap_or(0.0);
        }
        let area: f64 = self
            .thresholds
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(t, v)| (t[1] - t[0]) * (v[0] + v[1]) / 2.0)
            .sum();
        area / span
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Pointwise mean of curves sharing one grid.
    fn average<'a>(curves: impl IntoIterator<Item = &'a MetricCurve>) -> Option<MetricCurve> {
        let mut iter = curves.into_iter();
        let first = iter.next()?.clone();
        let mut n = 1.0;
        let mut acc = first;
        for c in iter {
            for (a, v) in acc.values.iter_mut().zip(&c.values) {
                *a += v;
            }
            n += 1.0;
        }
        for a in &mut acc.values {
            *a /= n;
        }
        Some(acc)
    }
}

fn fraction(count: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        count as f64 / total as f64
    }
}

/// Fraction of frames with IoU strictly above each threshold 0, 0.02, ..., 1.
pub fn success_curve(ious: &[f64]) -> MetricCurve {
    let step = 1.0 / (CURVE_POINTS - 1) as f64;
    MetricCurve::over_grid(step, |t| {
        fraction(ious.iter().filter(|&&v| v > t).count(), ious.len())
    })
}

/// Exact continuous area under the success curve, i.e. the mean IoU.
pub fn s_auc(ious: &[f64]) -> Result<f64> {
    if ious.is_empty() {
        return Err(Error::data("no evaluable frames"));
    }
    Ok(ious.iter().sum::<f64>() / ious.len() as f64)
}

/// Fraction of frames with center error `<=` each of 0, 1, ..., 50 px.
pub fn precision_curve(errors: &[f64]) -> MetricCurve {
    MetricCurve::over_grid(1.0, |t| {
        fraction(errors.iter().filter(|&&e| e <= t).count(), errors.len())
    })
}

pub fn precision_at(errors: &[f64], threshold: f64) -> f64 {
    fraction(
        errors.iter().filter(|&&e| e <= threshold).count(),
        errors.len(),
    )
}

/// Fraction of frames with normalized error `<=` each of 0, 0.01, ..., 0.5.
pub fn norm_precision_curve(norm_errors: &[f64]) -> MetricCurve {
    let step = 0.5 / (CURVE_POINTS - 1) as f64;
    MetricCurve::over_grid(step, |t| {
        fraction(
            norm_errors.iter().filter(|&&e| e <= t).count(),
            norm_errors.len(),
        )
    })
}

/// Mean of the normalized precision curve over thresholds in [0, 0.5].
pub fn pnorm_auc(norm_errors: &[f64]) -> f64 {
    norm_precision_curve(norm_errors).mean()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Every sequence counts once.
    #[default]
    Sequence,
    /// All evaluated frames pooled.
    Frame,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsConfig {
    pub precision_threshold: f64,
    pub norm_divisor: NormDivisor,
    pub weighting: Weighting,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            precision_threshold: 20.0,
            norm_divisor: NormDivisor::GroundTruth,
            weighting: Weighting::Sequence,
        }
    }
}

/// Per-frame samples of one sequence (evaluated frames only).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SequenceSamples {
    pub name: String,
    pub ious: Vec<f64>,
    pub center_errors: Vec<f64>,
    pub norm_errors: Vec<f64>,
}

impl SequenceSamples {
    pub fn collect(seq: &Sequence, result: &TrackResult, divisor: NormDivisor) -> Result<Self> {
        if result.boxes.len() != seq.frames.len() {
            return Err(Error::data(format!(
                "{}: result count mismatch ({} boxes for {} frames)",
                seq.name,
                result.boxes.len(),
                seq.frames.len()
            )));
        }
        let mut s = SequenceSamples {
            name: seq.name.clone(),
            ..Default::default()
        };
        for (frame, tr) in seq.frames.iter().zip(&result.boxes) {
            let Some(gt) = frame.gt else { continue };
            s.ious.push(iou(tr, &gt));
            s.center_errors.push(center_error(tr, &gt));
            s.norm_errors.push(norm_center_error_with(tr, &gt, divisor));
        }
        Ok(s)
    }

    pub fn frames(&self) -> usize {
        self.ious.len()
    }
}

/// Headline triple plus curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub s_auc: f64,
    pub p_at_20: f64,
    pub p_norm_auc: f64,
    pub success_curve: MetricCurve,
    pub precision_curve: MetricCurve,
    pub norm_precision_curve: MetricCurve,
}

impl MetricSummary {
    pub fn from_samples(
        samples: &[&SequenceSamples],
        config: &MetricsConfig,
    ) -> Result<MetricSummary> {
        if samples.is_empty() || samples.iter().all(|s| s.frames() == 0) {
            return Err(Error::data("no evaluable frames"));
        }
        match config.weighting {
            Weighting::Frame => {
                let mut pooled = SequenceSamples::default();
                for s in samples {
                    pooled.ious.extend(&s.ious);
                    pooled.center_errors.extend(&s.center_errors);
                    pooled.norm_errors.extend(&s.norm_errors);
                }
                Self::single(&pooled, config)
            }
            Weighting::Sequence => {
                let per_seq = samples
                    .iter()
                    .filter(|s| s.frames() > 0)
                    .map(|s| Self::single(s, config))
                    .collect::<Result<Vec<_>>>()?;
                let n = per_seq.len() as f64;
                let mean = |f: fn(&MetricSummary) -> f64| per_seq.iter().map(f).sum::<f64>() / n;
                Ok(MetricSummary {
                    s_auc: mean(|m| m.s_auc),
                    p_at_20: mean(|m| m.p_at_20),
                    p_norm_auc: mean(|m| m.p_norm_auc),
                    success_curve: MetricCurve::average(per_seq.iter().map(|m| &m.success_curve))
                        .expect("non-empty"),
                    precision_curve: MetricCurve::average(
                        per_seq.iter().map(|m| &m.precision_curve),
                    )
                    .expect("non-empty"),
                    norm_precision_curve: MetricCurve::average(
                        per_seq.iter().map(|m| &m.norm_precision_curve),
                    )
                    .expect("non-empty"),
                })
            }
        }
    }

    fn single(s: &SequenceSamples, config: &MetricsConfig) -> Result<MetricSummary> {
        Ok(MetricSummary {
            s_auc: s_auc(&s.ious)?,
            p_at_20: precision_at(&s.center_errors, config.precision_threshold),
            p_norm_auc: pnorm_auc(&s.norm_errors),
            success_curve: success_curve(&s.ious),
            precision_curve: precision_curve(&s.center_errors),
            norm_precision_curve: norm_precision_curve(&s.norm_errors),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceScore {
    pub name: String,
    pub frames: usize,
    pub s_auc: f64,
    pub p_at_20: f64,
    pub p_norm_auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeReport {
    pub attribute: Attribute,
    pub sequence_count: usize,
    /// `None` when no sequence carries the attribute.
    pub summary: Option<MetricSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tracker_name: String,
    pub s_auc: f64,
    pub p_at_20: f64,
    pub p_norm_auc: f64,
    pub success_curve: MetricCurve,
    pub precision_curve: MetricCurve,
    pub norm_precision_curve: MetricCurve,
    pub attributes: Vec<AttributeReport>,
    pub sequences: Vec<SequenceScore>,
    pub evaluated_frame_count: usize,
}

impl EvalReport {
    pub fn attribute(&self, attr: Attribute) -> &AttributeReport {
        &self.attributes[attr.index()]
    }
}

/// Scores one tracker over a dataset. `attribute_sets[i]` belongs to
/// `dataset[i]`.
pub fn evaluate(
    tracker_name: &str,
    results: &BTreeMap<String, TrackResult>,
    dataset: &[Sequence],
    attribute_sets: &[AttributeSet],
    config: &MetricsConfig,
) -> Result<EvalReport> {
    if attribute_sets.len() != dataset.len() {
        return Err(Error::invalid(format!(
            "{} attribute sets for {} sequences",
            attribute_sets.len(),
            dataset.len()
        )));
    }
    let samples = dataset
        .iter()
        .map(|seq| {
            let result = results
                .get(&seq.name)
                .ok_or_else(|| Error::data(format!("{}: no result for sequence", seq.name)))?;
            SequenceSamples::collect(seq, result, config.norm_divisor)
        })
        .collect::<Result<Vec<_>>>()?;

    let all: Vec<&SequenceSamples> = samples.iter().collect();
    let overall = MetricSummary::from_samples(&all, config)?;

    let attributes = Attribute::ALL
        .into_iter()
        .map(|attr| {
            let subset: Vec<&SequenceSamples> = samples
                .iter()
                .zip(attribute_sets)
                .filter(|(_, set)| set.contains(attr))
                .map(|(s, _)| s)
                .collect();
            let summary = if subset.is_empty() {
                None
            } else {
                Some(MetricSummary::from_samples(&subset, config)?)
            };
            Ok(AttributeReport {
                attribute: attr,
                sequence_count: subset.len(),
                summary,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let sequences = samples
        .iter()
        .filter(|s| s.frames() > 0)
        .map(|s| {
            let m = MetricSummary::single(s, config)?;
            Ok(SequenceScore {
                name: s.name.clone(),
                frames: s.frames(),
                s_auc: m.s_auc,
                p_at_20: m.p_at_20,
                p_norm_auc: m.p_norm_auc,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(EvalReport {
        tracker_name: tracker_name.to_string(),
        s_auc: overall.s_auc,
        p_at_20: overall.p_at_20,
        p_norm_auc: overall.p_norm_auc,
        success_curve: overall.success_curve,
        precision_curve: overall.precision_curve,
        norm_precision_curve: overall.norm_precision_curve,
        attributes,
        sequences,
        evaluated_frame_count: samples.iter().map(|s| s.frames()).sum(),
    })
}

fn rank_order(a: &EvalReport, b: &EvalReport) -> Ordering {
    b.s_auc
        .total_cmp(&a.s_auc)
        .then_with(|| b.p_at_20.total_cmp(&a.p_at_20))
        .then_with(|| b.p_norm_auc.total_cmp(&a.p_norm_auc))
        .then_with(|| a.tracker_name.cmp(&b.tracker_name))
}

/// Descending S_AUC; ties broken by P, then P_Norm, then name.
pub fn rank(reports: &[EvalReport]) -> Vec<&EvalReport> {
    let mut out: Vec<&EvalReport> = reports.iter().collect();
    out.sort_by(|a, b| rank_order(a, b));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Frame, Visibility};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn b(x: f64, y: f64, w: f64, h: f64) -> BBox {
        BBox::new(x, y, w, h)
    }

    #[test]
    fn iou_examples() {
        let a = b(0.0, 0.0, 10.0, 10.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &b(20.0, 20.0, 5.0, 5.0)), 0.0);
        assert_relative_eq!(
            iou(&a, &b(5.0, 0.0, 10.0, 10.0)),
            50.0 / 150.0,
            epsilon = 1e-15
        );
        // touching edges
        assert_eq!(iou(&a, &b(10.0, 0.0, 10.0, 10.0)), 0.0);
    }

    #[test]
    fn center_error_examples() {
        let a = b(0.0, 0.0, 10.0, 10.0);
        assert_eq!(center_error(&a, &a), 0.0);
        assert_eq!(center_error(&a, &b(3.0, 4.0, 10.0, 10.0)), 5.0);
        assert_relative_eq!(center_error(&a, &b(0.0, 0.0, 20.0, 20.0)), 50f64.sqrt());
    }

    #[test]
    fn norm_center_error_examples() {
        let gt = b(0.0, 0.0, 10.0, 10.0);
        assert_eq!(norm_center_error(&gt, &gt), 0.0);
        assert_relative_eq!(
            norm_center_error(&b(3.0, 4.0, 10.0, 10.0), &gt),
            0.5,
            epsilon = 1e-15
        );
        let gt = b(0.0, 0.0, 20.0, 10.0);
        let tr = b(3.0, 4.0, 20.0, 10.0);
        assert_relative_eq!(
            norm_center_error(&tr, &gt),
            (0.0225f64 + 0.16).sqrt(),
            epsilon = 1e-15
        );
        assert_relative_eq!(norm_center_error(&tr, &gt), 0.427200187, epsilon = 1e-9);
    }

    #[test]
    fn success_curve_examples() {
        let c = success_curve(&[1.0, 1.0]);
        assert_eq!(c.thresholds.len(), 51);
        assert!(c.values[..50].iter().all(|&v| v == 1.0));
        assert_eq!(c.values[50], 0.0);
        assert!(success_curve(&[0.0; 4]).values.iter().all(|&v| v == 0.0));
        assert_eq!(success_curve(&[0.25, 0.75]).value_at(0.5), 0.5);
    }

    #[test]
    fn s_auc_examples() {
        assert_eq!(s_auc(&[1.0; 7]).unwrap(), 1.0);
        assert_relative_eq!(s_auc(&[0.2, 0.4, 0.6]).unwrap(), 0.4, epsilon = 1e-15);
        assert!(s_auc(&[])
            .unwrap_err()
            .to_string()
            .contains("no evaluable frames"));
    }

    #[test]
    fn precision_examples() {
        assert_eq!(precision_at(&[0.0, 0.0], 20.0), 1.0);
        assert_eq!(precision_at(&[5.0, 25.0], 20.0), 0.5);
        assert_eq!(precision_at(&[20.0], 20.0), 1.0);
        assert_eq!(precision_curve(&[5.0, 25.0]).value_at(20.0), 0.5);
    }

    #[test]
    fn pnorm_examples() {
        assert_eq!(pnorm_auc(&[0.0, 0.0]), 1.0);
        assert_eq!(pnorm_auc(&[0.6, 0.9]), 0.0);
        assert_relative_eq!(pnorm_auc(&[0.25]), 26.0 / 51.0, epsilon = 1e-15);
    }

    fn report(name: &str, s: f64, p: f64, pn: f64) -> EvalReport {
        let c = MetricCurve {
            thresholds: vec![],
            values: vec![],
        };
        EvalReport {
            tracker_name: name.into(),
            s_auc: s,
            p_at_20: p,
            p_norm_auc: pn,
            success_curve: c.clone(),
            precision_curve: c.clone(),
            norm_precision_curve: c,
            attributes: vec![],
            sequences: vec![],
            evaluated_frame_count: 0,
        }
    }

    #[test]
    fn ranking() {
        let rs = vec![report("a", 0.3, 0.1, 0.1), report("b", 0.5, 0.1, 0.1)];
        let names: Vec<_> = rank(&rs).iter().map(|r| r.tracker_name.as_str()).collect();
        assert_eq!(names, ["b", "a"]);
        let rs = vec![report("a", 0.5, 0.4, 0.1), report("b", 0.5, 0.6, 0.1)];
        let names: Vec<_> = rank(&rs).iter().map(|r| r.tracker_name.as_str()).collect();
        assert_eq!(names, ["b", "a"]);
        let rs = vec![report("x", 0.1, 0.1, 0.1)];
        assert_eq!(rank(&rs)[0].tracker_name, "x");
    }

    fn seq(name: &str, vis: &[Visibility]) -> Sequence {
        Sequence {
            name: name.into(),
            frames: vis
                .iter()
                .enumerate()
                .map(|(i, v)| Frame {
                    index: i + 1,
                    image_path: Default::default(),
                    gt: v.has_box().then(|| b(i as f64 * 3.0, 10.0, 20.0, 30.0)),
                    visibility: *v,
                })
                .collect(),
            manual_attributes: AttributeSet::empty(),
            image_size: (200, 200),
        }
    }

    #[test]
    fn evaluate_perfect_and_exclusion() {
        let mut vis = vec![Visibility::Visible; 10];
        vis[4] = Visibility::FOC;
        vis[5] = Visibility::FOC;
        vis[7] = Visibility::POC;
        let s = seq("s", &vis);
        let result = TrackResult {
            sequence_name: "s".into(),
            boxes: s.gt_lines(),
        };
        let results = BTreeMap::from([("s".to_string(), result)]);
        let sets = [AttributeSet::empty().with(Attribute::IV)];
        let r = evaluate("gt", &results, &[s], &sets, &MetricsConfig::default()).unwrap();
        assert_eq!(r.evaluated_frame_count, 8);
        assert_eq!((r.s_auc, r.p_at_20, r.p_norm_auc), (1.0, 1.0, 1.0));
        let iv = r.attribute(Attribute::IV);
        assert_eq!(iv.sequence_count, 1);
        assert_eq!(iv.summary.as_ref().unwrap().s_auc, 1.0);
        assert!(r.attribute(Attribute::LAI).summary.is_none());
    }

    #[test]
    fn equal_sequence_weighting() {
        let long = seq("long", &[Visibility::Visible; 30]);
        let short = seq("short", &[Visibility::Visible; 2]);
        let mut bad = short.gt_lines();
        bad[1] = bad[1].translated(500.0, 0.0);
        let results = BTreeMap::from([
            (
                "long".to_string(),
                TrackResult {
                    sequence_name: "long".into(),
                    boxes: long.gt_lines(),
                },
            ),
            (
                "short".to_string(),
                TrackResult {
                    sequence_name: "short".into(),
                    boxes: bad,
                },
            ),
        ]);
        let data = [long, short];
        let sets = [AttributeSet::empty(); 2];
        let r = evaluate("t", &results, &data, &sets, &MetricsConfig::default()).unwrap();
        // long: 1.0, short: mean(1, 0) = 0.5
        assert_relative_eq!(r.s_auc, 0.75, epsilon = 1e-15);
        let cfg = MetricsConfig {
            weighting: Weighting::Frame,
            ..Default::default()
        };
        let r = evaluate("t", &results, &data, &sets, &cfg).unwrap();
        assert_relative_eq!(r.s_auc, 31.0 / 32.0, epsilon = 1e-15);
    }

    fn arb_box() -> impl Strategy<Value = BBox> {
        (-50.0..50.0f64, -50.0..50.0f64, 0.5..40.0f64, 0.5..40.0f64)
            .prop_map(|(x, y, w, h)| BBox::new(x, y, w, h))
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_translation_invariant(a in arb_box(), c in arb_box(), dx in -20.0..20.0f64, dy in -20.0..20.0f64) {
            prop_assert!((iou(&a, &c) - iou(&c, &a)).abs() < 1e-12);
            prop_assert!((iou(&a, &a) - 1.0).abs() < 1e-12);
            let moved = iou(&a.translated(dx, dy), &c.translated(dx, dy));
            prop_assert!((moved - iou(&a, &c)).abs() < 1e-9);
            let v = iou(&a, &c);
            prop_assert!((0.0..=1.0).contains(&v));
        }

        #[test]
        fn center_errors_scale(a in arb_box(), c in arb_box(), s in 0.1..10.0f64) {
            let scale = |q: &BBox| BBox::new(q.x * s, q.y * s, q.w * s, q.h * s);
            let (sa, sc) = (scale(&a), scale(&c));
            prop_assert!((norm_center_error(&sa, &sc) - norm_center_error(&a, &c)).abs() < 1e-9);
            prop_assert!((center_error(&sa, &sc) - s * center_error(&a, &c)).abs() < 1e-9 * (1.0 + s));
        }

        #[test]
        fn curves_are_monotone(ious in prop::collection::vec(0.0..=1.0f64, 1..50), errs in prop::collection::vec(0.0..80.0f64, 1..50)) {
            let s = success_curve(&ious);
            prop_assert!(s.values.windows(2).all(|w| w[1] <= w[0]));
            let p = precision_curve(&errs);
            prop_assert!(p.values.windows(2).all(|w| w[1] >= w[0]));
            let n = norm_precision_curve(&errs.iter().map(|e| e / 100.0).collect::<Vec<_>>());
            prop_assert!(n.values.windows(2).all(|w| w[1] >= w[0]));
        }

        #[test]
        fn trapezoid_close_to_mean_iou(ious in prop::collection::vec(0.0..=1.0f64, 1..200)) {
            let t = success_curve(&ious).trapezoid_auc();
            prop_assert!((t - s_auc(&ious).unwrap()).abs() <= 0.02);
        }

        #[test]
        fn rank_is_permutation_invariant(vals in prop::collection::vec((0..4u8, 0..4u8, 0..4u8), 1..8), seed in any::<u64>()) {
            let reports: Vec<EvalReport> = vals.iter().enumerate()
                .map(|(i, (s, p, n))| report(&format!("t{i}"), *s as f64 / 4.0, *p as f64 / 4.0, *n as f64 / 4.0))
                .collect();
            let mut shuffled = reports.clone();
            let k = (seed as usize) % shuffled.len();
            shuffled.rotate_left(k);
            shuffled.reverse();
            let a: Vec<_> = rank(&reports).iter().map(|r| r.tracker_name.clone()).collect();
            let b: Vec<_> = rank(&shuffled).iter().map(|r| r.tracker_name.clone()).collect();
            prop_assert_eq!(a, b);
        }
    }
}
