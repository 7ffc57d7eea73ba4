//! On-disk evaluation outputs.
//!
//! ```text
//! <out>/ranking.csv
//! <out>/report.json
//! <out>/cooccurrence.csv                      (when given)
//! <out>/curves/<tracker>_{success,precision,norm_precision}.csv
//! <out>/attributes/<ATTR>_{success,precision,norm_precision}.csv
//! <out>/attributes/summary.csv
//! ```
//!
//! CSV numbers use six significant digits; `report.json` keeps full
//! precision so it reloads to identical values.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attributes::Attribute;
use crate::metrics::{rank, EvalReport, MetricCurve, MetricSummary};
use crate::{Error, Result};

/// `%.6g`-style formatting: six significant digits, trailing zeros removed,
/// scientific notation below `1e-4` or from `1e6`.
pub fn fmt_sig6(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    strip_zeros(&format!("{v:.*}", (5 - exp) as usize)).to_string()
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingRow {
    pub rank: usize,
    pub tracker: String,
    pub s_auc: f64,
    pub p: f64,
    pub p_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RankingTable {
    pub rows: Vec<RankingRow>,
}

impl RankingTable {
    pub fn new(reports: &[EvalReport]) -> Self {
        let rows = rank(reports)
            .into_iter()
            .enumerate()
            .map(|(i, r)| RankingRow {
                rank: i + 1,
                tracker: r.tracker_name.clone(),
                s_auc: r.s_auc,
                p: r.p_at_20,
                p_norm: r.p_norm_auc,
            })
            .collect();
        Self { rows }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("rank,tracker,s_auc,p,p_norm\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.rank,
                r.tracker,
                fmt_sig6(r.s_auc),
                fmt_sig6(r.p),
                fmt_sig6(r.p_norm)
            );
        }
        out
    }

    /// Aligned text table with three decimals.
    pub fn to_text(&self) -> String {
        let width = self
            .rows
            .iter()
            .map(|r| r.tracker.len())
            .max()
            .unwrap_or(0)
            .max("tracker".len());
        let mut out = format!(
            "{:>4}  {:<width$}  {:>6}  {:>6}  {:>6}\n",
            "rank", "tracker", "S_AUC", "P", "P_Norm"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:>4}  {:<width$}  {:>6.3}  {:>6.3}  {:>6.3}",
                r.rank, r.tracker, r.s_auc, r.p, r.p_norm
            );
        }
        out
    }
}

pub fn curve_csv(curve: &MetricCurve) -> String {
    let mut out = String::from("threshold,value\n");
    for (t, v) in curve.thresholds.iter().zip(&curve.values) {
        let _ = writeln!(out, "{},{}", fmt_sig6(*t), fmt_sig6(*v));
    }
    out
}

/// One curve kind for one attribute, one column per tracker. Trackers with
/// no sequence carrying the attribute get empty cells.
fn attribute_curve_csv(
    reports: &[EvalReport],
    attr: Attribute,
    pick: fn(&MetricSummary) -> &MetricCurve,
    grid: &[f64],
) -> String {
    let mut out = String::from("threshold");
    for r in reports {
        out.push(',');
        out.push_str(&r.tracker_name);
    }
    out.push('\n');
    for (i, t) in grid.iter().enumerate() {
        out.push_str(&fmt_sig6(*t));
        for r in reports {
            out.push(',');
            if let Some(s) = &r.attribute(attr).summary {
                out.push_str(&fmt_sig6(pick(s).values[i]));
            }
        }
        out.push('\n');
    }
    out
}

fn attribute_summary_csv(reports: &[EvalReport]) -> String {
    let mut out = String::from("attribute,tracker,sequences,s_auc,p,p_norm\n");
    for attr in Attribute::ALL {
        for r in reports {
            let a = r.attribute(attr);
            let (s, p, pn) = match &a.summary {
                Some(m) => (
                    fmt_sig6(m.s_auc),
                    fmt_sig6(m.p_at_20),
                    fmt_sig6(m.p_norm_auc),
                ),
                None => Default::default(),
            };
            let _ = writeln!(
                out,
                "{},{},{},{s},{p},{pn}",
                attr.name(),
                r.tracker_name,
                a.sequence_count
            );
        }
    }
    out
}

pub fn cooccurrence_csv(matrix: &[[u32; 12]; 12]) -> String {
    let mut out = String::new();
    for a in Attribute::ALL {
        out.push(',');
        out.push_str(a.name());
    }
    out.push('\n');
    for a in Attribute::ALL {
        out.push_str(a.name());
        for v in &matrix[a.index()] {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn check_tracker_name(name: &str) -> Result<()> {
    if name.is_empty() || name.contains(['/', '\\', ',', '\n']) || name == "." || name == ".." {
        return Err(Error::invalid(format!("unusable tracker name {name:?}")));
    }
    Ok(())
}

/// Writes every report file under `out_dir`. Output bytes depend only on
/// the inputs.
pub fn emit_report(
    reports: &[EvalReport],
    cooccurrence: Option<&[[u32; 12]; 12]>,
    out_dir: &Path,
) -> Result<()> {
    if reports.is_empty() {
        return Err(Error::data("no tracker reports to write"));
    }
    for r in reports {
        check_tracker_name(&r.tracker_name)?;
    }
    write(
        &out_dir.join("ranking.csv"),
        &RankingTable::new(reports).to_csv(),
    )?;
    let mut json = serde_json::to_string_pretty(reports)?;
    json.push('\n');
    write(&out_dir.join("report.json"), &json)?;

    let curves = out_dir.join("curves");
    for r in reports {
        for (kind, curve) in [
            ("success", &r.success_curve),
            ("precision", &r.precision_curve),
            ("norm_precision", &r.norm_precision_curve),
        ] {
            write(
                &curves.join(format!("{}_{kind}.csv", r.tracker_name)),
                &curve_csv(curve),
            )?;
        }
    }

    let attrs = out_dir.join("attributes");
    let kinds: [(&str, fn(&MetricSummary) -> &MetricCurve, &MetricCurve); 3] = [
        ("success", |s| &s.success_curve, &reports[0].success_curve),
        (
            "precision",
            |s| &s.precision_curve,
            &reports[0].precision_curve,
        ),
        (
            "norm_precision",
            |s| &s.norm_precision_curve,
            &reports[0].norm_precision_curve,
        ),
    ];
    for attr in Attribute::ALL {
        for (kind, pick, grid) in &kinds {
            write(
                &attrs.join(format!("{}_{kind}.csv", attr.name())),
                &attribute_curve_csv(reports, attr, *pick, &grid.thresholds),
            )?;
        }
    }
    write(&attrs.join("summary.csv"), &attribute_summary_csv(reports))?;

    if let Some(m) = cooccurrence {
        write(&out_dir.join("cooccurrence.csv"), &cooccurrence_csv(m))?;
    }
    Ok(())
}

/// Reads back `report.json`.
pub fn load_report(path: &Path) -> Result<Vec<EvalReport>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attributes::AttributeSet;
    use crate::dataset::{BBox, Frame, Sequence, TrackResult, Visibility};
    use crate::metrics::{evaluate, MetricsConfig};
    use std::collections::BTreeMap;
    use std::path::PathBuf;

    #[test]
    fn sig6_matches_printf_g() {
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (0.5, "0.5"),
            (0.123456789, "0.123457"),
            (123456.7, "123457"),
            (1234567.0, "1.23457e+06"),
            (0.0001, "0.0001"),
            (0.00001234567, "1.23457e-05"),
            (-2.5, "-2.5"),
            (0.02, "0.02"),
            (0.999999, "0.999999"),
            (0.9999996, "1"),
            (999999.5, "1e+06"),
            (f64::NAN, "nan"),
        ];
        for (v, s) in cases {
            assert_eq!(fmt_sig6(v), s, "{v}");
        }
    }

    fn fixture() -> (Vec<Sequence>, Vec<AttributeSet>) {
        let seq = |name: &str, n: usize| Sequence {
            name: name.into(),
            frames: (1..=n)
                .map(|i| Frame {
                    index: i,
                    image_path: PathBuf::new(),
                    gt: Some(BBox::new(10.0 + i as f64, 10.0, 20.0, 10.0)),
                    visibility: Visibility::Visible,
                })
                .collect(),
            manual_attributes: AttributeSet::empty(),
            image_size: (100, 100),
        };
        (
            vec![seq("a", 8), seq("b", 5)],
            vec![
                AttributeSet::empty().with(Attribute::LAI),
                AttributeSet::empty().with(Attribute::SV),
            ],
        )
    }

    fn reports() -> Vec<EvalReport> {
        let (data, sets) = fixture();
        let mk = |name: &str, shift: f64| {
            let results: BTreeMap<String, TrackResult> = data
                .iter()
                .map(|s| {
                    let boxes = s
                        .frames
                        .iter()
                        .map(|f| f.gt.unwrap().translated(shift * f.index as f64, 0.0))
                        .collect();
                    (
                        s.name.clone(),
                        TrackResult {
                            sequence_name: s.name.clone(),
                            boxes,
                        },
                    )
                })
                .collect();
            evaluate(name, &results, &data, &sets, &MetricsConfig::default()).unwrap()
        };
        vec![mk("drift", 1.3), mk("exact", 0.0)]
    }

    #[test]
    fn ranking_orders_by_s_auc() {
        let t = RankingTable::new(&reports());
        assert_eq!(t.rows[0].tracker, "exact");
        assert_eq!(t.rows[0].rank, 1);
        assert!(t
            .to_csv()
            .starts_with("rank,tracker,s_auc,p,p_norm\n1,exact,1,1,1\n"));
        assert!(t.to_text().contains("1.000"));
    }

    #[test]
    fn outputs_are_byte_stable_and_json_round_trips() {
        let reps = reports();
        let m = crate::attributes::cooccurrence_matrix(fixture().1.iter());
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        emit_report(&reps, Some(&m), a.path()).unwrap();
        emit_report(&reps, Some(&m), b.path()).unwrap();
        let mut files = Vec::new();
        for sub in ["", "curves", "attributes"] {
            for e in fs::read_dir(a.path().join(sub)).unwrap() {
                let p = e.unwrap().path();
                if p.is_file() {
                    files.push(p.strip_prefix(a.path()).unwrap().to_path_buf());
                }
            }
        }
        assert_eq!(files.len(), 3 + 6 + 12 * 3 + 1);
        for f in &files {
            assert_eq!(
                fs::read(a.path().join(f)).unwrap(),
                fs::read(b.path().join(f)).unwrap()
            );
        }
        assert_eq!(load_report(&a.path().join("report.json")).unwrap(), reps);

        let lai = fs::read_to_string(a.path().join("attributes/LAI_success.csv")).unwrap();
        assert!(lai.starts_with("threshold,drift,exact\n0,"));
        assert_eq!(lai.lines().count(), 52);
        let iv = fs::read_to_string(a.path().join("attributes/IV_success.csv")).unwrap();
        assert_eq!(iv.lines().nth(1).unwrap(), "0,,");
        let co = fs::read_to_string(a.path().join("cooccurrence.csv")).unwrap();
        assert!(co.starts_with(",IV,SV,MB,OV,POC,ROT,FOC,VC,SOB,ARC,LR,LAI\n"));
    }

    #[test]
    fn rejects_path_like_names() {
        let mut reps = reports();
        reps[0].tracker_name = "../x".into();
        let d = tempfile::tempdir().unwrap();
        assert!(emit_report(&reps, None, d.path()).is_err());
    }
}
