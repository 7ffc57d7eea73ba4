//! Gated darkness-clue prompt aggregation.
//!
//! A stream of token features `H^0 .. H^n` (T tokens x d channels) passes
//! through residual blocks `H^i = tanh(H^{i-1} W_i + b_i) + H^{i-1}`. Before
//! every block a prompt extractor `Phi_i(H) = tanh(H D_i) U_i` (bottleneck
//! r = d / 4) produces a clue, and a gate blends it with the running prompt:
//!
//! ```text
//! P^i  = G^i * Phi_i(H^{i-1}) + (1 - G^i) * P^{i-1},   G^i = sigmoid(g_i), G^1 = 1
//! F_ha = H^n + rho * P^n,                               rho = sigmoid(r_n)
//! ```
//!
//! The prompt path never feeds back into the stream before the final fusion.
//! [`unrolled_prompt`] evaluates the recurrence in closed form and
//! [`grad_check`] compares chain-rule gradients of `L = 0.5 ||F_ha||^2` with
//! central differences.

use std::time::Instant;

use image::RgbImage;
use nalgebra::{DMatrix, DVector, RowDVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::attributes::AttributeSet;
use crate::dataset::{BBox, Sequence};
use crate::enhance::EnhanceOp;
use crate::metrics::{evaluate, MetricsConfig};
use crate::ope::{run_frames, Tracker};
use crate::synth::{preset, SynthOutput};
use crate::trackers::ncc::{Candidate, LumaIntegral};
use crate::trackers::{NccConfig, NccTracker};
use crate::{Error, Result};

/// Token features, one row per token.
pub type TokenMatrix = DMatrix<f64>;

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateGranularity {
    /// One gate per layer.
    #[default]
    Scalar,
    /// One gate per channel per layer.
    PerChannel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    /// Pre-sigmoid gate, length 1 or d.
    pub gate_pre: DVector<f64>,
    /// d x r
    pub down: DMatrix<f64>,
    /// r x d
    pub up: DMatrix<f64>,
    /// d x d
    pub weight: DMatrix<f64>,
    /// 1 x d
    pub bias: RowDVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateParams {
    pub layers: Vec<LayerParams>,
    /// Pre-sigmoid aggregation weight.
    pub rho_pre: f64,
}

impl GateParams {
    /// All-zero weights (gates at 0.5, rho at 0.5).
    pub fn zeros(channels: usize, max_layers: usize, granularity: GateGranularity) -> Self {
        let r = (channels / 4).max(1);
        let g = match granularity {
            GateGranularity::Scalar => 1,
            GateGranularity::PerChannel => channels,
        };
        let layer = LayerParams {
            gate_pre: DVector::zeros(g),
            down: DMatrix::zeros(channels, r),
            up: DMatrix::zeros(r, channels),
            weight: DMatrix::zeros(channels, channels),
            bias: RowDVector::zeros(channels),
        };
        Self {
            layers: vec![layer; max_layers],
            rho_pre: 0.0,
        }
    }

    /// Seeded Gaussian weights; `weight_scale` multiplies the block weights
    /// (`1 / sqrt(d)` based otherwise).
    pub fn random(
        channels: usize,
        max_layers: usize,
        granularity: GateGranularity,
        weight_scale: f64,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(channels, max_layers, granularity);
        let unit = Normal::new(0.0, 1.0).expect("valid normal");
        let inv = 1.0 / (channels as f64).sqrt();
        let fill = |m: &mut DMatrix<f64>, scale: f64, rng: &mut ChaCha8Rng| {
            for v in m.iter_mut() {
                *v = unit.sample(rng) * scale;
            }
        };
        for layer in &mut p.layers {
            for v in layer.gate_pre.iter_mut() {
                *v = unit.sample(&mut rng);
            }
            fill(&mut layer.down, inv, &mut rng);
            let r = layer.up.nrows() as f64;
            fill(&mut layer.up, 1.0 / r.sqrt(), &mut rng);
            fill(&mut layer.weight, inv * weight_scale, &mut rng);
            for v in layer.bias.iter_mut() {
                *v = unit.sample(&mut rng) * 0.1 * weight_scale;
            }
        }
        p.rho_pre = unit.sample(&mut rng);
        p
    }

    pub fn channels(&self) -> usize {
        self.layers.first().map(|l| l.weight.nrows()).unwrap_or(0)
    }

    pub fn max_layers(&self) -> usize {
        self.layers.len()
    }

    /// `G^i` per channel; layer 1 is pinned to 1.
    pub fn gate(&self, i: usize) -> RowDVector<f64> {
        let d = self.channels();
        if i == 1 {
            return RowDVector::from_element(d, 1.0);
        }
        let pre = &self.layers[i - 1].gate_pre;
        if pre.len() == 1 {
            RowDVector::from_element(d, sigmoid(pre[0]))
        } else {
            RowDVector::from_iterator(d, pre.iter().map(|&g| sigmoid(g)))
        }
    }

    pub fn rho(&self) -> f64 {
        sigmoid(self.rho_pre)
    }

    fn check_layers(&self, n: usize) -> Result<()> {
        if n < 1 {
            return Err(Error::invalid("n_layers must be >= 1"));
        }
        if n > self.layers.len() {
            return Err(Error::invalid(format!(
                "n_layers {n} exceeds the {} parameterized layers",
                self.layers.len()
            )));
        }
        Ok(())
    }
}

/// Running prompt `P^i` after layer `layer`.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptState {
    pub prompt: TokenMatrix,
    pub layer: usize,
}

impl PromptState {
    /// State before layer 1; its value is irrelevant because `G^1 = 1`.
    pub fn empty(tokens: usize, channels: usize) -> Self {
        Self {
            prompt: TokenMatrix::zeros(tokens, channels),
            layer: 0,
        }
    }
}

fn check_finite(m: &TokenMatrix, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} has non-finite entries")))
    }
}

fn check_shape(a: &TokenMatrix, b: &TokenMatrix, what: &str) -> Result<()> {
    if a.shape() == b.shape() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "{what}: shape {:?} does not match {:?}",
            a.shape(),
            b.shape()
        )))
    }
}

/// `Phi_i(H) = tanh(H D_i) U_i`.
pub fn dcp_extract(h: &TokenMatrix, params: &GateParams, i: usize) -> Result<TokenMatrix> {
    let layer = params
        .layers
        .get(i.wrapping_sub(1))
        .ok_or_else(|| Error::invalid(format!("no parameters for layer {i}")))?;
    if h.ncols() != layer.down.nrows() {
        return Err(Error::invalid(format!(
            "tokens have {} channels, extractor expects {}",
            h.ncols(),
            layer.down.nrows()
        )));
    }
    Ok((h * &layer.down).map(f64::tanh) * &layer.up)
}

/// Residual block `tanh(H W_i + b_i) + H`.
pub fn stream_block(h: &TokenMatrix, params: &GateParams, i: usize) -> TokenMatrix {
    let layer = &params.layers[i - 1];
    let mut pre = h * &layer.weight;
    for mut row in pre.row_iter_mut() {
        row += &layer.bias;
    }
    pre.map(f64::tanh) + h
}

/// Convex blend of a fresh clue with the previous prompt.
pub fn blend(clue: &TokenMatrix, prev: &TokenMatrix, gate: &RowDVector<f64>) -> TokenMatrix {
    let mut out = clue.clone();
    for (c, mut col) in out.column_iter_mut().enumerate() {
        let g = gate[c];
        for (v, p) in col.iter_mut().zip(prev.column(c).iter()) {
            *v = g * *v + (1.0 - g) * p;
        }
    }
    out
}

/// One gate update: `P^i = G^i Phi_i(H^{i-1}) + (1 - G^i) P^{i-1}`.
pub fn gate_step(
    prev: &PromptState,
    h_prev: &TokenMatrix,
    params: &GateParams,
    i: usize,
) -> Result<PromptState> {
    check_finite(h_prev, "feature stream")?;
    check_finite(&prev.prompt, "previous prompt")?;
    let clue = dcp_extract(h_prev, params, i)?;
    check_shape(&clue, &prev.prompt, "prompt")?;
    Ok(PromptState {
        prompt: blend(&clue, &prev.prompt, &params.gate(i)),
        layer: i,
    })
}

/// `F_ha = H_xn + rho P^n`.
pub fn aggregate(h_xn: &TokenMatrix, prompt: &PromptState, rho: f64) -> Result<TokenMatrix> {
    check_shape(h_xn, &prompt.prompt, "aggregate")?;
    Ok(h_xn + &prompt.prompt * rho)
}

/// Every intermediate of a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// `H^0 .. H^n`
    pub stream: Vec<TokenMatrix>,
    /// `Phi_i(H^{i-1})` for i = 1..n
    pub clues: Vec<TokenMatrix>,
    /// `P^1 .. P^n`
    pub prompts: Vec<TokenMatrix>,
    pub output: TokenMatrix,
}

pub fn forward_trace(h0: &TokenMatrix, params: &GateParams, n: usize) -> Result<ForwardTrace> {
    params.check_layers(n)?;
    check_finite(h0, "input tokens")?;
    let mut stream = vec![h0.clone()];
    let mut clues = Vec::with_capacity(n);
    let mut prompts = Vec::with_capacity(n);
    let mut state = PromptState::empty(h0.nrows(), h0.ncols());
    for i in 1..=n {
        let h_prev = &stream[i - 1];
        clues.push(dcp_extract(h_prev, params, i)?);
        state = gate_step(&state, h_prev, params, i)?;
        prompts.push(state.prompt.clone());
        let next = stream_block(h_prev, params, i);
        stream.push(next);
    }
    let output = aggregate(&stream[n], &state, params.rho())?;
    Ok(ForwardTrace {
        stream,
        clues,
        prompts,
        output,
    })
}

/// `F_ha` after `n` layers.
pub fn forward(h0: &TokenMatrix, params: &GateParams, n: usize) -> Result<TokenMatrix> {
    Ok(forward_trace(h0, params, n)?.output)
}

/// `H^n` alone, the prompt-free stream.
pub fn stream_only(h0: &TokenMatrix, params: &GateParams, n: usize) -> Result<TokenMatrix> {
    params.check_layers(n)?;
    let mut h = h0.clone();
    for i in 1..=n {
        h = stream_block(&h, params, i);
    }
    Ok(h)
}

/// Per-channel weight of each clue in `P^n`:
/// `c_i = G^i prod_{j=i+1..n} (1 - G^j)` with `G^1 = 1`.
pub fn unrolled_coefficients(params: &GateParams, n: usize) -> Result<Vec<RowDVector<f64>>> {
    params.check_layers(n)?;
    let d = params.channels();
    let mut coeffs = vec![RowDVector::zeros(d); n];
    let mut tail = RowDVector::from_element(d, 1.0);
    for i in (1..=n).rev() {
        let g = params.gate(i);
        coeffs[i - 1] = g.component_mul(&tail);
        tail = tail.component_mul(&g.map(|v| 1.0 - v));
    }
    Ok(coeffs)
}

/// `P^n` from the closed form instead of the recurrence.
pub fn unrolled_prompt(h0: &TokenMatrix, params: &GateParams, n: usize) -> Result<TokenMatrix> {
    let coeffs = unrolled_coefficients(params, n)?;
    let mut h = h0.clone();
    let mut out = TokenMatrix::zeros(h0.nrows(), h0.ncols());
    for (i, c) in (1..=n).zip(&coeffs) {
        let clue = dcp_extract(&h, params, i)?;
        for (col, mut dst) in out.column_iter_mut().enumerate() {
            dst.axpy(c[col], &clue.column(col), 1.0);
        }
        h = stream_block(&h, params, i);
    }
    Ok(out)
}

/// `0.5 ||F_ha||^2`.
pub fn loss(h0: &TokenMatrix, params: &GateParams, n: usize) -> Result<f64> {
    Ok(0.5 * forward(h0, params, n)?.norm_squared())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradReport {
    /// `dL/dg_i` per layer (layer 1 is pinned and always zero).
    pub analytic_gates: Vec<DVector<f64>>,
    pub numeric_gates: Vec<DVector<f64>>,
    pub analytic_rho: f64,
    pub numeric_rho: f64,
    pub max_abs_error: f64,
    /// `|a - f| / max(|a|, |f|, 1e-7)`, maximized over every parameter.
    pub max_rel_error: f64,
}

/// Chain-rule gradients w.r.t. the gate and aggregation pre-activations.
pub fn gate_gradients(
    h0: &TokenMatrix,
    params: &GateParams,
    n: usize,
) -> Result<(Vec<DVector<f64>>, f64)> {
    let trace = forward_trace(h0, params, n)?;
    let f = &trace.output;
    let p_n = &trace.prompts[n - 1];
    let rho = params.rho();
    let d_rho = f.dot(p_n) * rho * (1.0 - rho);

    let mut grads: Vec<DVector<f64>> = params.layers[..n]
        .iter()
        .map(|l| DVector::zeros(l.gate_pre.len()))
        .collect();
    // dL/dP^i, starting from dL/dP^n = rho F
    let mut delta = f * rho;
    for i in (2..=n).rev() {
        let g = params.gate(i);
        let diff = &trace.clues[i - 1] - &trace.prompts[i - 2];
        let per_channel: Vec<f64> = (0..f.ncols())
            .map(|c| delta.column(c).dot(&diff.column(c)) * g[c] * (1.0 - g[c]))
            .collect();
        let grad = &mut grads[i - 1];
        if grad.len() == 1 {
            grad[0] = per_channel.iter().sum();
        } else {
            for (dst, v) in grad.iter_mut().zip(per_channel) {
                *dst = v;
            }
        }
        for (c, mut col) in delta.column_iter_mut().enumerate() {
            col *= 1.0 - g[c];
        }
    }
    Ok((grads, d_rho))
}

/// Compares [`gate_gradients`] with central differences of step `1e-5`.
pub fn grad_check(h0: &TokenMatrix, params: &GateParams, n: usize) -> Result<GradReport> {
    const STEP: f64 = 1e-5;
    let (analytic_gates, analytic_rho) = gate_gradients(h0, params, n)?;
    let mut numeric_gates = Vec::with_capacity(n);
    for i in 1..=n {
        let len = params.layers[i - 1].gate_pre.len();
        let mut g = DVector::zeros(len);
        for k in 0..len {
            let mut plus = params.clone();
            plus.layers[i - 1].gate_pre[k] += STEP;
            let mut minus = params.clone();
            minus.layers[i - 1].gate_pre[k] -= STEP;
            g[k] = (loss(h0, &plus, n)? - loss(h0, &minus, n)?) / (2.0 * STEP);
        }
        numeric_gates.push(g);
    }
    let mut plus = params.clone();
    plus.rho_pre += STEP;
    let mut minus = params.clone();
    minus.rho_pre -= STEP;
    let numeric_rho = (loss(h0, &plus, n)? - loss(h0, &minus, n)?) / (2.0 * STEP);

    let pairs = analytic_gates
        .iter()
        .zip(&numeric_gates)
        .flat_map(|(a, f)| a.iter().copied().zip(f.iter().copied()).collect::<Vec<_>>())
        .chain(std::iter::once((analytic_rho, numeric_rho)));
    let (mut max_abs, mut max_rel) = (0.0f64, 0.0f64);
    for (a, f) in pairs {
        let abs = (a - f).abs();
        max_abs = max_abs.max(abs);
        max_rel = max_rel.max(abs / a.abs().max(f.abs()).max(1e-7));
    }
    Ok(GradReport {
        analytic_gates,
        numeric_gates,
        analytic_rho,
        numeric_rho,
        max_abs_error: max_abs,
        max_rel_error: max_rel,
    })
}

/// NCC tracker whose final choice among the best-scoring candidates is made
/// on prompt-aggregated candidate tokens.
///
/// Each update takes the top `tokens` NCC candidates, describes each with a
/// `channels`-wide feature row (weighted score, offset, window statistics, 3x3 cell
/// means), runs [`forward`] and moves to the candidate with the largest
/// first output channel.
pub struct PromptGatedNcc {
    ncc: NccTracker,
    params: GateParams,
    layers: usize,
    tokens: usize,
    radius: i64,
}

impl PromptGatedNcc {
    pub const CHANNELS: usize = 16;
    /// Scale of the NCC score channel; keeps the learned terms a re-ranking
    /// among near-ties instead of an override.
    pub const SCORE_WEIGHT: f64 = 10.0;

    pub fn new(params: GateParams, layers: usize, tokens: usize, search_radius: i64) -> Self {
        Self {
            ncc: NccTracker::new(NccConfig { search_radius }),
            params,
            layers,
            tokens,
            radius: search_radius.max(1),
        }
    }

    fn features(&self, luma: &LumaIntegral, c: &Candidate, bbox: &BBox) -> [f64; Self::CHANNELS] {
        let x = bbox.x.round() as i64 + c.dx;
        let y = bbox.y.round() as i64 + c.dy;
        let (w, h) = (bbox.w.round() as i64, bbox.h.round() as i64);
        let window = luma.window(x, y, w, h);
        let n = window.len() as f64;
        let mean = window.iter().sum::<i64>() as f64 / n;
        let var = window
            .iter()
            .map(|&v| (v as f64 - mean).powi(2))
            .sum::<f64>()
            / n;
        let mut f = [0.0; Self::CHANNELS];
        f[0] = c.score * Self::SCORE_WEIGHT;
        f[1] = c.dx as f64 / self.radius as f64;
        f[2] = c.dy as f64 / self.radius as f64;
        f[3] = mean / 255_000.0;
        f[4] = var.sqrt() / 255_000.0;
        for gy in 0..3 {
            for gx in 0..3 {
                let (x0, x1) = (gx * w / 3, (gx + 1) * w / 3);
                let (y0, y1) = (gy * h / 3, (gy + 1) * h / 3);
                let mut s = 0.0;
                let mut k = 0.0;
                for yy in y0..y1.max(y0 + 1).min(h) {
                    for xx in x0..x1.max(x0 + 1).min(w) {
                        s += window[(yy * w + xx) as usize] as f64;
                        k += 1.0;
                    }
                }
                f[5 + (gy * 3 + gx) as usize] = (s / k - mean) / 255_000.0;
            }
        }
        f
    }
}

impl Tracker for PromptGatedNcc {
    fn name(&self) -> &str {
        "prompt-ncc"
    }

    fn init(&mut self, image: &RgbImage, bbox: BBox) -> Result<()> {
        self.ncc.init(image, bbox)
    }

    fn update(&mut self, image: &RgbImage) -> BBox {
        let luma = LumaIntegral::new(image);
        let bbox = self.ncc.current().expect("update before init");
        let mut cands = self.ncc.candidates(&luma);
        if cands.is_empty() {
            return bbox;
        }
        // stable: equal scores keep row-major order
        cands.sort_by(|a, b| b.score.total_cmp(&a.score));
        cands.truncate(self.tokens);
        let rows: Vec<f64> = cands
            .iter()
            .flat_map(|c| self.features(&luma, c, &bbox))
            .collect();
        let h0 = TokenMatrix::from_row_slice(cands.len(), Self::CHANNELS, &rows);
        let choice = match forward(&h0, &self.params, self.layers) {
            Ok(out) => {
                let col = out.column(0);
                let mut best = 0;
                for k in 1..col.len() {
                    if col[k] > col[best] {
                        best = k;
                    }
                }
                cands[best]
            }
            Err(_) => cands[0],
        };
        self.ncc.shift(choice.dx, choice.dy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationConfig {
    pub layers_from: usize,
    pub layers_to: usize,
    pub preset: String,
    /// Micro-sequences rendered from the preset, one seed each.
    pub sequences: usize,
    pub frames: usize,
    pub tokens: usize,
    pub search_radius: i64,
    pub seed: u64,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            layers_from: 1,
            layers_to: 12,
            preset: "dark".into(),
            sequences: 3,
            frames: 20,
            tokens: 16,
            search_radius: 8,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub layers: usize,
    pub s_auc: f64,
    pub p: f64,
    pub p_norm: f64,
    /// Wall time of the row's tracking runs.
    pub wall_ms: f64,
}

/// Small sequences derived from a preset: 96x72 canvas, 16x12 target and
/// twice the noise.
pub fn micro_sequences(config: &AblationConfig) -> Result<Vec<SynthOutput>> {
    let base = preset(&config.preset)?;
    (0..config.sequences)
        .map(|k| {
            let spec = crate::synth::SynthSpec {
                name: format!("{}-micro-{k}", config.preset),
                width: 96,
                height: 72,
                frames: config.frames,
                target_width: 16,
                target_height: 12,
                start_x: 12.0,
                start_y: 24.0 + 4.0 * k as f64,
                cell_size: 4,
                velocity_x: 2.0,
                velocity_y: 0.5,
                scale_amplitude: 0.0,
                noise_sigma: base.noise_sigma * 2.0,
                occlusions: String::new(),
                seed: base.seed.wrapping_add(k as u64 * 1000 + 1),
                ..base.clone()
            };
            spec.render()
        })
        .collect()
}

/// Evaluates the prompt-gated NCC micro-task for every layer count in the
/// configured range. Rows run one after another so their wall times are
/// comparable.
pub fn ablation_run(config: &AblationConfig) -> Result<Vec<AblationRow>> {
    if config.layers_from < 1 || config.layers_to < config.layers_from {
        return Err(Error::invalid(format!(
            "invalid layer range {}..{}",
            config.layers_from, config.layers_to
        )));
    }
    if config.sequences == 0 || config.tokens == 0 {
        return Err(Error::invalid(
            "ablation needs at least one sequence and one token",
        ));
    }
    let data = micro_sequences(config)?;
    let dataset: Vec<Sequence> = data.iter().map(|d| d.sequence.clone()).collect();
    let sets = vec![AttributeSet::empty(); dataset.len()];
    let params = GateParams::random(
        PromptGatedNcc::CHANNELS,
        config.layers_to,
        GateGranularity::Scalar,
        0.1,
        config.seed,
    );
    let metrics_config = MetricsConfig::default();

    let mut rows = Vec::new();
    for layers in config.layers_from..=config.layers_to {
        let start = Instant::now();
        let mut results = std::collections::BTreeMap::new();
        for d in &data {
            let mut tracker =
                PromptGatedNcc::new(params.clone(), layers, config.tokens, config.search_radius);
            let run = run_frames(
                &mut tracker,
                &d.sequence,
                d.images.iter().cloned().map(Ok),
                &EnhanceOp::None,
            )?;
            results.insert(d.sequence.name.clone(), run.result);
        }
        let wall_ms = start.elapsed().as_secs_f64() * 1000.0;
        let report = evaluate("prompt-ncc", &results, &dataset, &sets, &metrics_config)?;
        rows.push(AblationRow {
            layers,
            s_auc: report.s_auc,
            p: report.p_at_20,
            p_norm: report.p_norm_auc,
            wall_ms,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_tokens(t: usize, d: usize, seed: u64) -> TokenMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let unit = Normal::new(0.0, 1.0).unwrap();
        TokenMatrix::from_fn(t, d, |_, _| unit.sample(&mut rng))
    }

    #[test]
    fn zero_extractor_gives_zero_clue() {
        let p = GateParams::zeros(8, 2, GateGranularity::Scalar);
        let h = random_tokens(5, 8, 1);
        assert!(dcp_extract(&h, &p, 1).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn extractor_shape_and_bound() {
        let p = GateParams::random(16, 3, GateGranularity::Scalar, 1.0, 4);
        let h = random_tokens(7, 16, 2);
        let clue = dcp_extract(&h, &p, 2).unwrap();
        assert_eq!(clue.shape(), (7, 16));
        let up = &p.layers[1].up;
        let bound = up.nrows() as f64 * up.amax();
        assert!(clue.amax() <= bound);
        assert!(dcp_extract(&random_tokens(7, 12, 2), &p, 2).is_err());
    }

    #[test]
    fn gate_endpoints() {
        let mut p = GateParams::random(8, 3, GateGranularity::Scalar, 1.0, 5);
        let h = random_tokens(4, 8, 3);
        let prev = PromptState {
            prompt: random_tokens(4, 8, 9),
            layer: 1,
        };
        p.layers[1].gate_pre[0] = f64::INFINITY;
        let s = gate_step(&prev, &h, &p, 2).unwrap();
        assert_eq!(s.prompt, dcp_extract(&h, &p, 2).unwrap());
        p.layers[1].gate_pre[0] = f64::NEG_INFINITY;
        let s = gate_step(&prev, &h, &p, 2).unwrap();
        assert_eq!(s.prompt, prev.prompt);
    }

    #[test]
    fn gate_half_blend() {
        // Phi(H) = all ones: H D = large so tanh = 1, then U sums to 1 per column
        let d = 4;
        let mut p = GateParams::zeros(d, 2, GateGranularity::Scalar);
        p.layers[1].down = DMatrix::from_element(d, 1, 100.0);
        p.layers[1].up = DMatrix::from_element(1, d, 1.0);
        let h = TokenMatrix::from_element(3, d, 1.0);
        let prev = PromptState::empty(3, d);
        let s = gate_step(&prev, &h, &p, 2).unwrap();
        assert!(s.prompt.iter().all(|&v| v == 0.5));
        let bad = TokenMatrix::from_element(3, d, f64::NAN);
        assert!(gate_step(&prev, &bad, &p, 2).is_err());
    }

    #[test]
    fn aggregate_examples() {
        let h = TokenMatrix::from_element(2, 4, 1.0);
        let ones = PromptState {
            prompt: TokenMatrix::from_element(2, 4, 1.0),
            layer: 3,
        };
        assert!(aggregate(&h, &ones, 0.25)
            .unwrap()
            .iter()
            .all(|&v| v == 1.25));
        assert_eq!(aggregate(&h, &ones, 0.0).unwrap(), h);
        assert_eq!(aggregate(&h, &PromptState::empty(2, 4), 0.7).unwrap(), h);
        assert!(aggregate(&h, &PromptState::empty(3, 4), 0.7).is_err());
    }

    #[test]
    fn single_layer_with_identity_block() {
        let mut p = GateParams::random(8, 1, GateGranularity::Scalar, 1.0, 6);
        p.layers[0].weight.fill(0.0);
        p.layers[0].bias.fill(0.0);
        let h0 = random_tokens(5, 8, 7);
        let out = forward(&h0, &p, 1).unwrap();
        let expected = &h0 + dcp_extract(&h0, &p, 1).unwrap() * p.rho();
        assert!((out - expected).amax() < 1e-15);
    }

    #[test]
    fn closed_gates_carry_first_prompt() {
        let mut p = GateParams::random(8, 6, GateGranularity::Scalar, 1.0, 8);
        for l in &mut p.layers {
            l.gate_pre.fill(-1e3);
        }
        let h0 = random_tokens(4, 8, 1);
        let trace = forward_trace(&h0, &p, 6).unwrap();
        assert_eq!(trace.prompts[5], dcp_extract(&h0, &p, 1).unwrap());
    }

    #[test]
    fn output_shape_for_all_depths() {
        let p = GateParams::random(8, 12, GateGranularity::Scalar, 1.0, 9);
        let h0 = random_tokens(6, 8, 2);
        for n in 1..=12 {
            assert_eq!(forward(&h0, &p, n).unwrap().shape(), (6, 8));
        }
        assert!(forward(&h0, &p, 0).is_err());
        assert!(forward(&h0, &p, 13).is_err());
    }

    #[test]
    fn two_layer_unrolling_by_hand() {
        let mut p = GateParams::random(8, 2, GateGranularity::Scalar, 1.0, 10);
        p.layers[1].gate_pre[0] = 0.0;
        let h0 = random_tokens(3, 8, 4);
        let h1 = stream_block(&h0, &p, 1);
        let expected =
            dcp_extract(&h0, &p, 1).unwrap() * 0.5 + dcp_extract(&h1, &p, 2).unwrap() * 0.5;
        assert!((unrolled_prompt(&h0, &p, 2).unwrap() - expected).amax() < 1e-15);
        assert_eq!(
            unrolled_prompt(&h0, &p, 1).unwrap(),
            dcp_extract(&h0, &p, 1).unwrap()
        );
    }

    #[test]
    fn per_channel_gates_unroll_and_differentiate() {
        let p = GateParams::random(8, 5, GateGranularity::PerChannel, 1.0, 11);
        let h0 = random_tokens(4, 8, 5);
        let trace = forward_trace(&h0, &p, 5).unwrap();
        let closed = unrolled_prompt(&h0, &p, 5).unwrap();
        assert!((closed - &trace.prompts[4]).amax() < 1e-12);
        let report = grad_check(&h0, &p, 5).unwrap();
        assert!(report.max_rel_error < 1e-4, "{}", report.max_rel_error);
    }

    #[test]
    fn zero_input_zero_gradients() {
        let mut p = GateParams::random(8, 4, GateGranularity::Scalar, 1.0, 12);
        for l in &mut p.layers {
            l.bias.fill(0.0);
        }
        let h0 = TokenMatrix::zeros(5, 8);
        let report = grad_check(&h0, &p, 4).unwrap();
        assert!(report
            .analytic_gates
            .iter()
            .all(|g| g.iter().all(|&v| v == 0.0)));
        assert_eq!(report.analytic_rho, 0.0);
        assert_eq!(report.max_abs_error, 0.0);
    }

    #[test]
    fn rho_gradient_sign() {
        for seed in 0..10 {
            let p = GateParams::random(8, 4, GateGranularity::Scalar, 1.0, seed);
            let h0 = random_tokens(5, 8, seed + 100);
            let trace = forward_trace(&h0, &p, 4).unwrap();
            let inner = trace.output.dot(&trace.prompts[3]);
            let rho = p.rho();
            let (_, d_rho) = gate_gradients(&h0, &p, 4).unwrap();
            assert_eq!(d_rho.signum(), (inner * rho * (1.0 - rho)).signum());
            let report = grad_check(&h0, &p, 4).unwrap();
            assert_eq!(report.numeric_rho.signum(), d_rho.signum());
        }
    }

    #[test]
    fn ablation_rejects_bad_range() {
        let cfg = AblationConfig {
            layers_from: 0,
            ..Default::default()
        };
        assert!(ablation_run(&cfg).is_err());
        let cfg = AblationConfig {
            layers_from: 5,
            layers_to: 4,
            ..Default::default()
        };
        assert!(ablation_run(&cfg).is_err());
    }
}
