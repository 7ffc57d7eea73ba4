import init, {
  preset_names, sequence_info, render_frame, track, gate_coefficients,
} from "./pkg/llbench_web.js";

const $ = (id) => document.getElementById(id);
let info = null;
let run = null;

function showError(e) {
  $("error").textContent = e ? String(e) : "";
}

function drawBox(ctx, b, color) {
  if (!b) return;
  ctx.strokeStyle = color;
  ctx.lineWidth = 1;
  ctx.strokeRect(b[0] + 0.5, b[1] + 0.5, b[2], b[3]);
}

function drawFrame() {
  const t = Number($("frame").value);
  $("frame-label").textContent = t + 1;
  try {
    const rgba = render_frame(info.name, t, $("enhance").value);
    const canvas = $("view");
    canvas.width = info.width;
    canvas.height = info.height;
    const ctx = canvas.getContext("2d");
    ctx.putImageData(new ImageData(new Uint8ClampedArray(rgba), info.width, info.height), 0, 0);
    drawBox(ctx, info.gt[t], "#0c0");
    if (run) drawBox(ctx, run.boxes[t], "#e22");
    showError();
  } catch (e) {
    showError(e);
  }
}

function loadPreset() {
  info = JSON.parse(sequence_info($("preset").value));
  run = null;
  $("scores").textContent = "";
  $("frame").max = info.frames - 1;
  $("frame").value = 0;
  drawFrame();
}

function plotCurve(values) {
  const c = $("curve");
  const ctx = c.getContext("2d");
  ctx.clearRect(0, 0, c.width, c.height);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(30, 10, c.width - 40, c.height - 40);
  ctx.fillText("overlap threshold", c.width / 2 - 40, c.height - 8);
  ctx.fillText("1", 18, 16);
  ctx.fillText("0", 18, c.height - 30);
  ctx.strokeStyle = "#06c";
  ctx.beginPath();
  values.forEach((v, i) => {
    const x = 30 + (i / (values.length - 1)) * (c.width - 40);
    const y = 10 + (1 - v) * (c.height - 40);
    if (i === 0) ctx.moveTo(x, y); else ctx.lineTo(x, y);
  });
  ctx.stroke();
}

function runTracker() {
  try {
    run = JSON.parse(track(info.name, $("tracker").value, $("enhance").value));
    plotCurve(run.success);
    const f = (v) => v.toFixed(3);
    $("scores").innerHTML =
      `<table><tr><th>S_AUC</th><td>${f(run.s_auc)}</td></tr>` +
      `<tr><th>P@20</th><td>${f(run.p)}</td></tr>` +
      `<tr><th>P_Norm</th><td>${f(run.p_norm)}</td></tr>` +
      `<tr><th>held frames</th><td>${run.held_frames}</td></tr>` +
      `<tr><th>attributes</th><td>${run.attributes.join(" ") || "-"}</td></tr></table>`;
    drawFrame();
  } catch (e) {
    showError(e);
  }
}

function plotCoefficients() {
  try {
    const g = JSON.parse(gate_coefficients(
      Number($("layers").value), $("per-channel").checked, Number($("seed").value)));
    const c = $("coeffs");
    const ctx = c.getContext("2d");
    ctx.clearRect(0, 0, c.width, c.height);
    const n = g.layers;
    const slot = (c.width - 20) / n;
    const bar = slot / g.channels;
    for (let i = 0; i < n; i++) {
      for (let ch = 0; ch < g.channels; ch++) {
        const v = g.coefficients[i][ch];
        const h = v * (c.height - 30);
        ctx.fillStyle = `hsl(${(ch * 360) / g.channels}, 60%, 50%)`;
        ctx.fillRect(10 + i * slot + ch * bar, c.height - 20 - h, Math.max(bar - 1, 1), h);
      }
      ctx.fillStyle = "#000";
      ctx.fillText(String(i + 1), 10 + i * slot + slot / 2 - 3, c.height - 6);
    }
    const sums = g.sums.map((s) => s.toFixed(6)).join(" ");
    $("coeff-info").innerHTML =
      `<p>Bar height: weight of layer i's clue in the final prompt.</p>` +
      `<p>Per-channel sums: ${sums}</p><p>rho = ${g.rho.toFixed(4)}</p>`;
    showError();
  } catch (e) {
    showError(e);
  }
}

await init();
for (const name of JSON.parse(preset_names())) {
  $("preset").add(new Option(name, name));
}
$("preset").addEventListener("change", loadPreset);
$("enhance").addEventListener("change", drawFrame);
$("frame").addEventListener("input", drawFrame);
$("run").addEventListener("click", runTracker);
for (const id of ["layers", "per-channel", "seed"]) {
  $(id).addEventListener("input", plotCoefficients);
}
loadPreset();
plotCoefficients();
