import init, { expert_sampling_stats, mae_window_histogram, interpolate_frames } from "./pkg/miex_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function bars(canvas, values, labels, opts = {}) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 24;
  ctx.clearRect(0, 0, w, h);
  const max = opts.max ?? Math.max(1e-9, ...values);
  const bw = (w - 2 * pad) / values.length;
  values.forEach((v, i) => {
    const bh = (h - 2 * pad) * (v / max);
    ctx.fillStyle = opts.highlight?.(i) === false ? "#ccc" : "#4a7bb7";
    ctx.fillRect(pad + i * bw + 1, h - pad - bh, Math.max(1, bw - 2), bh);
    if (opts.marks) {
      const m = (h - 2 * pad) * (opts.marks[i] / max);
      ctx.fillStyle = "#d33";
      ctx.fillRect(pad + i * bw, h - pad - m - 1, bw, 2);
    }
    if (labels[i] !== undefined) {
      ctx.fillStyle = "#333";
      ctx.font = "10px sans-serif";
      ctx.fillText(labels[i], pad + i * bw + 2, h - 8);
    }
  });
}

function guard(errId, fn) {
  $(errId).textContent = "";
  try {
    fn();
  } catch (e) {
    $(errId).textContent = String(e);
  }
}

function runExpert() {
  guard("ex-err", () => {
    const out = JSON.parse(expert_sampling_stats(
      $("ex-table").value, $("ex-class").value, num("ex-draws"), num("ex-seed"), num("ex-mu"), num("ex-nu")));
    // Bars: observed frequency; red marks: table probability.
    bars($("ex-plot"), out.aus.map((r) => r.frequency), out.aus.map((r) => "AU" + r.au),
      { max: 1, marks: out.aus.map((r) => r.p) });
  });
}

function runWindow() {
  guard("w-err", () => {
    const out = JSON.parse(mae_window_histogram(num("w-n"), num("w-alpha"), num("w-beta"), num("w-draws"), num("w-seed")));
    const labels = out.counts.map((_, i) => (i === out.lo || i === out.hi ? String(i) : undefined));
    bars($("w-plot"), out.counts, labels, { highlight: (i) => i >= out.lo && i <= out.hi });
  });
}

function runInterp() {
  guard("i-err", () => {
    const out = JSON.parse(interpolate_frames($("i-onset").value, $("i-apex").value, num("i-frames")));
    const canvas = $("i-plot");
    const ctx = canvas.getContext("2d");
    const { width: w, height: h } = canvas;
    const pad = 24;
    ctx.clearRect(0, 0, w, h);
    const n = out.frames.length;
    const x = (k) => pad + (w - 2 * pad) * (n === 1 ? 0 : k / (n - 1));
    const y = (v) => h - pad - (h - 2 * pad) * v;
    out.aus.forEach((au, d) => {
      const series = out.frames.map((f) => f[d]);
      if (series.every((v) => v === 0)) return;
      ctx.strokeStyle = `hsl(${(d * 47) % 360} 60% 45%)`;
      ctx.beginPath();
      series.forEach((v, k) => (k ? ctx.lineTo(x(k), y(v)) : ctx.moveTo(x(k), y(v))));
      ctx.stroke();
      ctx.fillStyle = ctx.strokeStyle;
      ctx.fillText("AU" + au, x(n - 1) - 30, y(series[n - 1]) - 3);
    });
  });
}

await init();
$("ex-run").onclick = runExpert;
$("w-run").onclick = runWindow;
$("i-run").onclick = runInterp;
runExpert();
runWindow();
runInterp();
