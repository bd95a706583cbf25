import init, { first_best_curve, Solution } from "./pkg/contractlab_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const COLORS = ["#888", "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

function plot(canvas, xs, series, opts = {}) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 40;
  ctx.clearRect(0, 0, w, h);
  const all = series.flatMap((s) => s.ys).filter(Number.isFinite);
  let lo = opts.lo ?? Math.min(...all), hi = opts.hi ?? Math.max(...all);
  if (hi - lo < 1e-12) { lo -= 1; hi += 1; }
  const x0 = xs[0], x1 = xs[xs.length - 1];
  const px = (x) => pad + ((x - x0) / (x1 - x0)) * (w - 2 * pad);
  const py = (y) => h - pad + ((lo - y) / (hi - lo)) * (h - 2 * pad);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#444";
  ctx.font = "11px sans-serif";
  ctx.fillText(hi.toPrecision(4), 2, pad + 4);
  ctx.fillText(lo.toPrecision(4), 2, h - pad);
  ctx.fillText(String(x0), pad, h - pad + 14);
  ctx.fillText(String(x1), w - pad - 10, h - pad + 14);
  series.forEach((s, k) => {
    ctx.strokeStyle = s.color ?? COLORS[k % COLORS.length];
    ctx.beginPath();
    let started = false;
    xs.forEach((x, i) => {
      const y = s.ys[i];
      if (!Number.isFinite(y)) return;
      started ? ctx.lineTo(px(x), py(y)) : ctx.moveTo(px(x), py(y));
      started = true;
    });
    ctx.stroke();
    if (s.label) {
      ctx.fillStyle = ctx.strokeStyle;
      ctx.fillText(s.label, w - pad - 90, pad + 14 * (k + 1));
    }
  });
}

function guard(msgId, f) {
  try {
    $(msgId).classList.remove("err");
    f();
  } catch (e) {
    $(msgId).classList.add("err");
    $(msgId).textContent = String(e);
  }
}

function runFirstBest() {
  guard("fb-msg", () => {
    const flat = first_best_curve(num("fb-delta"), num("fb-n"), num("fb-rmax"), 60);
    const rs = [], lower = [], upper = [];
    for (let j = 0; j < flat.length; j += 3) {
      rs.push(flat[j]); lower.push(flat[j + 1]); upper.push(flat[j + 2]);
    }
    plot($("fb-plot"), rs, [
      { ys: lower, label: "lower", color: "#1f77b4" },
      { ys: upper, label: "upper", color: "#d62728" },
    ]);
    const gap = Math.max(...upper.map((u, j) => u - lower[j]));
    $("fb-msg").textContent = `max gap upper - lower: ${gap.toExponential(3)}`;
  });
}

let solution = null;

function drawSolution() {
  if (!solution) return;
  const t = num("sb-t");
  $("sb-tval").textContent = t.toFixed(2);
  const ys = Array.from(solution.ys());
  const n = solution.rights();
  const values = [];
  for (let level = 0; level <= n; level++) {
    values.push({ ys: Array.from(solution.value_row(level, t)), label: `V${level}` });
  }
  plot($("sb-plot"), ys, values);
  if (n === 0) return;
  const eta = [];
  for (let level = 1; level <= n; level++) {
    eta.push({ ys: Array.from(solution.eta_row(level, t)), label: `bonus n=${level}` });
  }
  plot($("sb-eta"), ys, eta, { lo: 0 });
  const region = Array.from(solution.region_row(n, t));
  const inside = ys.filter((_, i) => region[i] === 1);
  $("sb-msg").textContent = inside.length
    ? `n=${n}: pay a bonus when y >= ${inside[0].toFixed(3)} at t=${t.toFixed(2)}`
    : `n=${n}: no bonus region at t=${t.toFixed(2)}`;
}

function runSolve() {
  guard("sb-msg", () => {
    $("sb-msg").textContent = "solving...";
    const started = performance.now();
    solution?.free();
    solution = null;
    solution = new Solution(num("sb-delta"), num("sb-n"), num("sb-i"), num("sb-m"));
    drawSolution();
    $("sb-msg").textContent += `  (${(performance.now() - started).toFixed(0)} ms)`;
    $("mc-msg").textContent = "";
  });
}

function runReplay() {
  guard("mc-msg", () => {
    if (!solution) throw new Error("solve first");
    const [estimate, se, pde, perPath] = solution.simulate(num("mc-y0"), num("mc-paths"), num("mc-seed"));
    $("mc-msg").textContent =
      `replayed value ${estimate.toFixed(5)} +/- ${(1.96 * se).toFixed(5)}\n` +
      `grid value     ${pde.toFixed(5)}\n` +
      `bonuses/path   ${perPath.toFixed(3)}`;
  });
}

await init();
$("fb-run").onclick = runFirstBest;
$("sb-run").onclick = runSolve;
$("mc-run").onclick = runReplay;
$("sb-t").oninput = () => guard("sb-msg", drawSolution);
runFirstBest();
