import init, { paths, crbField, estimateOnce } from "./pkg/mmloc_wasm.js";

const $ = (id) => document.getElementById(id);
const canvas = $("view");
const ctx = canvas.getContext("2d");

let ue = null;
let heat = null;
let estimateResult = null;
let view = null;

function frame(region) {
  const pad = 6;
  const x0 = region.x_min - pad, x1 = region.x_max + pad;
  const y0 = region.y_min - pad, y1 = region.y_max + pad;
  const s = Math.min(canvas.width / (x1 - x0), canvas.height / (y1 - y0));
  return {
    s,
    px: (x) => (x - x0) * s,
    py: (y) => canvas.height - (y - y0) * s,
    wx: (px) => px / s + x0,
    wy: (py) => (canvas.height - py) / s + y0,
    x0, x1, y0, y1,
  };
}

function color(t) {
  const h = 240 * (1 - Math.max(0, Math.min(1, t)));
  return `hsl(${h}, 80%, 55%)`;
}

function drawHeat(v) {
  if (!heat) return;
  const vals = heat.values.filter((x) => x !== null);
  const sorted = [...vals].sort((a, b) => a - b);
  const lo = sorted[0], hi = sorted[Math.floor(0.95 * (sorted.length - 1))];
  const w = heat.spacing * v.s;
  heat.points.forEach((p, i) => {
    const val = heat.values[i];
    if (val === null) return;
    ctx.fillStyle = color((val - lo) / (hi - lo || 1));
    ctx.fillRect(v.px(p.x) - w / 2, v.py(p.y) - w / 2, w + 0.5, w + 0.5);
  });
  return { lo, hi };
}

function dot(v, p, r, fill) {
  ctx.fillStyle = fill;
  ctx.beginPath();
  ctx.arc(v.px(p.x), v.py(p.y), r, 0, 2 * Math.PI);
  ctx.fill();
}

function line(v, pts, stroke, dash = []) {
  ctx.strokeStyle = stroke;
  ctx.setLineDash(dash);
  ctx.beginPath();
  pts.forEach((p, i) => (i ? ctx.lineTo(v.px(p.x), v.py(p.y)) : ctx.moveTo(v.px(p.x), v.py(p.y))));
  ctx.stroke();
  ctx.setLineDash([]);
}

function draw() {
  const preset = $("preset").value;
  let scene;
  try {
    scene = JSON.parse(paths(preset, ue.x, ue.y));
  } catch (e) {
    $("info").textContent = `UE (${ue.x.toFixed(1)}, ${ue.y.toFixed(1)}): ${e}`;
    return;
  }
  view = frame(scene.scene.region);
  const v = view;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const range = drawHeat(v);

  ctx.strokeStyle = "#999";
  ctx.strokeRect(v.px(scene.scene.region.x_min), v.py(scene.scene.region.y_max),
    (scene.scene.region.x_max - scene.scene.region.x_min) * v.s,
    (scene.scene.region.y_max - scene.scene.region.y_min) * v.s);

  ctx.lineWidth = 4;
  for (const w of scene.scene.walls) {
    if (w.axis === "vertical") line(v, [{ x: w.offset, y: v.y0 }, { x: w.offset, y: v.y1 }], "#444");
    else line(v, [{ x: v.x0, y: w.offset }, { x: v.x1, y: w.offset }], "#444");
  }
  ctx.lineWidth = 1.5;
  for (const p of scene.paths) {
    if (p.los) line(v, [p.fe, scene.ue], "#d33");
    else { line(v, [p.fe, p.scatterer, scene.ue], "#36c", [5, 4]); dot(v, p.scatterer, 3, "#36c"); }
  }
  for (const fe of scene.scene.fes) {
    ctx.fillStyle = "#000";
    ctx.fillRect(v.px(fe.x) - 5, v.py(fe.y) - 5, 10, 10);
  }
  dot(v, scene.ue, 6, "#000");

  let text = `UE (${ue.x.toFixed(2)}, ${ue.y.toFixed(2)})\n`;
  text += `paths: ${scene.paths.filter((p) => p.los).length} LOS, ${scene.paths.filter((p) => !p.los).length} NLOS`;
  text += scene.sufficient ? "\n" : " (not enough to localize)\n";
  if (range) text += `\nheatmap ${heat.mode}: ${range.lo.toFixed(2)} m (blue) to ${range.hi.toFixed(2)} m (red)\n`;
  if (estimateResult) {
    const r = estimateResult;
    line(v, [r.ue, r.ue_hat], "#0a0");
    dot(v, r.ue_hat, 5, "#0a0");
    r.scatterers_hat.forEach((s) => dot(v, s, 3, "#0a0"));
    text += `\nestimate (${r.ue_hat.x.toFixed(2)}, ${r.ue_hat.y.toFixed(2)})\nerror ${r.error.toFixed(3)} m\nlog-likelihood ${r.log_likelihood.toFixed(2)}\n`;
  }
  $("info").textContent = text;
}

function reset() {
  const preset = $("preset").value;
  const base = JSON.parse(paths(preset, 1, 1)).scene.default_ue;
  ue = { x: base.x, y: base.y };
  heat = null;
  estimateResult = null;
  draw();
}

await init();

canvas.addEventListener("click", (ev) => {
  if (!view) return;
  const r = canvas.getBoundingClientRect();
  ue = { x: view.wx(ev.clientX - r.left), y: view.wy(ev.clientY - r.top) };
  estimateResult = null;
  if (!$("hold").checked) heat = null;
  draw();
});
$("preset").addEventListener("change", reset);
$("field").addEventListener("click", () => {
  try {
    heat = JSON.parse(crbField($("preset").value, $("profile").value, $("mode").value, Number($("spacing").value)));
  } catch (e) {
    $("info").textContent = String(e);
    return;
  }
  draw();
});
$("estimate").addEventListener("click", () => {
  try {
    const seed = Math.floor(Math.random() * 2 ** 31);
    estimateResult = JSON.parse(estimateOnce($("preset").value, $("profile").value, $("mode").value, ue.x, ue.y, seed, 50));
  } catch (e) {
    estimateResult = null;
    $("info").textContent = String(e);
    return;
  }
  draw();
});

reset();
