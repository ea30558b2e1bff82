import init, { resample, mixture, default_weights, DensityField } from "./pkg/roboprep_web_demo.js";

const $ = (id) => document.getElementById(id);

function showError(e) {
  $("error").textContent = String(e && e.message ? e.message : e);
}

// joint angle over 60 frames: reach, hold, return
const TRAJ = Array.from({ length: 60 }, (_, i) => {
  if (i < 20) return Math.sin((i / 19) * Math.PI / 2);
  if (i < 35) return 1;
  return Math.cos(((i - 35) / 24) * Math.PI / 2);
});

function drawResample() {
  const stride = Number($("stride").value);
  $("stride-v").value = stride.toFixed(2);
  const c = $("resample"), g = c.getContext("2d");
  g.clearRect(0, 0, c.width, c.height);
  let out;
  try { out = resample(new Float64Array(TRAJ), stride); } catch (e) { return showError(e); }
  $("resample-info").textContent = `${TRAJ.length} frames -> ${out.length}`;
  const n = Math.max(TRAJ.length, out.length);
  const x = (i) => 20 + (i / (n - 1)) * (c.width - 40);
  const y = (v) => c.height - 20 - v * (c.height - 40);
  const dots = (vals, color, r) => {
    g.fillStyle = color;
    vals.forEach((v, i) => { g.beginPath(); g.arc(x(i), y(v), r, 0, 2 * Math.PI); g.fill(); });
  };
  dots(TRAJ, "#bbb", 3);
  dots(out, "#1f6fb2", 2.5);
}

const WEIGHTS = default_weights();

function drawMixture() {
  const alpha = Number($("alpha").value);
  $("alpha-v").value = alpha.toFixed(2);
  let p;
  try { p = mixture(WEIGHTS, alpha); } catch (e) { return showError(e); }
  const c = $("mixture"), g = c.getContext("2d");
  g.clearRect(0, 0, c.width, c.height);
  const bw = (c.width - 40) / p.length;
  const top = 0.25;
  g.font = "11px system-ui";
  p.forEach((v, i) => {
    const h = (v / top) * (c.height - 40);
    g.fillStyle = "#e8a33d";
    g.fillRect(20 + i * bw + 4, c.height - 20 - h, bw - 8, h);
    g.fillStyle = "#222";
    g.fillText(v.toFixed(3), 20 + i * bw + 6, c.height - 24 - h);
    g.fillText(`d${i + 1}`, 20 + i * bw + 6, c.height - 6);
  });
}

const BOX = [-1.6, 1.6];
const GRID = 96;
let field = null;
let heat = null;

function toCanvas(c, x, y) {
  const s = c.width / (BOX[1] - BOX[0]);
  return [(x - BOX[0]) * s, c.height - (y - BOX[0]) * s];
}

function fromCanvas(c, px, py) {
  const s = (BOX[1] - BOX[0]) / c.width;
  return [BOX[0] + px * s, BOX[0] + (c.height - py) * s];
}

function refit() {
  try {
    field?.free();
    field = new DensityField(Number($("seed").value), Number($("k").value), Number($("step").value));
  } catch (e) { field = null; return showError(e); }
  $("error").textContent = "";
  const c = $("field"), g = c.getContext("2d");
  const dens = field.grid(GRID, GRID, BOX[0], BOX[1], BOX[0], BOX[1]);
  const max = Math.max(...dens), tau = field.threshold();
  const img = g.createImageData(GRID, GRID);
  for (let j = 0; j < GRID; j++) {
    for (let i = 0; i < GRID; i++) {
      const v = Math.sqrt(dens[j * GRID + i] / max);
      const o = ((GRID - 1 - j) * GRID + i) * 4;
      const below = dens[j * GRID + i] < tau;
      img.data[o] = 255 - 200 * v;
      img.data[o + 1] = 255 - 120 * v;
      img.data[o + 2] = below ? 235 : 255 - 40 * v;
      img.data[o + 3] = 255;
    }
  }
  const off = new OffscreenCanvas(GRID, GRID);
  off.getContext("2d").putImageData(img, 0, 0);
  heat = off;
  drawField();
}

function drawField(path) {
  const c = $("field"), g = c.getContext("2d");
  g.imageSmoothingEnabled = true;
  g.drawImage(heat, 0, 0, c.width, c.height);
  const pts = field.points();
  g.fillStyle = "rgba(0,0,0,0.35)";
  for (let i = 0; i < pts.length; i += 2) {
    const [x, y] = toCanvas(c, pts[i], pts[i + 1]);
    g.fillRect(x - 1, y - 1, 2, 2);
  }
  if (!path) return;
  g.strokeStyle = "#c0392b";
  g.lineWidth = 2;
  g.beginPath();
  for (let i = 0; i < path.length; i += 3) {
    const [x, y] = toCanvas(c, path[i], path[i + 1]);
    i === 0 ? g.moveTo(x, y) : g.lineTo(x, y);
  }
  g.stroke();
  const [sx, sy] = toCanvas(c, path[0], path[1]);
  g.fillStyle = "#c0392b";
  g.beginPath(); g.arc(sx, sy, 4, 0, 2 * Math.PI); g.fill();
}

function onClick(ev) {
  if (!field) return;
  const c = $("field"), r = c.getBoundingClientRect();
  const [x, y] = fromCanvas(c, ev.clientX - r.left, ev.clientY - r.top);
  let path;
  try { path = field.path(x, y, 500); } catch (e) { return showError(e); }
  const steps = path.length / 3 - 1;
  const end = path[path.length - 1], tau = field.threshold();
  $("path-info").textContent = steps === 0
    ? "in distribution, no correction"
    : `${steps} steps, density ${path[2].toExponential(2)} -> ${end.toExponential(2)}` +
      (end >= tau ? "" : " (step limit reached: the gradient vanishes far from the data)");
  drawField(path);
}

await init();
$("stride").addEventListener("input", drawResample);
$("alpha").addEventListener("input", drawMixture);
$("refit").addEventListener("click", refit);
$("field").addEventListener("click", onClick);
drawResample();
drawMixture();
refit();
