import init, { WebPlayground } from "./pkg/relspace_wasm.js";

const canvas = document.getElementById("table");
const ctx = canvas.getContext("2d");
const select = document.getElementById("relation");
const statusLine = document.getElementById("status");
const count = document.getElementById("count");
const GRID = [80, 50];

let pg;
let bounds;
let demos = [];
let lastPlan = null;

const toPx = (x, y) => [
  (x - bounds.min[0]) / (bounds.max[0] - bounds.min[0]) * canvas.width,
  (bounds.max[1] - y) / (bounds.max[1] - bounds.min[1]) * canvas.height,
];
const toWorld = (px, py) => [
  bounds.min[0] + px / canvas.width * (bounds.max[0] - bounds.min[0]),
  bounds.max[1] - py / canvas.height * (bounds.max[1] - bounds.min[1]),
];

function drawHeatmap() {
  const values = pg.heatmap(GRID[0], GRID[1]);
  if (values.length === 0) return;
  const max = Math.max(...values);
  if (!(max > 0)) return;
  const [w, h] = GRID;
  const cw = canvas.width / w;
  const ch = canvas.height / h;
  for (let j = 0; j < h; j++) {
    for (let i = 0; i < w; i++) {
      const v = values[j * w + i];
      // six decades on a log scale
      const t = v > 0 ? Math.max(0, 1 + Math.log10(v / max) / 6) : 0;
      if (t === 0) continue;
      ctx.fillStyle = `rgba(120, 40, 160, ${0.85 * t})`;
      ctx.fillRect(i * cw, canvas.height - (j + 1) * ch, cw + 0.5, ch + 0.5);
    }
  }
}

function drawObject(o) {
  const colors = { reference: "#1f77b4", target: "#d62728", other: "#aaa" };
  const [px, py] = toPx(o.x, o.y);
  const sx = o.size[0] / (bounds.max[0] - bounds.min[0]) * canvas.width;
  const sy = o.size[1] / (bounds.max[1] - bounds.min[1]) * canvas.height;
  ctx.save();
  ctx.translate(px, py);
  ctx.rotate(-o.yaw);
  ctx.fillStyle = colors[o.role];
  ctx.globalAlpha = 0.8;
  ctx.fillRect(-sx / 2, -sy / 2, sx, sy);
  ctx.restore();
  ctx.fillStyle = "#222";
  ctx.fillText(o.id, px + sx / 2 + 3, py + 4);
}

function marker(x, y, color, size, filled) {
  const [px, py] = toPx(x, y);
  ctx.beginPath();
  ctx.arc(px, py, size, 0, 2 * Math.PI);
  ctx.strokeStyle = color;
  ctx.fillStyle = color;
  ctx.lineWidth = 2;
  filled ? ctx.fill() : ctx.stroke();
}

function draw() {
  ctx.fillStyle = "#f6f1e7";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  drawHeatmap();
  JSON.parse(pg.objects()).forEach(drawObject);
  demos.forEach(([x, y]) => marker(x, y, "#d62728", 3, true));
  if (lastPlan) {
    lastPlan.candidates.forEach((c) => marker(c.x, c.y, c.feasible ? "#555" : "#bbb", 2, c.feasible));
    if (lastPlan.baseline) marker(lastPlan.baseline[0], lastPlan.baseline[1], "#ff7f0e", 8, false);
    if (lastPlan.chosen) marker(lastPlan.chosen[0], lastPlan.chosen[1], "#2ca02c", 8, true);
  }
  count.textContent = `${pg.demo_count()} demonstration${pg.demo_count() === 1 ? "" : "s"}`;
}

function start(relation) {
  pg?.free();
  pg = new WebPlayground(relation, 0n);
  bounds = JSON.parse(pg.bounds());
  demos = [];
  lastPlan = null;
  statusLine.textContent = "";
  draw();
}

canvas.addEventListener("click", (e) => {
  const r = canvas.getBoundingClientRect();
  const [x, y] = toWorld(e.clientX - r.left, e.clientY - r.top);
  try {
    pg.add_demo(x, y);
    demos.push([x, y]);
    lastPlan = null;
    statusLine.textContent = `shown at (${x.toFixed(2)}, ${y.toFixed(2)})`;
    if (pg.demo_count() === 1) statusLine.textContent += "; one demonstration is a point, add a few more to see a spread";
  } catch (err) {
    statusLine.textContent = err.message ?? String(err);
  }
  draw();
});

document.getElementById("plan").addEventListener("click", () => {
  lastPlan = JSON.parse(pg.plan());
  const feasible = lastPlan.candidates.filter((c) => c.feasible).length;
  statusLine.textContent = lastPlan.status === "success"
    ? `chosen among ${feasible} feasible of ${lastPlan.candidates.length} candidates`
    : `no placement: ${lastPlan.status.replaceAll("_", " ")}`;
  draw();
});

document.getElementById("reset").addEventListener("click", () => start(select.value));
select.addEventListener("change", () => start(select.value));

await init();
for (const id of JSON.parse(WebPlayground.relations())) {
  select.add(new Option(id.replaceAll("_", " "), id));
}
select.value = "right_of";
start(select.value);
