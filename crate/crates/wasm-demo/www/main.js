import init, { Simulation, bound_curves, weight_constants } from "./pkg/wplap_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => parseFloat($(id).value);

function plot(canvas, xs, series, logY) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 30;
  ctx.clearRect(0, 0, w, h);
  const tf = logY ? (v) => Math.log10(Math.max(v, 1e-300)) : (v) => v;
  let lo = Infinity, hi = -Infinity;
  for (const s of series) for (const v of s.ys) { lo = Math.min(lo, tf(v)); hi = Math.max(hi, tf(v)); }
  if (hi - lo < 1e-12) { hi += 1; lo -= 1; }
  const x0 = xs[0], x1 = xs[xs.length - 1];
  const X = (x) => pad + (w - 2 * pad) * (x - x0) / (x1 - x0);
  const Y = (y) => h - pad - (h - 2 * pad) * (tf(y) - lo) / (hi - lo);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#555";
  ctx.fillText((logY ? "1e" : "") + hi.toPrecision(3), 2, pad);
  ctx.fillText((logY ? "1e" : "") + lo.toPrecision(3), 2, h - pad);
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.beginPath();
    xs.forEach((x, i) => (i ? ctx.lineTo(X(x), Y(s.ys[i])) : ctx.moveTo(X(x), Y(s.ys[i]))));
    ctx.stroke();
  }
}

let sim = null;
let running = true;

function restart() {
  try {
    sim = new Simulation(257, 8, num("p"), num("q"), num("eps"), $("coupling").value,
      num("famp"), num("amp"), num("dt"));
    $("simread").textContent = "";
  } catch (e) {
    sim = null;
    $("simread").textContent = "error: " + e.message;
  }
}

function frame() {
  if (sim && running) {
    try {
      sim.advance(5);
      const xs = sim.xs();
      plot($("profile"), xs, [{ ys: sim.values(), color: "#1f5fbf" }], false);
      $("simread").textContent =
        `t = ${sim.time().toFixed(2)}   |u|_L2 = ${sim.l2_norm().toExponential(4)}   ` +
        `energy = ${sim.energy().toExponential(4)}   inner iterations = ${sim.inner_iters()}`;
    } catch (e) {
      $("simread").textContent = "error: " + e.message;
      sim = null;
    }
  }
  requestAnimationFrame(frame);
}

function curves() {
  try {
    const flat = bound_curves(num("p"), num("q"), num("lip"), num("b0"), num("b1"), -5, 15, 201);
    const t = [], b1 = [], b2 = [];
    for (let i = 0; i < flat.length; i += 4) { t.push(flat[i]); b1.push(flat[i + 2]); b2.push(flat[i + 3]); }
    plot($("bounds"), t, [{ ys: b1, color: "#1f5fbf" }, { ys: b2, color: "#bf3f1f" }], true);
    $("boundread").textContent =
      `beta1(-5) = ${b1[0].toExponential(4)}   beta2(-5) = ${b2[0].toExponential(4)}   (log scale; blue beta1, red beta2)`;
  } catch (e) {
    $("boundread").textContent = "error: " + e.message;
  }
}

function consts() {
  try {
    const [integral, finite, c, cc] = weight_constants(num("p"), Math.round(num("n")), num("q"));
    $("constread").textContent =
      `integral of a0^(-2/(p-2)) on the box = ${integral.toPrecision(8)}\n` +
      `finite on the whole space: ${finite ? "yes" : "no"}\n` +
      `c_embed = ${c.toPrecision(8)}   c_coerc = ${cc.toPrecision(8)}`;
  } catch (e) {
    $("constread").textContent = "error: " + e.message;
  }
}

await init();
$("start").onclick = restart;
$("pause").onclick = () => { running = !running; $("pause").textContent = running ? "Pause" : "Resume"; };
$("curves").onclick = curves;
$("consts").onclick = consts;
restart();
curves();
consts();
requestAnimationFrame(frame);
