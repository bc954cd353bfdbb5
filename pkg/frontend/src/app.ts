// DOM glue: slider-driven evaluation of the loaded archive with two field
// heatmaps, the pressure-drop readout and the quantity-of-interest curve.

import { fetchEvaluation, fetchMeta, fetchQoi, Meta } from "./api.js";
import { heatmapPixels, markerX, qoiPolyline, scaleFromGrid, describePayload, ColorScale } from "./render.js";
import { EvaluationScheduler, initialState, pDropReadout, sliderToMu } from "./state.js";

const state = initialState();
// colour scales are pinned by the first evaluation so fields stay comparable
// while sweeping the parameter
let speedScale: ColorScale | null = null;
let pressureScale: ColorScale | null = null;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function showError(message: string | null): void {
  const banner = el<HTMLDivElement>("banner");
  banner.textContent = message ?? "";
  banner.style.display = message ? "block" : "none";
}

function drawField(canvasId: string, grid: number[][], scale: ColorScale): void {
  const canvas = el<HTMLCanvasElement>(canvasId);
  const ny = grid.length;
  const nx = grid[0].length;
  const off = document.createElement("canvas");
  off.width = nx;
  off.height = ny;
  const octx = off.getContext("2d")!;
  octx.putImageData(new ImageData(heatmapPixels(grid, scale), nx, ny), 0, 0);
  const ctx = canvas.getContext("2d")!;
  ctx.imageSmoothingEnabled = false;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.drawImage(off, 0, 0, canvas.width, canvas.height);
}

function drawQoi(meta: Meta): void {
  const canvas = el<HTMLCanvasElement>("qoi");
  const ctx = canvas.getContext("2d")!;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (!state.qoi || state.qoi.length === 0) return;
  const { points } = qoiPolyline(state.qoi, canvas.width, canvas.height);
  ctx.strokeStyle = "#247ba0";
  ctx.lineWidth = 2;
  ctx.beginPath();
  points.forEach(([x, y], i) => (i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y)));
  ctx.stroke();
  const mx = markerX(state.mu, meta.mu_min, meta.mu_max, canvas.width);
  ctx.strokeStyle = "#d1495b";
  ctx.beginPath();
  ctx.moveTo(mx, 0);
  ctx.lineTo(mx, canvas.height);
  ctx.stroke();
}

async function evaluate(mu: number): Promise<void> {
  if (!state.meta) return;
  try {
    const payload = await fetchEvaluation(mu, state.stride);
    state.payload = payload;
    state.error = null;
    speedScale = speedScale ?? scaleFromGrid(payload.speed);
    pressureScale = pressureScale ?? scaleFromGrid(payload.pressure);
    drawField("speed", payload.speed, speedScale);
    drawField("pressure", payload.pressure, pressureScale);
    el<HTMLSpanElement>("pdrop").textContent = pDropReadout(payload);
    el<HTMLSpanElement>("evalinfo").textContent = describePayload(payload);
    el<HTMLSpanElement>("muvalue").textContent = mu.toPrecision(6);
    drawQoi(state.meta);
    showError(null);
  } catch (err) {
    state.error = String(err);
    showError(state.error);
  }
}

const scheduler = new EvaluationScheduler(evaluate, 100);

async function boot(): Promise<void> {
  try {
    state.meta = await fetchMeta();
  } catch (err) {
    showError(`cannot load archive metadata: ${String(err)}`);
    return;
  }
  const meta = state.meta;
  el<HTMLSpanElement>("caseinfo").textContent =
    `${meta.case}: ${meta.n_modes} modes on a ${meta.mesh.nx}x${meta.mesh.ny} mesh, ` +
    `parameter in [${meta.mu_min}, ${meta.mu_max}]`;
  const slider = el<HTMLInputElement>("mu");
  const strideBox = el<HTMLInputElement>("stride");
  state.mu = meta.mu_min;
  slider.addEventListener("input", () => {
    // the slider cannot leave [mu_min, mu_max]: values are clamped here
    state.mu = sliderToMu(meta, Number(slider.value) / 1000);
    scheduler.request(state.mu);
  });
  strideBox.addEventListener("change", () => {
    state.stride = Math.max(1, Math.floor(Number(strideBox.value) || 1));
    scheduler.request(state.mu);
  });
  try {
    state.qoi = await fetchQoi(21);
  } catch (err) {
    state.qoi = null;
    showError(`quantity-of-interest sweep unavailable: ${String(err)}`);
  }
  await evaluate(state.mu);
}

void boot();
