// Pure rendering helpers: payload grids to RGBA pixel buffers and the
// quantity-of-interest curve to canvas coordinates.  Everything here is a
// deterministic function of its inputs so the canvas output is reproducible.

import { EvaluatePayload, QoiPoint } from "./api.js";

export interface ColorScale {
  min: number;
  max: number;
}

export function scaleFromGrid(grid: number[][]): ColorScale {
  let min = Infinity;
  let max = -Infinity;
  for (const row of grid) {
    for (const v of row) {
      if (v < min) min = v;
      if (v > max) max = v;
    }
  }
  if (!(max > min)) max = min + 1;
  return { min, max };
}

// compact blue -> teal -> yellow ramp sampled at fixed stops
const STOPS: Array<[number, number, number]> = [
  [13, 8, 135],
  [70, 3, 159],
  [114, 1, 168],
  [156, 23, 158],
  [189, 55, 134],
  [216, 87, 107],
  [237, 121, 83],
  [251, 159, 58],
  [253, 202, 38],
  [240, 249, 33],
];

export function colorAt(t: number): [number, number, number] {
  const clamped = Math.min(1, Math.max(0, t));
  const x = clamped * (STOPS.length - 1);
  const i = Math.min(STOPS.length - 2, Math.floor(x));
  const f = x - i;
  const a = STOPS[i];
  const b = STOPS[i + 1];
  return [
    Math.round(a[0] + f * (b[0] - a[0])),
    Math.round(a[1] + f * (b[1] - a[1])),
    Math.round(a[2] + f * (b[2] - a[2])),
  ];
}

/** RGBA pixels for a row-major grid (row 0 = bottom of the domain). */
export function heatmapPixels(
  grid: number[][],
  scale: ColorScale,
): Uint8ClampedArray<ArrayBuffer> {
  const ny = grid.length;
  const nx = grid[0].length;
  const out = new Uint8ClampedArray(new ArrayBuffer(4 * nx * ny));
  const span = scale.max - scale.min;
  for (let j = 0; j < ny; j++) {
    // flip vertically: canvas rows grow downwards
    const row = grid[ny - 1 - j];
    for (let i = 0; i < nx; i++) {
      const [r, g, b] = colorAt((row[i] - scale.min) / span);
      const k = 4 * (j * nx + i);
      out[k] = r;
      out[k + 1] = g;
      out[k + 2] = b;
      out[k + 3] = 255;
    }
  }
  return out;
}

/** Marker abscissa on the curve canvas; linear in mu. */
export function markerX(mu: number, muMin: number, muMax: number, width: number): number {
  return ((mu - muMin) / (muMax - muMin)) * width;
}

export interface CurveGeometry {
  points: Array<[number, number]>;
  min: number;
  max: number;
}

/** Map QoI samples to canvas coordinates, mu ascending. */
export function qoiPolyline(
  points: QoiPoint[],
  width: number,
  height: number,
  pad = 6,
): CurveGeometry {
  const usable = points.filter((p) => p.p_drop !== null) as Array<{
    mu: number;
    p_drop: number;
  }>;
  if (usable.length === 0) return { points: [], min: 0, max: 1 };
  const mus = usable.map((p) => p.mu);
  const vals = usable.map((p) => p.p_drop);
  const muMin = Math.min(...mus);
  const muMax = Math.max(...mus);
  let vMin = Math.min(...vals);
  let vMax = Math.max(...vals);
  if (!(vMax > vMin)) vMax = vMin + 1;
  const coords: Array<[number, number]> = usable.map((p) => [
    markerX(p.mu, muMin, muMax, width),
    height - pad - ((p.p_drop - vMin) / (vMax - vMin)) * (height - 2 * pad),
  ]);
  return { points: coords, min: vMin, max: vMax };
}

/** Grid dimensions change with stride, the readout value must not. */
export function describePayload(payload: EvaluatePayload): string {
  return `${payload.nx} x ${payload.ny} at stride ${payload.stride}, ` +
    `evaluated in ${payload.eval_ms.toFixed(2)} ms`;
}
