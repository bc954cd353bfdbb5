import { describe, expect, it } from "vitest";
import {
  colorAt, heatmapPixels, markerX, qoiPolyline, scaleFromGrid,
} from "../src/render.js";

const GRID = [
  [0.0, 0.5],
  [1.0, 2.0],
];

describe("heatmap", () => {
  it("is deterministic: identical payloads give identical pixels", () => {
    const scale = scaleFromGrid(GRID);
    const a = heatmapPixels(GRID, scale);
    const b = heatmapPixels(GRID.map((row) => [...row]), scale);
    expect(Array.from(a)).toEqual(Array.from(b));
  });

  it("maps values through a fixed scale so frames stay comparable", () => {
    const scale = scaleFromGrid(GRID);
    const brighter = heatmapPixels([[2.0, 2.0], [2.0, 2.0]], scale);
    const top = colorAt(1);
    expect([brighter[0], brighter[1], brighter[2]]).toEqual(top);
    // a different stride (coarser grid) under the same scale keeps colours
    const coarse = heatmapPixels([[2.0]], scale);
    expect([coarse[0], coarse[1], coarse[2]]).toEqual(top);
  });

  it("flips rows so the first grid row lands at the bottom", () => {
    const scale = { min: 0, max: 1 };
    const pixels = heatmapPixels([[0, 0], [1, 1]], scale);
    const bottomLeft = colorAt(0);
    // canvas row 0 (top) must show grid row 1 (values 1)
    expect([pixels[0], pixels[1], pixels[2]]).toEqual(colorAt(1));
    const lastRowOffset = 4 * 2;
    expect([pixels[lastRowOffset], pixels[lastRowOffset + 1],
            pixels[lastRowOffset + 2]]).toEqual(bottomLeft);
  });
});

describe("marker", () => {
  it("is linear in mu", () => {
    const xs = [0.25, 0.5, 0.75].map((mu) => markerX(mu, 0, 1, 400));
    expect(xs[1] - xs[0]).toBeCloseTo(xs[2] - xs[1], 10);
    expect(markerX(0, 0, 1, 400)).toBe(0);
    expect(markerX(1, 0, 1, 400)).toBe(400);
  });
});

describe("qoi polyline", () => {
  it("renders one point per sample in mu-ascending order", () => {
    const pts = Array.from({ length: 21 }, (_, i) => ({
      mu: i / 20,
      p_drop: Math.sin(i),
    }));
    const { points } = qoiPolyline(pts, 400, 200);
    expect(points).toHaveLength(21);
    const xs = points.map(([x]) => x);
    expect([...xs].sort((a, b) => a - b)).toEqual(xs);
  });

  it("skips samples without a quantity of interest", () => {
    const { points } = qoiPolyline(
      [{ mu: 0, p_drop: null }, { mu: 1, p_drop: 2 }], 100, 100);
    expect(points).toHaveLength(1);
  });
});
