import { afterEach, describe, expect, it, vi } from "vitest";
import {
  ApiError, decodeEvaluate, decodeMeta, decodeQoi, fetchEvaluation,
} from "../src/api.js";

const META = {
  case: "jets",
  mu_min: 0,
  mu_max: 1,
  n_modes: 5,
  mesh: { nx: 96, ny: 96, origin: [0, 0], extent: [1, 1] },
  amplitudes: [],
  qoi_patch: "jet_right_low",
};

const EVALUATION = {
  mu: 0.625,
  stride: 2,
  nx: 2,
  ny: 2,
  speed: [[0.1, 0.2], [0.3, 0.4]],
  pressure: [[1, 2], [3, 4]],
  p_drop: 0.123456789012345678,
  eval_ms: 1.5,
};

afterEach(() => vi.restoreAllMocks());

describe("decoders", () => {
  it("decodes a meta payload", () => {
    const meta = decodeMeta(META);
    expect(meta.mu_max).toBe(1);
    expect(meta.mesh.nx).toBe(96);
  });

  it("decodes an evaluation payload verbatim", () => {
    const payload = decodeEvaluate(EVALUATION);
    // float precision preserved exactly: the readout shows this field as-is
    expect(payload.p_drop).toBe(EVALUATION.p_drop);
    expect(payload.speed[1][0]).toBe(0.3);
  });

  it("accepts a null pressure drop", () => {
    expect(decodeEvaluate({ ...EVALUATION, p_drop: null }).p_drop).toBeNull();
  });

  it("rejects malformed grids", () => {
    expect(() => decodeEvaluate({ ...EVALUATION, speed: 3 })).toThrow(ApiError);
    expect(() => decodeEvaluate({ ...EVALUATION, ny: 7 })).toThrow(ApiError);
  });

  it("decodes qoi points in order", () => {
    const pts = decodeQoi([{ mu: 0, p_drop: 1 }, { mu: 0.5, p_drop: 2 }]);
    expect(pts.map((p) => p.mu)).toEqual([0, 0.5]);
  });

  it("rejects non-array qoi payloads", () => {
    expect(() => decodeQoi({})).toThrow(ApiError);
  });
});

describe("fetch wrappers", () => {
  it("returns the payload p_drop untouched", async () => {
    vi.stubGlobal("fetch", vi.fn(async () =>
      new Response(JSON.stringify(EVALUATION), { status: 200 })));
    const payload = await fetchEvaluation(0.625, 2);
    expect(payload.p_drop).toBe(EVALUATION.p_drop);
  });

  it("maps http errors to ApiError with status", async () => {
    vi.stubGlobal("fetch", vi.fn(async () =>
      new Response("{}", { status: 400 })));
    await expect(fetchEvaluation(42, 1)).rejects.toMatchObject({ status: 400 });
  });

  it("maps network failures to ApiError", async () => {
    vi.stubGlobal("fetch", vi.fn(async () => { throw new Error("refused"); }));
    await expect(fetchEvaluation(0.5, 1)).rejects.toBeInstanceOf(ApiError);
  });
});
