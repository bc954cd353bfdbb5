// Typed client for the archive server's JSON endpoints.  Every displayed
// number originates from one of these payloads; decoding failures surface as
// ApiError so the UI can show a banner without touching its state.

export interface MeshInfo {
  nx: number;
  ny: number;
  origin: [number, number];
  extent: [number, number];
}

export interface AmplitudeEntry {
  index: number;
  origin: string;
  sigma_u: number;
  sigma_p: number;
}

export interface Meta {
  case: string;
  mu_min: number;
  mu_max: number;
  n_modes: number;
  mesh: MeshInfo;
  amplitudes: AmplitudeEntry[];
  qoi_patch: string | null;
}

export interface EvaluatePayload {
  mu: number;
  stride: number;
  nx: number;
  ny: number;
  speed: number[][];
  pressure: number[][];
  p_drop: number | null;
  eval_ms: number;
}

export interface QoiPoint {
  mu: number;
  p_drop: number | null;
}

export class ApiError extends Error {
  constructor(message: string, readonly status?: number) {
    super(message);
    this.name = "ApiError";
  }
}

function expectNumber(value: unknown, name: string): number {
  if (typeof value !== "number" || !Number.isFinite(value)) {
    throw new ApiError(`field '${name}' is not a finite number`);
  }
  return value;
}

function expectGrid(value: unknown, name: string): number[][] {
  if (!Array.isArray(value) || value.length === 0 || !Array.isArray(value[0])) {
    throw new ApiError(`field '${name}' is not a 2d array`);
  }
  return value as number[][];
}

export function decodeMeta(raw: unknown): Meta {
  const obj = raw as Record<string, unknown>;
  const mesh = obj.mesh as Record<string, unknown> | undefined;
  if (!mesh) throw new ApiError("meta payload has no mesh");
  return {
    case: String(obj.case),
    mu_min: expectNumber(obj.mu_min, "mu_min"),
    mu_max: expectNumber(obj.mu_max, "mu_max"),
    n_modes: expectNumber(obj.n_modes, "n_modes"),
    mesh: {
      nx: expectNumber(mesh.nx, "mesh.nx"),
      ny: expectNumber(mesh.ny, "mesh.ny"),
      origin: mesh.origin as [number, number],
      extent: mesh.extent as [number, number],
    },
    amplitudes: (obj.amplitudes as AmplitudeEntry[]) ?? [],
    qoi_patch: (obj.qoi_patch as string | null) ?? null,
  };
}

export function decodeEvaluate(raw: unknown): EvaluatePayload {
  const obj = raw as Record<string, unknown>;
  const payload: EvaluatePayload = {
    mu: expectNumber(obj.mu, "mu"),
    stride: expectNumber(obj.stride, "stride"),
    nx: expectNumber(obj.nx, "nx"),
    ny: expectNumber(obj.ny, "ny"),
    speed: expectGrid(obj.speed, "speed"),
    pressure: expectGrid(obj.pressure, "pressure"),
    p_drop: obj.p_drop === null ? null : expectNumber(obj.p_drop, "p_drop"),
    eval_ms: expectNumber(obj.eval_ms, "eval_ms"),
  };
  if (payload.speed.length !== payload.ny) {
    throw new ApiError("speed grid height does not match ny");
  }
  return payload;
}

export function decodeQoi(raw: unknown): QoiPoint[] {
  if (!Array.isArray(raw)) throw new ApiError("qoi payload is not an array");
  return raw.map((entry, i) => {
    const obj = entry as Record<string, unknown>;
    return {
      mu: expectNumber(obj.mu, `qoi[${i}].mu`),
      p_drop: obj.p_drop === null ? null : expectNumber(obj.p_drop, `qoi[${i}].p_drop`),
    };
  });
}

async function getJson(url: string): Promise<unknown> {
  let response: Response;
  try {
    response = await fetch(url);
  } catch (err) {
    throw new ApiError(`network error: ${String(err)}`);
  }
  if (!response.ok) {
    throw new ApiError(`request failed: ${url}`, response.status);
  }
  return response.json();
}

export async function fetchMeta(base = ""): Promise<Meta> {
  return decodeMeta(await getJson(`${base}/api/meta`));
}

export async function fetchEvaluation(
  mu: number,
  stride: number,
  base = "",
): Promise<EvaluatePayload> {
  return decodeEvaluate(await getJson(`${base}/api/evaluate?mu=${mu}&stride=${stride}`));
}

export async function fetchQoi(samples: number, base = ""): Promise<QoiPoint[]> {
  return decodeQoi(await getJson(`${base}/api/qoi?samples=${samples}`));
}
