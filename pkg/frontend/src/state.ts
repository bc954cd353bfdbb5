// View state and the request scheduler: slider moves are debounced and at
// most one evaluation request is in flight; the newest requested value wins.

import { EvaluatePayload, Meta, QoiPoint } from "./api.js";

export interface ViewState {
  mu: number;
  stride: number;
  meta: Meta | null;
  payload: EvaluatePayload | null;
  qoi: QoiPoint[] | null;
  error: string | null;
}

export function initialState(): ViewState {
  return { mu: 0, stride: 1, meta: null, payload: null, qoi: null, error: null };
}

export function clampMu(meta: Meta, mu: number): number {
  return Math.min(meta.mu_max, Math.max(meta.mu_min, mu));
}

export function sliderToMu(meta: Meta, fraction: number): number {
  return clampMu(meta, meta.mu_min + fraction * (meta.mu_max - meta.mu_min));
}

/** Displayed readout: the payload value verbatim (full float precision). */
export function pDropReadout(payload: EvaluatePayload | null): string {
  if (payload === null || payload.p_drop === null) return "n/a";
  return String(payload.p_drop);
}

export class EvaluationScheduler {
  private latest: number | null = null;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private inFlight = false;
  inFlightCount = 0; // visible for tests: concurrent requests issued

  constructor(
    private readonly run: (mu: number) => Promise<void>,
    private readonly delayMs = 100,
  ) {}

  /** Schedule an evaluation; rapid calls collapse into the newest value. */
  request(mu: number): void {
    this.latest = mu;
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      void this.launch();
    }, this.delayMs);
  }

  private async launch(): Promise<void> {
    if (this.inFlight || this.latest === null) return;
    const mu = this.latest;
    this.latest = null;
    this.inFlight = true;
    this.inFlightCount += 1;
    try {
      await this.run(mu);
    } finally {
      this.inFlight = false;
      this.inFlightCount -= 1;
      // a newer value arrived while running: serve it now
      if (this.latest !== null && this.timer === null) {
        void this.launch();
      }
    }
  }
}
