/**
 * Thin client for the decision-map HTTP API.
 *
 * The fetch implementation is injectable so tests can run against a mocked
 * server; all domain math stays on the server side.
 */

import type { DecisionMapPayload, PartialConfig, ProbeResponse, SessionState } from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(message: string, readonly status: number) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private readonly base: string = "",
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchFn(this.base + path, init);
    if (!resp.ok) {
      let detail = "";
      try {
        const body = (await resp.json()) as { error?: string };
        detail = body.error ?? "";
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(detail || `request failed (${resp.status})`, resp.status);
    }
    return (await resp.json()) as T;
  }

  getState(): Promise<SessionState> {
    return this.request<SessionState>("/api/state");
  }

  getMap(): Promise<DecisionMapPayload> {
    return this.request<DecisionMapPayload>("/api/map");
  }

  probe(y: [number, number]): Promise<ProbeResponse> {
    return this.request<ProbeResponse>("/api/probe", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ y }),
    });
  }

  async recompute(partial: PartialConfig): Promise<void> {
    await this.request<unknown>("/api/recompute", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(partial),
    });
  }

  /**
   * Poll /api/state until the session is ready (resolves) or failed
   * (rejects); reports intermediate progress through onProgress.
   */
  async pollUntilReady(
    intervalMs = 500,
    onProgress?: (state: SessionState) => void,
    sleep: (ms: number) => Promise<void> = (ms) => new Promise((r) => setTimeout(r, ms)),
  ): Promise<SessionState> {
    for (;;) {
      const state = await this.getState();
      onProgress?.(state);
      if (state.status === "ready") {
        return state;
      }
      if (state.status === "failed") {
        throw new ApiError(state.reason ?? "computation failed", 500);
      }
      await sleep(intervalMs);
    }
  }
}
