import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import type { FetchLike } from "../src/api.js";

describe("api client", () => {
  it("parses the session state", async () => {
    const fetchFn: FetchLike = async () =>
      new Response(JSON.stringify({ status: "computing", stage: "grid", fraction: 0.5 }), {
        status: 200,
      });
    const state = await new ApiClient("", fetchFn).getState();
    expect(state.status).toBe("computing");
    expect(state.fraction).toBe(0.5);
  });

  it("raises ApiError with the server's status and message", async () => {
    const fetchFn: FetchLike = async () =>
      new Response(JSON.stringify({ error: "map not ready" }), { status: 409 });
    const api = new ApiClient("", fetchFn);
    const err = await api.getMap().catch((e) => e as ApiError);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).status).toBe(409);
    expect((err as ApiError).message).toBe("map not ready");
  });

  it("prefixes the base url", async () => {
    const urls: string[] = [];
    const fetchFn: FetchLike = async (url) => {
      urls.push(url);
      return new Response("{}", { status: 200 });
    };
    await new ApiClient("http://example:9", fetchFn).getState();
    expect(urls).toEqual(["http://example:9/api/state"]);
  });

  it("pollUntilReady reports progress and resolves on ready", async () => {
    let n = 0;
    const fetchFn: FetchLike = async () => {
      n += 1;
      const state = n < 4 ? { status: "computing", fraction: n / 4 } : { status: "ready" };
      return new Response(JSON.stringify(state), { status: 200 });
    };
    const seen: number[] = [];
    const state = await new ApiClient("", fetchFn).pollUntilReady(
      0,
      (s) => seen.push(s.fraction ?? 1),
      async () => {},
    );
    expect(state.status).toBe("ready");
    expect(seen).toHaveLength(4);
  });

  it("pollUntilReady rejects on failure with the reason", async () => {
    const fetchFn: FetchLike = async () =>
      new Response(JSON.stringify({ status: "failed", reason: "exploded" }), { status: 200 });
    await expect(
      new ApiClient("", fetchFn).pollUntilReady(0, undefined, async () => {}),
    ).rejects.toThrow("exploded");
  });
});
