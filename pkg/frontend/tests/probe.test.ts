import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import { fitViewport, screenToWorld } from "../src/camera.js";
import { pinDisplay, probeClick } from "../src/probe.js";
import { initialViewState } from "../src/state.js";
import type { FetchLike } from "../src/api.js";

/** Mocked server: records requests, replies with canned payloads. */
function mockServer(replies: Record<string, unknown>, status = 200) {
  const calls: { url: string; body: unknown }[] = [];
  const fetchFn: FetchLike = async (url, init) => {
    calls.push({ url, body: init?.body ? JSON.parse(init.body as string) : null });
    const match = Object.keys(replies).find((k) => url.endsWith(k));
    if (!match) {
      return new Response(JSON.stringify({ error: "not found" }), { status: 404 });
    }
    return new Response(JSON.stringify(replies[match]), {
      status,
      headers: { "Content-Type": "application/json" },
    });
  };
  return { calls, fetchFn };
}

const MOCKED_PROBE = {
  x: [0.25, -1.5, 3.125],
  probs: [0.0625, 0.8125, 0.125],
  label: 1,
  entropy: 0.6,
};

describe("probe click against a mocked server", () => {
  it("appends a pin carrying exactly the mocked label and probs", async () => {
    const { calls, fetchFn } = mockServer({ "/api/probe": MOCKED_PROBE });
    const api = new ApiClient("", fetchFn);
    const state = initialViewState(fitViewport([-2, 2, -2, 2], 400, 400));
    const next = await probeClick(api, state, 150, 230);
    expect(next.pins).toHaveLength(1);
    expect(next.pins[0].response.label).toBe(MOCKED_PROBE.label);
    expect(next.pins[0].response.probs).toEqual(MOCKED_PROBE.probs);
    expect(next.pins[0].response.x).toEqual(MOCKED_PROBE.x);
    // the POSTed position is the screen point mapped into embedding coords
    const [wx, wy] = screenToWorld(state.camera, 150, 230);
    expect(calls[0].url).toBe("/api/probe");
    expect(calls[0].body).toEqual({ y: [wx, wy] });
  });

  it("renders the mocked payload in the pin display model", async () => {
    const { fetchFn } = mockServer({ "/api/probe": MOCKED_PROBE });
    const api = new ApiClient("", fetchFn);
    const state = initialViewState(fitViewport([-2, 2, -2, 2], 400, 400));
    const next = await probeClick(api, state, 10, 20);
    const display = pinDisplay(next.pins[0], 3, ["a", "b", "c"]);
    expect(display.label).toBe(1);
    expect(display.certainty).toBeCloseTo(1 - 0.6 / Math.log(3), 12);
    expect(display.bars).toEqual([
      { name: "a", value: 0.25 },
      { name: "b", value: -1.5 },
      { name: "c", value: 3.125 },
    ]);
    expect(display.imageUrl).toBeNull();
  });

  it("uses an image payload when the server provides one", async () => {
    const withImage = { ...MOCKED_PROBE, image_png: "aGVsbG8=" };
    const { fetchFn } = mockServer({ "/api/probe": withImage });
    const api = new ApiClient("", fetchFn);
    const state = initialViewState(fitViewport([-2, 2, -2, 2], 400, 400));
    const next = await probeClick(api, state, 10, 20);
    const display = pinDisplay(next.pins[0], 3, null);
    expect(display.imageUrl).toBe("data:image/png;base64,aGVsbG8=");
    expect(display.bars).toBeNull();
  });

  it("server error adds no pin and surfaces the status", async () => {
    const { fetchFn } = mockServer({ "/api/probe": { error: "session not ready" } }, 409);
    const api = new ApiClient("", fetchFn);
    const state = initialViewState(fitViewport([-2, 2, -2, 2], 400, 400));
    await expect(probeClick(api, state, 10, 20)).rejects.toThrowError(ApiError);
    expect(state.pins).toHaveLength(0);
  });

  it("two clicks at the same pixel produce two pins with identical payloads", async () => {
    const { fetchFn } = mockServer({ "/api/probe": MOCKED_PROBE });
    const api = new ApiClient("", fetchFn);
    let state = initialViewState(fitViewport([-2, 2, -2, 2], 400, 400));
    state = await probeClick(api, state, 77, 88);
    state = await probeClick(api, state, 77, 88);
    expect(state.pins).toHaveLength(2);
    expect(state.pins[0].response).toEqual(state.pins[1].response);
    expect(state.pins[0].y).toEqual(state.pins[1].y);
  });
});
