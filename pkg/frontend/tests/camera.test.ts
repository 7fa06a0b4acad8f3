import { describe, expect, it } from "vitest";

import { fitViewport, pan, screenToWorld, worldToScreen, zoomAt } from "../src/camera.js";

const VIEWPORT: [number, number, number, number] = [-12.5, 8.25, -3.75, 15.5];

describe("camera transforms", () => {
  it("screen -> world -> screen round trip stays under 0.5 px", () => {
    let cam = fitViewport(VIEWPORT, 820, 680);
    // exercise a camera that has been panned and zoomed around
    cam = pan(cam, 37.5, -120.25);
    cam = zoomAt(cam, 100, 50, 2.7);
    cam = zoomAt(cam, 700, 600, 0.31);
    for (let i = 0; i < 500; i++) {
      const px = (i * 7919) % 820 + 0.25;
      const py = (i * 104729) % 680 + 0.75;
      const [wx, wy] = screenToWorld(cam, px, py);
      const [bx, by] = worldToScreen(cam, wx, wy);
      expect(Math.hypot(bx - px, by - py)).toBeLessThan(0.5);
    }
  });

  it("world -> screen -> world round trip preserves embedding points", () => {
    const cam = fitViewport(VIEWPORT, 820, 680);
    for (const [x, y] of [[-12.5, -3.75], [8.25, 15.5], [0, 0], [1.234, -2.345]]) {
      const [px, py] = worldToScreen(cam, x, y);
      const [bx, by] = screenToWorld(cam, px, py);
      expect(bx).toBeCloseTo(x, 9);
      expect(by).toBeCloseTo(y, 9);
    }
  });

  it("fitViewport shows the whole viewport", () => {
    const cam = fitViewport(VIEWPORT, 820, 680);
    for (const [x, y] of [
      [VIEWPORT[0], VIEWPORT[2]],
      [VIEWPORT[1], VIEWPORT[3]],
      [VIEWPORT[0], VIEWPORT[3]],
      [VIEWPORT[1], VIEWPORT[2]],
    ]) {
      const [px, py] = worldToScreen(cam, x, y);
      expect(px).toBeGreaterThanOrEqual(0);
      expect(px).toBeLessThanOrEqual(820);
      expect(py).toBeGreaterThanOrEqual(0);
      expect(py).toBeLessThanOrEqual(680);
    }
  });

  it("zoomAt keeps the point under the cursor fixed", () => {
    const cam = fitViewport(VIEWPORT, 820, 680);
    const [wx, wy] = screenToWorld(cam, 123, 456);
    const zoomed = zoomAt(cam, 123, 456, 3.5);
    const [px, py] = worldToScreen(zoomed, wx, wy);
    expect(px).toBeCloseTo(123, 6);
    expect(py).toBeCloseTo(456, 6);
    expect(zoomed.scale).toBeCloseTo(cam.scale * 3.5, 9);
  });

  it("y axis points up", () => {
    const cam = fitViewport(VIEWPORT, 820, 680);
    const [, pyLow] = worldToScreen(cam, 0, VIEWPORT[2]);
    const [, pyHigh] = worldToScreen(cam, 0, VIEWPORT[3]);
    expect(pyHigh).toBeLessThan(pyLow);
  });

  it("pan moves the view by the drag delta", () => {
    const cam = fitViewport(VIEWPORT, 820, 680);
    const [wx, wy] = screenToWorld(cam, 400, 300);
    const panned = pan(cam, 25, -40);
    const [px, py] = worldToScreen(panned, wx, wy);
    expect(px).toBeCloseTo(425, 6);
    expect(py).toBeCloseTo(260, 6);
  });
});
