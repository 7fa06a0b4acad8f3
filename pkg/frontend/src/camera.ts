/**
 * Invertible screen <-> embedding transform with pan and zoom.
 *
 * Uniform scale (pixels per embedding unit), y axis flipped so larger
 * embedding y is higher on screen.
 */

export interface Camera {
  /** embedding point shown at the canvas center */
  centerX: number;
  centerY: number;
  /** pixels per embedding unit */
  scale: number;
  /** canvas size in pixels */
  width: number;
  height: number;
}

export function fitViewport(
  viewport: [number, number, number, number],
  width: number,
  height: number,
  padding = 0.02,
): Camera {
  const [xmin, xmax, ymin, ymax] = viewport;
  const spanX = Math.max(xmax - xmin, 1e-12);
  const spanY = Math.max(ymax - ymin, 1e-12);
  const scale = (1 - padding) * Math.min(width / spanX, height / spanY);
  return {
    centerX: (xmin + xmax) / 2,
    centerY: (ymin + ymax) / 2,
    scale,
    width,
    height,
  };
}

export function worldToScreen(cam: Camera, x: number, y: number): [number, number] {
  return [
    cam.width / 2 + (x - cam.centerX) * cam.scale,
    cam.height / 2 - (y - cam.centerY) * cam.scale,
  ];
}

export function screenToWorld(cam: Camera, px: number, py: number): [number, number] {
  return [
    cam.centerX + (px - cam.width / 2) / cam.scale,
    cam.centerY - (py - cam.height / 2) / cam.scale,
  ];
}

/** Shift the camera by a screen-space drag delta. */
export function pan(cam: Camera, dxPx: number, dyPx: number): Camera {
  return {
    ...cam,
    centerX: cam.centerX - dxPx / cam.scale,
    centerY: cam.centerY + dyPx / cam.scale,
  };
}

/** Zoom by a factor while keeping the embedding point under the cursor fixed. */
export function zoomAt(cam: Camera, px: number, py: number, factor: number): Camera {
  const clamped = Math.min(Math.max(cam.scale * factor, 1e-6), 1e9);
  const [wx, wy] = screenToWorld(cam, px, py);
  const next = { ...cam, scale: clamped };
  // solve for the center that maps (wx, wy) back to (px, py)
  return {
    ...next,
    centerX: wx - (px - cam.width / 2) / clamped,
    centerY: wy + (py - cam.height / 2) / clamped,
  };
}
