/**
 * Canvas rendering of the decision map: entropy-shaded cells, the sample
 * scatter with disagreement crosses, and numbered probe pins.
 *
 * Pan/zoom only changes the camera; rendering never talks to the server.
 */

import { Camera, worldToScreen } from "./camera.js";
import { classColor, entropyAlpha } from "./palette.js";
import type { ViewState } from "./state.js";
import type { DecisionMapPayload } from "./types.js";

/** The subset of CanvasRenderingContext2D the renderer uses (stubbed in tests). */
export interface DrawContext {
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  globalAlpha: number;
  font: string;
  textAlign: CanvasTextAlign;
  textBaseline: CanvasTextBaseline;
  fillRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  fill(): void;
  stroke(): void;
  fillText(text: string, x: number, y: number): void;
}

export const POINT_RADIUS = 4;
export const PIN_RADIUS = 9;

export function renderMap(ctx: DrawContext, map: DecisionMapPayload, view: ViewState): void {
  const cam = view.camera;
  ctx.globalAlpha = 1;
  ctx.fillStyle = "#ffffff";
  ctx.fillRect(0, 0, cam.width, cam.height);
  drawCells(ctx, map, cam);
  drawScatter(ctx, map, cam);
  drawPins(ctx, view);
  ctx.globalAlpha = 1;
}

function drawCells(ctx: DrawContext, map: DecisionMapPayload, cam: Camera): void {
  const [xmin, xmax, ymin, ymax] = map.viewport;
  const [gw, gh] = map.resolution;
  const cellW = (xmax - xmin) / gw;
  const cellH = (ymax - ymin) / gh;
  for (let ix = 0; ix < gw; ix++) {
    for (let iy = 0; iy < gh; iy++) {
      const x0 = xmin + ix * cellW;
      const y1 = ymin + (iy + 1) * cellH;
      const [px, py] = worldToScreen(cam, x0, y1); // top-left corner on screen
      const w = cellW * cam.scale;
      const h = cellH * cam.scale;
      if (px + w < 0 || py + h < 0 || px > cam.width || py > cam.height) {
        continue;
      }
      ctx.globalAlpha = entropyAlpha(map.grid_entropy[ix][iy], map.class_count);
      ctx.fillStyle = classColor(map.grid_labels[ix][iy]);
      // +0.5 overdraw hides hairline seams between cells
      ctx.fillRect(px, py, w + 0.5, h + 0.5);
    }
  }
  ctx.globalAlpha = 1;
}

function drawScatter(ctx: DrawContext, map: DecisionMapPayload, cam: Camera): void {
  ctx.globalAlpha = 1;
  for (const [x, y, modelLabel, trueLabel] of map.scatter) {
    const [px, py] = worldToScreen(cam, x, y);
    ctx.beginPath();
    ctx.arc(px, py, POINT_RADIUS, 0, 2 * Math.PI);
    ctx.fillStyle = classColor(trueLabel);
    ctx.fill();
    ctx.strokeStyle = "#282828";
    ctx.lineWidth = 1;
    ctx.stroke();
    if (modelLabel !== trueLabel) {
      const r = POINT_RADIUS + 2;
      ctx.strokeStyle = classColor(modelLabel);
      ctx.lineWidth = 2;
      ctx.beginPath();
      ctx.moveTo(px - r, py - r);
      ctx.lineTo(px + r, py + r);
      ctx.moveTo(px - r, py + r);
      ctx.lineTo(px + r, py - r);
      ctx.stroke();
    }
  }
}

function drawPins(ctx: DrawContext, view: ViewState): void {
  for (const pin of view.pins) {
    const [px, py] = worldToScreen(view.camera, pin.y[0], pin.y[1]);
    ctx.globalAlpha = 1;
    ctx.beginPath();
    ctx.arc(px, py, PIN_RADIUS, 0, 2 * Math.PI);
    ctx.fillStyle = pin.id === view.selectedPin ? "#222222" : "#555555";
    ctx.fill();
    ctx.strokeStyle = "#ffffff";
    ctx.lineWidth = 2;
    ctx.stroke();
    ctx.fillStyle = "#ffffff";
    ctx.font = "11px sans-serif";
    ctx.textAlign = "center";
    ctx.textBaseline = "middle";
    ctx.fillText(String(pin.id), px, py);
  }
}
