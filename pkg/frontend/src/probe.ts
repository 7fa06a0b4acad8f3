/**
 * Click-to-probe flow: screen point -> embedding coords -> POST /api/probe
 * -> append a numbered pin.  On server errors no pin is added and the error
 * surfaces to the caller (shown as a toast by the shell).
 */

import type { ApiClient } from "./api.js";
import { screenToWorld } from "./camera.js";
import { addPin, type ViewState } from "./state.js";
import { certainty } from "./palette.js";
import type { ProbeResponse } from "./types.js";

export async function probeClick(
  api: ApiClient,
  state: ViewState,
  screenX: number,
  screenY: number,
): Promise<ViewState> {
  const [wx, wy] = screenToWorld(state.camera, screenX, screenY);
  const response = await api.probe([wx, wy]);
  return addPin(state, [wx, wy], response);
}

export interface PinDisplay {
  title: string;
  label: number;
  /** 1 - H / ln(C), the display certainty next to the predicted label */
  certainty: number;
  /** horizontal bar chart rows for non-image data */
  bars: { name: string; value: number }[] | null;
  /** data URL for image datasets */
  imageUrl: string | null;
}

/** Pure display model for a probe result; no domain math beyond 1 - H/lnC. */
export function pinDisplay(
  pin: { id: number; response: ProbeResponse },
  classCount: number,
  featureNames: string[] | null,
): PinDisplay {
  const r = pin.response;
  return {
    title: `pin ${pin.id}`,
    label: r.label,
    certainty: certainty(r.entropy, classCount),
    bars: r.image_png
      ? null
      : r.x.map((value, i) => ({ name: featureNames?.[i] ?? `f${i}`, value })),
    imageUrl: r.image_png ? `data:image/png;base64,${r.image_png}` : null,
  };
}
