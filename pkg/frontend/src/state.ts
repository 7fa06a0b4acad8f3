/**
 * Client view state: camera, hovered cell, and the ordered probe pins.
 *
 * Pin numbering is append-only: a pin keeps its label ("0", "1", ...) for
 * the lifetime of the page, regardless of re-renders or later pins.
 */

import type { Camera } from "./camera.js";
import type { ProbeResponse } from "./types.js";

export interface ProbePin {
  /** stable label index, assigned at creation */
  id: number;
  /** embedding-space position that was probed */
  y: [number, number];
  response: ProbeResponse;
}

export interface ViewState {
  camera: Camera;
  hoveredCell: [number, number] | null;
  pins: ProbePin[];
  selectedPin: number | null;
}

export function initialViewState(camera: Camera): ViewState {
  return { camera, hoveredCell: null, pins: [], selectedPin: null };
}

export function addPin(state: ViewState, y: [number, number], response: ProbeResponse): ViewState {
  const pin: ProbePin = { id: state.pins.length, y, response };
  return { ...state, pins: [...state.pins, pin], selectedPin: pin.id };
}

export function selectPin(state: ViewState, id: number | null): ViewState {
  if (id !== null && !state.pins.some((p) => p.id === id)) {
    return state;
  }
  return { ...state, selectedPin: id };
}

export function withCamera(state: ViewState, camera: Camera): ViewState {
  return { ...state, camera };
}

export function withHoveredCell(state: ViewState, cell: [number, number] | null): ViewState {
  return { ...state, hoveredCell: cell };
}
