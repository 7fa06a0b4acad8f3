/** Browser shell: canvas, pan/zoom, probe pins, and the recompute panel. */

import { ApiClient, ApiError } from "./api.js";
import { fitViewport, pan, zoomAt } from "./camera.js";
import { classColor } from "./palette.js";
import { pinDisplay, probeClick } from "./probe.js";
import { renderMap } from "./renderer.js";
import { submitRecompute, validateForm, type RecomputeForm } from "./recompute.js";
import { initialViewState, selectPin, withCamera, type ViewState } from "./state.js";
import type { DecisionMapPayload } from "./types.js";

const api = new ApiClient("");
const canvas = document.getElementById("map") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const statusEl = document.getElementById("status")!;
const progressEl = document.getElementById("progress") as HTMLProgressElement;
const pinsEl = document.getElementById("pins")!;
const toastEl = document.getElementById("toast")!;

let map: DecisionMapPayload | null = null;
let view: ViewState | null = null;

function toast(message: string): void {
  toastEl.textContent = message;
  toastEl.classList.add("show");
  setTimeout(() => toastEl.classList.remove("show"), 4000);
}

function draw(): void {
  if (map && view) {
    renderMap(ctx, map, view);
  }
}

function setView(next: ViewState): void {
  view = next;
  draw();
}

function featureNames(): string[] | null {
  const names = map?.params["feature_names"];
  return Array.isArray(names) ? (names as string[]) : null;
}

function renderPinPanel(): void {
  if (!map || !view) return;
  pinsEl.innerHTML = "";
  for (const pin of [...view.pins].reverse()) {
    const d = pinDisplay(pin, map.class_count, featureNames());
    const div = document.createElement("div");
    div.className = "pin" + (pin.id === view.selectedPin ? " selected" : "");
    const head = document.createElement("div");
    head.className = "pin-head";
    head.innerHTML =
      `<span class="badge">${pin.id}</span>` +
      `<span class="label" style="color:${classColor(d.label)}">class ${d.label}</span>` +
      `<span class="certainty">${(100 * d.certainty).toFixed(1)}% certain</span>`;
    div.appendChild(head);
    if (d.imageUrl) {
      const img = document.createElement("img");
      img.src = d.imageUrl;
      img.className = "pin-image";
      div.appendChild(img);
    } else if (d.bars) {
      const span = Math.max(...d.bars.map((b) => Math.abs(b.value)), 1e-12);
      for (const bar of d.bars) {
        const row = document.createElement("div");
        row.className = "bar-row";
        const width = (50 * Math.abs(bar.value)) / span;
        const left = bar.value < 0 ? 50 - width : 50;
        row.innerHTML =
          `<span class="bar-name">${bar.name}</span>` +
          `<span class="bar-track"><span class="bar-fill" ` +
          `style="left:${left}%;width:${width}%"></span></span>` +
          `<span class="bar-value">${bar.value.toFixed(3)}</span>`;
        div.appendChild(row);
      }
    }
    div.addEventListener("click", () => {
      if (view) {
        setView(selectPin(view, pin.id));
        renderPinPanel();
      }
    });
    pinsEl.appendChild(div);
  }
}

async function loadMap(): Promise<void> {
  statusEl.textContent = "waiting for map";
  await api.pollUntilReady(500, (state) => {
    if (state.status === "computing") {
      statusEl.textContent = `computing: ${state.stage ?? ""}`;
      progressEl.value = state.fraction ?? 0;
    }
  });
  map = await api.getMap();
  const keepPins = view;
  const camera = fitViewport(map.viewport, canvas.width, canvas.height);
  view = keepPins ? withCamera(keepPins, camera) : initialViewState(camera);
  statusEl.textContent =
    `q_knn ${map.quality.q_knn.toFixed(3)} · q_d ${map.quality.q_d.toFixed(3)}` +
    ` · q_nd ${map.quality.q_nd.toFixed(3)}`;
  progressEl.value = 1;
  draw();
  renderPinPanel();
}

// -- pointer handling: drag pans, plain click probes ------------------------

let dragging = false;
let moved = false;
let lastX = 0;
let lastY = 0;

canvas.addEventListener("pointerdown", (ev) => {
  dragging = true;
  moved = false;
  lastX = ev.offsetX;
  lastY = ev.offsetY;
  canvas.setPointerCapture(ev.pointerId);
});

canvas.addEventListener("pointermove", (ev) => {
  if (!dragging || !view) return;
  const dx = ev.offsetX - lastX;
  const dy = ev.offsetY - lastY;
  if (Math.abs(dx) + Math.abs(dy) > 2) {
    moved = true;
    setView(withCamera(view, pan(view.camera, dx, dy)));
    lastX = ev.offsetX;
    lastY = ev.offsetY;
  }
});

canvas.addEventListener("pointerup", async (ev) => {
  dragging = false;
  if (moved || !view) return;
  try {
    setView(await probeClick(api, view, ev.offsetX, ev.offsetY));
    renderPinPanel();
  } catch (err) {
    toast(err instanceof ApiError ? `probe failed: ${err.message}` : String(err));
  }
});

canvas.addEventListener("wheel", (ev) => {
  if (!view) return;
  ev.preventDefault();
  const factor = Math.exp(-ev.deltaY * 0.0015);
  setView(withCamera(view, zoomAt(view.camera, ev.offsetX, ev.offsetY, factor)));
}, { passive: false });

// -- recompute panel ---------------------------------------------------------

const form = document.getElementById("recompute-form") as HTMLFormElement;
const formError = document.getElementById("form-error")!;

function readForm(): RecomputeForm {
  const val = (name: string): number | undefined => {
    const raw = (form.elements.namedItem(name) as HTMLInputElement).value.trim();
    return raw === "" ? undefined : Number(raw);
  };
  return {
    lambda: val("lambda"),
    n_segments: val("segments"),
    k: val("k"),
    epochs: val("epochs"),
    seed: val("seed"),
    gridWidth: val("gridw"),
    gridHeight: val("gridh"),
  };
}

form.addEventListener("submit", async (ev) => {
  ev.preventDefault();
  const values = readForm();
  const checked = validateForm(values);
  if (!checked.ok) {
    formError.textContent = Object.values(checked.errors).join("; ");
    return;
  }
  formError.textContent = "";
  const button = form.querySelector("button")!;
  button.disabled = true;
  try {
    await submitRecompute(api, values, (state) => {
      if (state.status === "computing") {
        statusEl.textContent = `computing: ${state.stage ?? ""}`;
        progressEl.value = state.fraction ?? 0;
      }
    });
    await loadMap();
  } catch (err) {
    toast(err instanceof ApiError ? `recompute failed: ${err.message}` : String(err));
  } finally {
    button.disabled = false;
  }
});

const refineBtn = document.getElementById("refine") as HTMLButtonElement;
refineBtn.addEventListener("click", () => {
  // a finer grid over the current config; server-side recompute
  void submitRecompute(api, { gridWidth: 200, gridHeight: 200 }, (state) => {
    if (state.status === "computing") {
      progressEl.value = state.fraction ?? 0;
    }
  })
    .then(loadMap)
    .catch((err) => toast(String(err)));
});

void loadMap().catch((err) => {
  statusEl.textContent = "failed to load map";
  toast(String(err));
});
