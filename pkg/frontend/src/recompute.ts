/**
 * Recompute panel logic: client-side validation of the editable parameters,
 * submission to POST /api/recompute, and polling /api/state until the new
 * map is ready.  Invalid values never reach the server.
 */

import type { ApiClient } from "./api.js";
import type { PartialConfig, SessionState } from "./types.js";

export interface RecomputeForm {
  lambda?: number;
  n_segments?: number;
  k?: number;
  epochs?: number;
  seed?: number;
  gridWidth?: number;
  gridHeight?: number;
}

export interface ValidationResult {
  ok: boolean;
  errors: Partial<Record<keyof RecomputeForm, string>>;
  config: PartialConfig;
}

export function validateForm(form: RecomputeForm): ValidationResult {
  const errors: ValidationResult["errors"] = {};
  if (form.lambda !== undefined && !(form.lambda >= 0)) {
    errors.lambda = "regularization weight must be >= 0";
  }
  if (form.n_segments !== undefined && !(Number.isInteger(form.n_segments) && form.n_segments >= 1)) {
    errors.n_segments = "segments must be an integer >= 1";
  }
  if (form.k !== undefined && !(Number.isInteger(form.k) && form.k >= 2)) {
    errors.k = "neighbors must be an integer >= 2";
  }
  if (form.epochs !== undefined && !(Number.isInteger(form.epochs) && form.epochs >= 0)) {
    errors.epochs = "epochs must be a nonnegative integer";
  }
  if (form.seed !== undefined && !Number.isInteger(form.seed)) {
    errors.seed = "seed must be an integer";
  }
  for (const key of ["gridWidth", "gridHeight"] as const) {
    const v = form[key];
    if (v !== undefined && !(Number.isInteger(v) && v >= 2 && v <= 400)) {
      errors[key] = "grid size must be an integer in [2, 400]";
    }
  }
  const config: PartialConfig = {};
  if (form.lambda !== undefined || form.n_segments !== undefined) {
    config.metric = {};
    if (form.lambda !== undefined) config.metric.lambda = form.lambda;
    if (form.n_segments !== undefined) config.metric.n_segments = form.n_segments;
  }
  if (form.k !== undefined || form.epochs !== undefined || form.seed !== undefined) {
    config.umap = {};
    if (form.k !== undefined) config.umap.k = form.k;
    if (form.epochs !== undefined) config.umap.epochs = form.epochs;
    if (form.seed !== undefined) config.umap.seed = form.seed;
  }
  if (form.gridWidth !== undefined || form.gridHeight !== undefined) {
    config.grid = {};
    if (form.gridWidth !== undefined) config.grid.width = form.gridWidth;
    if (form.gridHeight !== undefined) config.grid.height = form.gridHeight;
  }
  return { ok: Object.keys(errors).length === 0, errors, config };
}

/**
 * Validate, submit, and poll to completion.  Returns the final session
 * state; throws before any network call when validation fails.
 */
export async function submitRecompute(
  api: ApiClient,
  form: RecomputeForm,
  onProgress?: (state: SessionState) => void,
  intervalMs = 500,
): Promise<SessionState> {
  const checked = validateForm(form);
  if (!checked.ok) {
    throw new Error(Object.values(checked.errors).join("; "));
  }
  await api.recompute(checked.config);
  return api.pollUntilReady(intervalMs, onProgress);
}
