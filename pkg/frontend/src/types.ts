/** Payload shapes served by the decision-map HTTP API. */

export interface DecisionMapPayload {
  /** [xmin, xmax, ymin, ymax] in embedding units */
  viewport: [number, number, number, number];
  /** [gw, gh] grid cells */
  resolution: [number, number];
  /** gw x gh predicted class per cell */
  grid_labels: number[][];
  /** gw x gh predictive entropy per cell, in [0, ln C] */
  grid_entropy: number[][];
  /** rows of [x, y, model_label, true_label] */
  scatter: number[][];
  quality: QualityPayload;
  params: Record<string, unknown>;
  class_count: number;
}

export interface QualityPayload {
  q_knn: number;
  q_knn_eucl: number | null;
  q_d: number;
  q_nd: number;
  k: number;
  split_fraction: number;
  seed: number;
}

export interface ProbeResponse {
  x: number[];
  probs: number[];
  label: number;
  entropy: number;
  /** base64 PNG of the inverse sample, present for image datasets */
  image_png?: string;
}

export interface SessionState {
  status: "idle" | "computing" | "ready" | "failed";
  stage?: string;
  fraction?: number;
  reason?: string;
  n?: number;
  dim?: number;
  classes?: number;
}

/** Partial pipeline config accepted by POST /api/recompute. */
export interface PartialConfig {
  metric?: { lambda?: number; n_segments?: number };
  umap?: { k?: number; epochs?: number; seed?: number };
  grid?: { width?: number; height?: number };
}
