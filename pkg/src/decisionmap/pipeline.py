"""End-to-end decision-map construction.

Steps: build the discriminative distance matrix, project to 2D, train the
inverse map on the (point, coordinate) pairs, push every grid cell center
back through the classifier, and record per-cell labels and predictive
entropies together with the sample scatter and a quality report.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from . import delaunay, embedding, evaluation, inverse_map
from .classifier import ClassifierHandle, clean_probs, predict_batch
from .datasets import Dataset
from .errors import ParameterError
from .fisher_metric import (
    DistanceMatrix,
    FisherMetricConfig,
    distance_matrix,
    euclidean_distance_matrix,
    load_or_compute_matrix,
)


@dataclass(frozen=True)
class InverseParams:
    a: float | None = None  # None: fit from (min_dist, spread) with b fixed to 1
    b: float = 1.0
    momentum: float = 0.9
    warmup_iters: int = 10
    max_iters: int = 200
    metric_mode: str = "identity"


@dataclass(frozen=True)
class GridParams:
    width: int = 100
    height: int = 100
    margin_fraction: float = 0.05


@dataclass(frozen=True)
class AccelParams:
    n_s: int | None = None
    n_k: int = 30
    epsilon: float | None = None
    seed: int = 0


@dataclass(frozen=True)
class PipelineConfig:
    metric: FisherMetricConfig = field(default_factory=FisherMetricConfig)
    umap: embedding.UmapParams = field(default_factory=embedding.UmapParams)
    inverse: InverseParams = field(default_factory=InverseParams)
    grid: GridParams = field(default_factory=GridParams)
    accel: AccelParams | None = None
    parallelism: int = 1
    quality_seed: int = 0
    euclidean_baseline: bool = False

    def to_dict(self) -> dict:
        return {
            "metric": self.metric.to_dict(),
            "umap": {
                "k": self.umap.k,
                "epochs": self.umap.epochs,
                "seed": self.umap.seed,
                "min_dist": self.umap.min_dist,
                "spread": self.umap.spread,
            },
            "inverse": {
                "a": self.inverse.a,
                "b": self.inverse.b,
                "momentum": self.inverse.momentum,
                "warmup_iters": self.inverse.warmup_iters,
                "max_iters": self.inverse.max_iters,
                "metric_mode": self.inverse.metric_mode,
            },
            "grid": {
                "width": self.grid.width,
                "height": self.grid.height,
                "margin_fraction": self.grid.margin_fraction,
            },
            "accel": None if self.accel is None else {
                "n_s": self.accel.n_s,
                "n_k": self.accel.n_k,
                "epsilon": self.accel.epsilon,
                "seed": self.accel.seed,
            },
            # parallelism is an execution detail: it never changes the map,
            # so it is not part of the serialized artifact identity
            "quality_seed": self.quality_seed,
            "euclidean_baseline": self.euclidean_baseline,
        }


@dataclass(eq=False)
class DecisionMap:
    viewport: tuple  # (xmin, xmax, ymin, ymax)
    resolution: tuple  # (gw, gh)
    grid_labels: np.ndarray  # gw x gh
    grid_entropy: np.ndarray  # gw x gh
    scatter: np.ndarray  # n x 4: x, y, model label, true label
    quality: evaluation.QualityReport
    params: dict
    class_count: int

    def cell_center(self, ix: int, iy: int) -> np.ndarray:
        return grid_centers(self.viewport, self.resolution)[1](ix, iy)

    def to_json_bytes(self) -> bytes:
        obj = {
            "viewport": list(self.viewport),
            "resolution": list(self.resolution),
            "grid_labels": self.grid_labels.tolist(),
            "grid_entropy": self.grid_entropy.tolist(),
            "scatter": self.scatter.tolist(),
            "quality": self.quality.to_dict(),
            "params": self.params,
            "class_count": self.class_count,
        }
        return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()

    @staticmethod
    def from_json_bytes(data: bytes) -> "DecisionMap":
        obj = json.loads(data.decode())
        q = obj["quality"]
        return DecisionMap(
            viewport=tuple(obj["viewport"]),
            resolution=tuple(obj["resolution"]),
            grid_labels=np.asarray(obj["grid_labels"], dtype=np.int64),
            grid_entropy=np.asarray(obj["grid_entropy"], dtype=np.float64),
            scatter=np.asarray(obj["scatter"], dtype=np.float64),
            quality=evaluation.QualityReport(
                q_knn=q["q_knn"], q_d=q["q_d"], q_nd=q["q_nd"],
                q_knn_eucl=q.get("q_knn_eucl"), k=q["k"],
                split_fraction=q["split_fraction"], seed=q["seed"],
            ),
            params=obj["params"],
            class_count=int(obj["class_count"]),
        )


@dataclass(eq=False)
class PipelineArtifacts:
    decision_map: DecisionMap
    embedding_model: embedding.EmbeddingModel
    inverse: object  # InverseMapModel or LocalizedInverse
    distances: DistanceMatrix
    classifier: ClassifierHandle


class LocalizedInverse:
    """Inverse evaluation restricted to landmark neighborhoods.

    Inside the triangulation, a query blends the per-vertex restricted
    evaluations of its containing simplex with barycentric weights, which
    keeps the map continuous across simplex edges; outside it falls back to
    the global evaluation.
    """

    def __init__(self, model: inverse_map.InverseMapModel, tri: delaunay.Triangulation):
        self.model = model
        self.tri = tri

    def _restricted(self, y: np.ndarray, anchor_ids: np.ndarray) -> np.ndarray:
        m = self.model
        sub = inverse_map.InverseMapModel(
            anchors2d=m.anchors2d[anchor_ids], theta=m.theta[:, anchor_ids],
            sigma_hat=m.sigma_hat[anchor_ids], a=m.a, b=m.b,
        )
        return inverse_map.evaluate(sub, y)

    def evaluate_batch(self, ys: np.ndarray) -> np.ndarray:
        ys = np.asarray(ys, dtype=np.float64)
        out = np.empty((ys.shape[0], self.model.theta.shape[0]))
        for row, y in enumerate(ys):
            s = self.tri.locate(y)
            if s is None:
                out[row] = inverse_map.evaluate(self.model, y)
                continue
            lam = self.tri.barycentric(s, y)
            acc = np.zeros(self.model.theta.shape[0])
            for k, v in enumerate(self.tri.simplices[s]):
                if lam[k] == 0.0:
                    continue
                acc += lam[k] * self._restricted(y, self.tri.vertex_neighbors[v])
            out[row] = acc
        return out


def predictive_entropy(probs: np.ndarray) -> np.ndarray:
    """Shannon entropy per row, natural log, on clamped probabilities."""
    p = clean_probs(probs)
    return -(p * np.log(p)).sum(axis=-1)


def grid_centers(viewport, resolution):
    """Cell centers as an (gw*gh, 2) array plus an (ix, iy) -> center lookup.

    Cells are laid out column-major in the flat array: index = ix * gh + iy.
    """
    xmin, xmax, ymin, ymax = viewport
    gw, gh = resolution
    cx = xmin + (np.arange(gw) + 0.5) * (xmax - xmin) / gw
    cy = ymin + (np.arange(gh) + 0.5) * (ymax - ymin) / gh
    flat = np.empty((gw * gh, 2))
    flat[:, 0] = np.repeat(cx, gh)
    flat[:, 1] = np.tile(cy, gw)

    def center(ix: int, iy: int) -> np.ndarray:
        return np.array([cx[ix], cy[iy]])

    return flat, center


def _viewport_from_coords(coords: np.ndarray, margin_fraction: float):
    xmin, ymin = coords.min(axis=0)
    xmax, ymax = coords.max(axis=0)
    mx = (xmax - xmin) * margin_fraction if xmax > xmin else 1.0
    my = (ymax - ymin) * margin_fraction if ymax > ymin else 1.0
    return (float(xmin - mx), float(xmax + mx), float(ymin - my), float(ymax + my))


def run_artifacts(data: Dataset, f: ClassifierHandle, config: PipelineConfig = PipelineConfig(),
                  cache_path=None, progress=None) -> PipelineArtifacts:
    if data.dim != f.dim:
        raise ParameterError(f"dataset dimension {data.dim} != classifier dimension {f.dim}")

    def report(stage, fraction):
        if progress is not None:
            progress(stage, fraction)

    report("distances", 0.0)
    if cache_path is not None:
        dist = load_or_compute_matrix(cache_path, data, f, config.metric,
                                      parallelism=config.parallelism,
                                      progress=lambda fr: report("distances", fr))
    else:
        dist = distance_matrix(data, f, config.metric, parallelism=config.parallelism,
                               progress=lambda fr: report("distances", fr))

    report("embedding", 0.0)
    graph = embedding.calibrate(dist, k=config.umap.k)
    a_emb, b_emb = embedding.fit_ab(config.umap.min_dist, config.umap.spread)
    emb = embedding.optimize(graph, a_emb, b_emb, epochs=config.umap.epochs,
                             seed=config.umap.seed)
    coords = emb.coords

    report("inverse", 0.0)
    inv_a = config.inverse.a
    if inv_a is None:
        inv_a, _ = embedding.fit_ab(config.umap.min_dist, config.umap.spread, fix_b=True)
    sigma_hat = inverse_map.sigma_hat_from_graph(graph, dist.values, coords)
    metrics = inverse_map.local_metrics(data, f, mode=config.inverse.metric_mode)
    model, _training = inverse_map.train(
        data.points, coords, a=inv_a, b=config.inverse.b, sigma_hat=sigma_hat,
        max_iters=config.inverse.max_iters, momentum=config.inverse.momentum,
        warmup_iters=config.inverse.warmup_iters, metrics=metrics,
    )
    if config.accel is not None:
        tri = delaunay.build(coords, n_s=config.accel.n_s, n_k=min(config.accel.n_k, data.n),
                             epsilon=config.accel.epsilon, seed=config.accel.seed)
        inverse: object = LocalizedInverse(model, tri)
    else:
        inverse = model

    report("grid", 0.0)
    viewport = _viewport_from_coords(coords, config.grid.margin_fraction)
    resolution = (config.grid.width, config.grid.height)
    flat_centers, _ = grid_centers(viewport, resolution)
    back = _inverse_eval(inverse, flat_centers)
    report("grid", 0.5)
    grid_probs = predict_batch(f, back)
    labels_flat = grid_probs.argmax(axis=1)
    entropy_flat = predictive_entropy(grid_probs)
    gw, gh = resolution
    grid_labels = labels_flat.reshape(gw, gh)
    grid_entropy = entropy_flat.reshape(gw, gh)

    report("quality", 0.0)
    model_labels = predict_batch(f, data.points).argmax(axis=1)
    q_knn_val = evaluation.q_knn(coords, model_labels, k=5)
    q_d_val = evaluation.q_d(data.points, coords, model, f)
    q_nd_val = evaluation.q_nd(
        data.points, coords, f, a=inv_a, b=config.inverse.b, sigma_hat=sigma_hat,
        split_fraction=0.7, seed=config.quality_seed,
        train_kwargs={
            "max_iters": config.inverse.max_iters,
            "momentum": config.inverse.momentum,
            "warmup_iters": config.inverse.warmup_iters,
        },
    )
    q_knn_eucl = None
    if config.euclidean_baseline:
        eucl_graph = embedding.calibrate(euclidean_distance_matrix(data), k=config.umap.k)
        eucl_emb = embedding.optimize(eucl_graph, a_emb, b_emb,
                                      epochs=config.umap.epochs, seed=config.umap.seed)
        q_knn_eucl = evaluation.q_knn(eucl_emb.coords, model_labels, k=5)
    quality = evaluation.QualityReport(
        q_knn=q_knn_val, q_d=q_d_val, q_nd=q_nd_val, q_knn_eucl=q_knn_eucl,
        k=5, split_fraction=0.7, seed=config.quality_seed,
    )

    true_labels = data.labels if data.labels is not None else model_labels
    scatter = np.column_stack([coords, model_labels.astype(np.float64),
                               np.asarray(true_labels, dtype=np.float64)])
    params = {
        "config": config.to_dict(),
        "classifier_id": f.fingerprint(),
        "n": data.n,
        "input_dim": data.dim,
        "image_shape": list(data.image_shape) if data.image_shape else None,
        "feature_names": data.feature_names,
    }
    decision_map = DecisionMap(
        viewport=viewport, resolution=resolution, grid_labels=grid_labels,
        grid_entropy=grid_entropy, scatter=scatter, quality=quality,
        params=params, class_count=f.class_count,
    )
    report("done", 1.0)
    return PipelineArtifacts(decision_map=decision_map, embedding_model=emb,
                             inverse=inverse, distances=dist, classifier=f)


def run(data: Dataset, f: ClassifierHandle, config: PipelineConfig = PipelineConfig(),
        cache_path=None, progress=None) -> DecisionMap:
    return run_artifacts(data, f, config, cache_path=cache_path, progress=progress).decision_map


def _inverse_eval(inverse, ys: np.ndarray) -> np.ndarray:
    if isinstance(inverse, inverse_map.InverseMapModel):
        return inverse_map.evaluate_batch(inverse, ys)
    return inverse.evaluate_batch(ys)


def probe(decision_map: DecisionMap, inverse, f: ClassifierHandle, y):
    """Inverse-project a 2D position and classify it.

    Returns (x, probs, label, entropy); at a grid cell center this follows
    the exact code path used to fill that cell.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (2,) or not np.all(np.isfinite(y)):
        raise ParameterError("probe position must be a finite 2-vector")
    x = _inverse_eval(inverse, y[None, :])[0]
    probs = predict_batch(f, x[None, :])[0]
    label = int(probs.argmax())
    entropy = float(predictive_entropy(probs[None, :])[0])
    return x, probs, label, entropy
