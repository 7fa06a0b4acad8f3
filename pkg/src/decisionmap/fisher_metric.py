"""Discriminative distances on the data space.

The distance between x and y is the discretized arc length, along the
straight segment from x to y, of the square-root Jensen-Shannon divergence
between classifier outputs, plus a lambda-weighted Euclidean regularizer:

    d(x, y) = sum_i sqrt(D_JS(f(p_{i-1}) || f(p_i))) + lambda * ||x - y||_2

with p_i = x + (i/n)(y - x).  Full pairwise matrices batch all classifier
evaluations so that forward passes, not Python loops, dominate runtime.

Caveat: with the straight-segment approximation and lambda = 0 the triangle
inequality can be violated (the true arc-length infimum is a metric; its
fixed-path approximation is not).  A positive lambda restores it in practice;
no repair is attempted here.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .classifier import ClassifierHandle, clean_probs, predict_batch
from .datasets import Dataset
from .errors import DimensionError, ParameterError

_PAIR_CHUNK = 512  # unordered pairs per classifier batch, fixed so results
                   # do not depend on the parallelism degree


@dataclass(frozen=True)
class FisherMetricConfig:
    lam: float = 0.65
    n_segments: int = 8
    base_metric: str = "euclidean"
    divergence: str = "sqrt_js"  # or "sym_kl"

    def __post_init__(self):
        if self.lam < 0:
            raise ParameterError("lambda must be nonnegative")
        if self.n_segments < 1:
            raise ParameterError("n_segments must be >= 1")
        if self.base_metric != "euclidean":
            raise ParameterError(f"unknown base metric {self.base_metric!r}")
        if self.divergence not in ("sqrt_js", "sym_kl"):
            raise ParameterError(f"unknown divergence {self.divergence!r}")

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "n_segments": self.n_segments,
            "base_metric": self.base_metric,
            "divergence": self.divergence,
        }

    @staticmethod
    def from_dict(obj: dict) -> "FisherMetricConfig":
        return FisherMetricConfig(
            lam=float(obj["lambda"]),
            n_segments=int(obj["n_segments"]),
            base_metric=obj.get("base_metric", "euclidean"),
            divergence=obj.get("divergence", "sqrt_js"),
        )


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    values: np.ndarray
    config: FisherMetricConfig
    classifier_id: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", v)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ParameterError("distance matrix must be square")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ParameterError("distances must be finite and nonnegative")
        if np.max(np.abs(v - v.T)) > 1e-9 or np.any(np.diag(v) != 0):
            raise ParameterError("distance matrix must be symmetric with zero diagonal")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def to_json(self) -> str:
        tril = self.values[np.tril_indices(self.n, k=-1)]
        return json.dumps(
            {
                "n": self.n,
                "config": self.config.to_dict(),
                "classifier_id": self.classifier_id,
                "values_lower_triangle": tril.tolist(),
            },
            sort_keys=True,
        )

    @staticmethod
    def from_json(text: str) -> "DistanceMatrix":
        obj = json.loads(text)
        n = int(obj["n"])
        values = np.zeros((n, n))
        values[np.tril_indices(n, k=-1)] = obj["values_lower_triangle"]
        values = values + values.T
        return DistanceMatrix(
            values=values,
            config=FisherMetricConfig.from_dict(obj["config"]),
            classifier_id=obj.get("classifier_id", ""),
        )


def _kl_rows(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    # callers must pass cleaned (clamped, renormalized) probabilities
    return (p * np.log(p / q)).sum(axis=-1)


def kl_divergence(p, q) -> float:
    """Kullback-Leibler divergence sum(p * ln(p/q)), natural log."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape or p.ndim != 1:
        raise DimensionError("p and q must be probability vectors of equal length")
    return float(_kl_rows(clean_probs(p), clean_probs(q)))


def _js_sqrt_rows(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    p = clean_probs(p)
    q = clean_probs(q)
    m = 0.5 * (p + q)
    js = 0.5 * _kl_rows(p, m) + 0.5 * _kl_rows(q, m)
    return np.sqrt(np.maximum(js, 0.0))


def _sym_kl_rows(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    p = clean_probs(p)
    q = clean_probs(q)
    return np.sqrt(np.maximum(0.5 * _kl_rows(p, q) + 0.5 * _kl_rows(q, p), 0.0))


def js_sqrt_distance(p, q) -> float:
    """sqrt(D_JS(p||q)); a metric on the simplex, bounded by sqrt(ln 2)."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape or p.ndim != 1:
        raise DimensionError("p and q must be probability vectors of equal length")
    return float(_js_sqrt_rows(p, q))


def _divergence_rows(config: FisherMetricConfig):
    return _sym_kl_rows if config.divergence == "sym_kl" else _js_sqrt_rows


def _path_points(x: np.ndarray, y: np.ndarray, n: int) -> np.ndarray:
    t = np.arange(n + 1) / n
    return x[None, :] + t[:, None] * (y - x)[None, :]


def _eucl_rows(diff: np.ndarray) -> np.ndarray:
    # shared by the single-pair and batched paths so both accumulate alike
    return np.sqrt((diff**2).sum(axis=-1))


def fisher_distance_parts(x, y, f: ClassifierHandle, config: FisherMetricConfig):
    """(divergence arc sum, Euclidean length); total = parts[0] + lam * parts[1].

    The Euclidean part is the exact segment length ||x - y||, which equals the
    sum of sub-segment lengths on a straight path; keeping it a separate term
    makes the lambda decomposition of the total exact in floating point.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    probs = predict_batch(f, _path_points(x, y, config.n_segments))
    div = _divergence_rows(config)(probs[:-1], probs[1:])
    return float(div.sum()), float(_eucl_rows(x - y))


def fisher_distance(x, y, f: ClassifierHandle, config: FisherMetricConfig) -> float:
    js_part, eucl = fisher_distance_parts(x, y, f, config)
    return js_part + config.lam * eucl


def euclidean_distance_matrix(data: Dataset) -> DistanceMatrix:
    """Plain pairwise Euclidean distances (the metric == euclidean baseline)."""
    diff = data.points[:, None, :] - data.points[None, :, :]
    values = np.sqrt((diff**2).sum(axis=-1))
    np.fill_diagonal(values, 0.0)
    values = np.minimum(values, values.T)  # enforce exact symmetry
    cfg = FisherMetricConfig(lam=1.0, n_segments=1)
    return DistanceMatrix(values=values, config=cfg, classifier_id="euclidean")


def _pair_chunk_distances(points, pairs, f, config, div_rows):
    """Distances for a chunk of unordered pairs, classifier calls batched."""
    nseg = config.n_segments
    m = len(pairs)
    xs = points[pairs[:, 0]]
    ys = points[pairs[:, 1]]
    t = np.arange(nseg + 1) / nseg
    # (m, nseg+1, D) path points, flattened into one forward pass
    path = xs[:, None, :] + t[None, :, None] * (ys - xs)[:, None, :]
    probs = predict_batch(f, path.reshape(m * (nseg + 1), -1))
    probs = probs.reshape(m, nseg + 1, -1)
    div = div_rows(probs[:, :-1, :], probs[:, 1:, :])
    return div.sum(axis=1) + config.lam * _eucl_rows(xs - ys)


def distance_matrix(data: Dataset, f: ClassifierHandle, config: FisherMetricConfig,
                    parallelism: int = 1, progress=None) -> DistanceMatrix:
    """All-pairs discriminative distances.

    Each unordered pair is computed once; pairs are packed into fixed-size
    chunks whose path points share one classifier batch, and chunks may fan
    out across worker threads.  Results are bit-identical to the per-pair
    loop and independent of the parallelism degree.
    """
    if data.n < 2:
        raise ParameterError("need at least 2 points")
    iu = np.column_stack(np.triu_indices(data.n, k=1))
    div_rows = _divergence_rows(config)
    chunks = [iu[lo : lo + _PAIR_CHUNK] for lo in range(0, len(iu), _PAIR_CHUNK)]
    done = 0
    values = np.zeros((data.n, data.n))

    def work(chunk):
        return _pair_chunk_distances(data.points, chunk, f, config, div_rows)

    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(work, chunks))
    else:
        results = []
        for chunk in chunks:
            results.append(work(chunk))
            done += len(chunk)
            if progress is not None:
                progress(done / len(iu))
    for chunk, dists in zip(chunks, results):
        values[chunk[:, 0], chunk[:, 1]] = dists
        values[chunk[:, 1], chunk[:, 0]] = dists
    if progress is not None:
        progress(1.0)
    return DistanceMatrix(values=values, config=config, classifier_id=f.fingerprint())


def load_or_compute_matrix(cache_path, data, f, config, parallelism=1, progress=None):
    """Resume from a cached matrix when config and classifier id both match."""
    path = Path(cache_path)
    if path.exists():
        cached = DistanceMatrix.from_json(path.read_text())
        if (
            cached.n == data.n
            and cached.config == config
            and cached.classifier_id == f.fingerprint()
        ):
            return cached
    dist = distance_matrix(data, f, config, parallelism=parallelism, progress=progress)
    path.write_text(dist.to_json())
    return dist
