"""Inverse projection from the 2D embedding back to feature space.

A query y is mapped to a convex combination of trained anchor columns:
weights u_i(y) are the student-t kernels (1 + a ||y - p_i||^(2b))^-1 scaled
by 1/sigma_i and normalized.  The anchor matrix is fitted by gradient
descent with the exact optimal step size along each descent direction, a
momentum term, and an optional Euclidean warm-up before switching to
caller-supplied local metrics.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .classifier import ClassifierHandle, predict_batch
from .datasets import Dataset
from .errors import DivergenceError, ParameterError, UnsupportedError
from .fisher_metric import _js_sqrt_rows

_EVAL_CHUNK = 2048
_UNDERFLOW = 1e-300


@dataclass(frozen=True, eq=False)
class InverseMapModel:
    anchors2d: np.ndarray  # n x 2 kernel centers
    theta: np.ndarray      # D x n anchor columns
    sigma_hat: np.ndarray  # n kernel widths (squared embedding units)
    a: float
    b: float

    def __post_init__(self):
        object.__setattr__(self, "anchors2d", np.asarray(self.anchors2d, dtype=np.float64))
        object.__setattr__(self, "theta", np.asarray(self.theta, dtype=np.float64))
        object.__setattr__(self, "sigma_hat", np.asarray(self.sigma_hat, dtype=np.float64))
        if self.anchors2d.ndim != 2 or self.anchors2d.shape[1] != 2:
            raise ParameterError("anchors2d must be n x 2")
        if self.theta.shape[1] != self.anchors2d.shape[0]:
            raise ParameterError("theta must have one column per anchor")
        if np.any(self.sigma_hat <= 0):
            raise ParameterError("sigma_hat must be positive")
        if not (np.all(np.isfinite(self.theta)) and np.all(np.isfinite(self.anchors2d))):
            raise ParameterError("model parameters must be finite")

    @property
    def n(self) -> int:
        return self.anchors2d.shape[0]

    def to_json(self) -> str:
        return json.dumps(
            {
                "anchors2d": self.anchors2d.tolist(),
                "theta": self.theta.tolist(),
                "sigma": self.sigma_hat.tolist(),
                "a": self.a,
                "b": self.b,
            },
            sort_keys=True,
        )

    @staticmethod
    def from_json(text: str) -> "InverseMapModel":
        obj = json.loads(text)
        return InverseMapModel(
            anchors2d=np.asarray(obj["anchors2d"]),
            theta=np.asarray(obj["theta"]),
            sigma_hat=np.asarray(obj["sigma"]),
            a=float(obj["a"]),
            b=float(obj["b"]),
        )


@dataclass(frozen=True)
class TrainingReport:
    iterations: int
    loss_trace: tuple
    warmup_iterations: int
    momentum: float


def merge_duplicate_anchors(model: InverseMapModel, tol: float = 1e-12) -> InverseMapModel:
    """Merge anchors closer than tol, preserving the evaluated function.

    Coincident kernels add their 1/sigma weights, so the merged anchor gets
    the harmonic-sum width and the width-weighted mean column.
    """
    n = model.n
    order = np.lexsort((model.anchors2d[:, 1], model.anchors2d[:, 0]))
    groups: list[list[int]] = []
    for idx in order:
        if groups and np.all(np.abs(model.anchors2d[groups[-1][0]] - model.anchors2d[idx]) <= tol):
            groups[-1].append(idx)
        else:
            groups.append([idx])
    if len(groups) == n:
        return model
    reps = sorted(groups, key=min)
    anchors = np.array([model.anchors2d[g[0]] for g in reps])
    inv_sigma = np.array([np.sum(1.0 / model.sigma_hat[g]) for g in reps])
    theta = np.column_stack([
        (model.theta[:, g] / model.sigma_hat[g]).sum(axis=1) / inv
        for g, inv in zip(reps, inv_sigma)
    ])
    return InverseMapModel(anchors2d=anchors, theta=theta, sigma_hat=1.0 / inv_sigma,
                           a=model.a, b=model.b)


def similarity_weights(anchors2d, sigma_hat, a, b, ys) -> np.ndarray:
    """Normalized weight rows u_i(y) = (w_i(y)/sigma_i) / sum_j (w_j(y)/sigma_j)."""
    ys = np.asarray(ys, dtype=np.float64)
    dx = ys[:, 0:1] - anchors2d[None, :, 0]
    dy = ys[:, 1:2] - anchors2d[None, :, 1]
    with np.errstate(over="ignore"):
        sq = dx * dx + dy * dy
        raw = 1.0 / (1.0 + a * sq**b) / sigma_hat[None, :]
    peak = raw.max(axis=1)
    bad = peak < _UNDERFLOW
    with np.errstate(invalid="ignore"):
        out = raw / raw.sum(axis=1, keepdims=True)
    if np.any(bad):
        # per-row log-space fallback for queries absurdly far from every
        # anchor; row-wise so a batch mate cannot change another row's bits
        with np.errstate(divide="ignore"):
            log_sq = 2.0 * np.log(np.hypot(dx[bad], dy[bad]))  # overflow-safe
            log_t = np.log(a) + b * log_sq
        log_w = -np.logaddexp(0.0, log_t) - np.log(sigma_hat[None, :])
        log_w -= log_w.max(axis=1, keepdims=True)
        w = np.exp(log_w)
        out[bad] = w / w.sum(axis=1, keepdims=True)
    return out


def evaluate_batch(model: InverseMapModel, ys: np.ndarray) -> np.ndarray:
    """Inverse-project rows of ys; each row is a convex combination of columns."""
    ys = np.asarray(ys, dtype=np.float64)
    if ys.ndim != 2 or ys.shape[1] != 2:
        raise ParameterError("ys must be m x 2")
    if not np.all(np.isfinite(ys)):
        raise ParameterError("query points must be finite")
    theta_t = model.theta.T  # n x D
    out = np.empty((ys.shape[0], model.theta.shape[0]))
    for lo in range(0, ys.shape[0], _EVAL_CHUNK):
        u = similarity_weights(model.anchors2d, model.sigma_hat, model.a, model.b,
                               ys[lo : lo + _EVAL_CHUNK])
        # reduction runs over each row's own weights only, so a row's result
        # is identical whether it is evaluated alone or inside a grid batch
        out[lo : lo + _EVAL_CHUNK] = (u[:, :, None] * theta_t[None, :, :]).sum(axis=1)
    return out


def evaluate(model: InverseMapModel, y) -> np.ndarray:
    return evaluate_batch(model, np.asarray(y, dtype=np.float64)[None, :])[0]


def _metric_apply(metrics, mat: np.ndarray) -> np.ndarray:
    """A_i column-wise product; metrics is None (identity) or (n, D) diagonals."""
    if metrics is None:
        return mat
    return metrics.T * mat


def _loss(theta, w_cols, targets, metrics) -> float:
    resid = theta @ w_cols - targets
    return float((resid * _metric_apply(metrics, resid)).sum())


def training_gradient(theta, w_cols, targets, metrics=None) -> np.ndarray:
    """Gradient sum_i A_i (Theta w_i - s_i) w_i^T of the weighted squared error."""
    resid = theta @ w_cols - targets
    return _metric_apply(metrics, resid) @ w_cols.T


def optimal_learning_rate(theta, direction, w_cols, targets, metrics=None) -> float:
    """Exact minimizer of the quadratic loss along -direction.

    eta = sum_i (Theta w_i - s_i)^T A_i (J w_i) / sum_i (J w_i)^T A_i (J w_i),
    returning 0 when the denominator vanishes (converged).
    """
    resid = theta @ w_cols - targets
    jw = direction @ w_cols
    denom = float((jw * _metric_apply(metrics, jw)).sum())
    if denom <= 1e-18:
        return 0.0
    num = float((resid * _metric_apply(metrics, jw)).sum())
    return num / denom


def train(points, coords, a, b, sigma_hat, max_iters: int = 200,
          momentum: float = 0.9, warmup_iters: int = 10, tol: float | None = None,
          metrics=None):
    """Fit anchor columns to (point, embedding) pairs.

    Starts from theta = the points themselves and descends along the
    momentum-filtered gradient with the exact per-step optimal learning
    rate.  The first warmup_iters steps always use the Euclidean metric.
    """
    s = np.asarray(points, dtype=np.float64).T  # D x n targets
    r = np.asarray(coords, dtype=np.float64)
    sigma_hat = np.asarray(sigma_hat, dtype=np.float64)
    if r.ndim != 2 or r.shape[1] != 2 or s.shape[1] != r.shape[0]:
        raise ParameterError("need matching (n x D, n x 2) training pairs")
    if not 0.0 <= momentum < 1.0:
        raise ParameterError("momentum must be in [0, 1)")
    if metrics is not None:
        metrics = np.asarray(metrics, dtype=np.float64)
        if metrics.shape != (r.shape[0], s.shape[0]):
            raise ParameterError("metrics must be (n, D) diagonal entries")
    w_cols = similarity_weights(r, sigma_hat, a, b, r).T  # column i = u(r_i)
    theta = s.copy()
    velocity = np.zeros_like(theta)
    initial = _loss(theta, w_cols, s, metrics)
    if tol is None:
        tol = 1e-8 * initial
    trace = [initial]
    iters = 0
    for it in range(max_iters):
        use_metrics = None if it < warmup_iters else metrics
        grad = training_gradient(theta, w_cols, s, use_metrics)
        if float(np.linalg.norm(grad)) < tol:
            break
        velocity = grad + momentum * velocity
        eta = optimal_learning_rate(theta, velocity, w_cols, s, use_metrics)
        if eta == 0.0:
            break
        theta = theta - eta * velocity
        loss = _loss(theta, w_cols, s, metrics)
        if not np.isfinite(loss):
            raise DivergenceError("training loss became non-finite")
        trace.append(loss)
        iters = it + 1
    model = InverseMapModel(anchors2d=r, theta=theta, sigma_hat=sigma_hat, a=a, b=b)
    report = TrainingReport(iterations=iters, loss_trace=tuple(trace),
                            warmup_iterations=min(warmup_iters, iters), momentum=momentum)
    return model, report


def local_metrics(data: Dataset, f: ClassifierHandle | None, mode: str = "identity"):
    """Per-point metric approximations for training.

    identity returns None (the Euclidean metric).  fisher_diag probes the
    classifier's output sensitivity along each coordinate with central
    differences of the sqrt-JS divergence, squared, floored at 1e-6 and
    capped at 1e6.
    """
    if mode == "identity":
        return None
    if mode != "fisher_diag":
        raise ParameterError(f"unknown metric mode {mode!r}")
    if f is None or not f.is_builtin:
        raise UnsupportedError("fisher_diag metrics need a built-in classifier")
    if data.dim > 64:
        raise ParameterError("fisher_diag metrics are limited to D <= 64")
    h = 1e-3
    n, d = data.n, data.dim
    entries = np.empty((n, d))
    for axis in range(d):
        e = np.zeros(d)
        e[axis] = h
        plus = predict_batch(f, data.points + e)
        minus = predict_batch(f, data.points - e)
        slope = _js_sqrt_rows(plus, minus) / (2.0 * h)
        entries[:, axis] = slope**2
    return np.clip(entries, 1e-6, 1e6)


def sigma_hat_from_graph(graph, dist_values: np.ndarray, coords: np.ndarray) -> np.ndarray:
    """Kernel widths from the embedding calibration.

    The calibrated sigma_i live in squared input-distance units; each is
    rescaled into squared embedding units by the per-point ratio of mean
    kNN distances in the two spaces.
    """
    n = graph.n
    out = np.empty(n)
    fallback = constant_sigma_hat(coords)
    for i in range(n):
        nbrs = graph.knn_indices[i]
        mean_in = dist_values[i, nbrs].mean()
        mean_emb = np.sqrt(((coords[i] - coords[nbrs]) ** 2).sum(axis=1)).mean()
        if mean_in <= 0 or mean_emb <= 0:
            out[i] = fallback
        else:
            out[i] = graph.sigma[i] * (mean_emb / mean_in) ** 2
    return np.maximum(out, 1e-12)


def constant_sigma_hat(coords: np.ndarray) -> float:
    """Median pairwise squared 2D distance; the documented constant fallback."""
    coords = np.asarray(coords, dtype=np.float64)
    diff = coords[:, None, :] - coords[None, :, :]
    sq = (diff**2).sum(axis=-1)
    vals = sq[np.triu_indices(coords.shape[0], k=1)]
    med = float(np.median(vals)) if vals.size else 1.0
    return max(med, 1e-12)
