"""Quality scores for a decision map and hyperparameter selection rules.

q_knn measures how well the 2D layout reflects the classifier's labeling
(leave-one-out 5-NN agreement); q_d and q_nd measure inverse-projection
fidelity on training pairs and on held-out pairs respectively.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .classifier import ClassifierHandle, predict_batch
from .errors import ParameterError
from . import inverse_map


@dataclass(frozen=True)
class QualityReport:
    q_knn: float
    q_d: float
    q_nd: float
    q_knn_eucl: float | None = None
    k: int = 5
    split_fraction: float = 0.7
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "q_knn": self.q_knn,
            "q_knn_eucl": self.q_knn_eucl,
            "q_d": self.q_d,
            "q_nd": self.q_nd,
            "k": self.k,
            "split_fraction": self.split_fraction,
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def q_knn(coords: np.ndarray, labels: np.ndarray, k: int = 5) -> float:
    """Leave-one-out k-NN agreement rate in the 2D layout.

    Distance ties prefer the lower point index; vote ties prefer the
    smallest label, so the score is reproducible under permutations.
    """
    coords = np.asarray(coords, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n = coords.shape[0]
    if n <= k:
        raise ParameterError("need more points than neighbors")
    diff = coords[:, None, :] - coords[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=-1))
    hits = 0
    idx = np.arange(n)
    for i in range(n):
        order = np.lexsort((idx, dist[i]))
        nbrs = order[order != i][:k]
        votes = np.bincount(labels[nbrs])
        winner = int(np.flatnonzero(votes == votes.max())[0])
        hits += winner == labels[i]
    return hits / n


def q_d(points: np.ndarray, coords: np.ndarray, model: inverse_map.InverseMapModel,
        f: ClassifierHandle) -> float:
    """Fraction of pairs where f(pi_inv(r_i)) agrees with f(s_i)."""
    back = inverse_map.evaluate_batch(model, np.asarray(coords, dtype=np.float64))
    pred_back = predict_batch(f, back).argmax(axis=1)
    pred_orig = predict_batch(f, np.asarray(points, dtype=np.float64)).argmax(axis=1)
    return float((pred_back == pred_orig).mean())


def q_nd(points: np.ndarray, coords: np.ndarray, f: ClassifierHandle,
         a: float, b: float, sigma_hat: np.ndarray, split_fraction: float = 0.7,
         seed: int = 0, train_kwargs: dict | None = None) -> float:
    """Held-out inverse fidelity: retrain on a split, score the rest."""
    points = np.asarray(points, dtype=np.float64)
    coords = np.asarray(coords, dtype=np.float64)
    sigma_hat = np.asarray(sigma_hat, dtype=np.float64)
    n = points.shape[0]
    n_train = int(round(split_fraction * n))
    if not 1 <= n_train < n:
        raise ParameterError("split leaves an empty train or held-out set")
    perm = np.random.default_rng(seed).permutation(n)
    tr, held = perm[:n_train], perm[n_train:]
    model, _ = inverse_map.train(points[tr], coords[tr], a=a, b=b,
                                 sigma_hat=sigma_hat[tr], **(train_kwargs or {}))
    return q_d(points[held], coords[held], model, f)


def select_lambda(candidates, evaluate_q_knn, tolerance: float = 0.02,
                  workers: int | None = None) -> float:
    """Largest regularization whose q_knn stays within tolerance of the best.

    candidates must be in descending order; each candidate's pipeline run is
    independent and seeded, so they may evaluate concurrently.
    """
    candidates = list(candidates)
    if not candidates:
        raise ParameterError("need at least one candidate")
    if any(b >= a for a, b in zip(candidates, candidates[1:])):
        raise ParameterError("candidates must be strictly descending")
    scores = _evaluate_all(candidates, evaluate_q_knn, workers)
    best = max(scores)
    for lam, score in zip(candidates, scores):
        if score >= best - tolerance:
            return lam
    return candidates[-1]


def select_a(candidates, evaluate_q_d, tolerance: float = 0.02,
             workers: int | None = None) -> float:
    """Smallest kernel sharpness whose q_d stays within tolerance of the best."""
    candidates = list(candidates)
    if not candidates:
        raise ParameterError("need at least one candidate")
    if any(b <= a for a, b in zip(candidates, candidates[1:])):
        raise ParameterError("candidates must be strictly ascending")
    scores = _evaluate_all(candidates, evaluate_q_d, workers)
    best = max(scores)
    for a, score in zip(candidates, scores):
        if score >= best - tolerance:
            return a
    return candidates[-1]


def _evaluate_all(candidates, fn, workers):
    if workers is None:
        workers = min(len(candidates), 4)
    if workers <= 1 or len(candidates) == 1:
        return [fn(c) for c in candidates]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, candidates))


def scale_free_lambda_grid(js_distances: np.ndarray, eucl_distances: np.ndarray,
                           base=(10, 5, 2, 1, 0.5, 0.2, 0.1, 0.05)) -> list[float]:
    """Descending candidate grid scaled by median(sqrt-JS) / median(Euclidean)."""
    js_med = float(np.median(js_distances))
    eucl_med = float(np.median(eucl_distances))
    if eucl_med <= 0:
        raise ParameterError("degenerate point set: zero median distance")
    ratio = js_med / eucl_med if js_med > 0 else 1.0 / eucl_med
    return [float(b) * ratio for b in base]


DEFAULT_A_GRID = (0.1, 0.3, 1.0, 3.0, 10.0)
