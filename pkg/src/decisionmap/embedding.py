"""UMAP-style 2D projection driven by a precomputed distance matrix.

High-dimensional edge weights use squared distances offset by the nearest
neighbor: v_{i|j} = exp(-max(d_ij^2 - rho_i, 0) / sigma_i), with sigma_i
calibrated per point so the weights over the k nearest neighbors sum to
log2(k).  Directed weights are symmetrized with the sum t-conorm
x + y - xy.  The 2D layout w_ij = (1 + a ||r_i - r_j||^(2b))^-1 is fitted
by maximizing the fuzzy-set log likelihood with negative sampling.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit

from .errors import FitError, ParameterError
from .fisher_metric import DistanceMatrix

log = logging.getLogger(__name__)

SIGMA_LO = 1e-6
SIGMA_HI = 1e3
SIGMA_EXPANSIONS = 10
GRAD_CLIP = 4.0
NEGATIVE_SAMPLES = 5
INIT_SCALE = 10.0


@dataclass(frozen=True)
class UmapParams:
    k: int = 15
    epochs: int = 500
    seed: int = 0
    min_dist: float = 0.1
    spread: float = 1.0


@dataclass(frozen=True, eq=False)
class FuzzyGraph:
    n: int
    k_neighbors: int
    rho: np.ndarray          # squared distance to the nearest neighbor
    sigma: np.ndarray        # calibrated bandwidths, squared-distance units
    heads: np.ndarray        # edge endpoints, one entry per unordered pair
    tails: np.ndarray
    weights: np.ndarray      # symmetrized v_ij in (0, 1]
    knn_indices: np.ndarray  # n x k neighbor ids used during calibration

    @property
    def edges(self):
        return list(zip(self.heads.tolist(), self.tails.tolist(), self.weights.tolist()))


@dataclass(frozen=True, eq=False)
class EmbeddingModel:
    coords: np.ndarray
    a: float
    b: float
    graph: FuzzyGraph
    rng_seed: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "coords": self.coords.tolist(),
                "a": self.a,
                "b": self.b,
                "seed": self.rng_seed,
                "k": self.graph.k_neighbors,
            },
            sort_keys=True,
        )


def _smooth_knn_sigma(sq_offsets: np.ndarray, target: float):
    """Bisection for sigma with sum(exp(-max(sq_offsets, 0)/sigma)) = target.

    Returns (sigma, hit_bound).  The sum is monotone increasing in sigma; the
    upper bracket is doubled a few times when the target is unreachable.
    """
    pos = np.maximum(sq_offsets, 0.0)

    def weight_sum(sigma):
        return float(np.exp(-pos / sigma).sum())

    lo, hi = SIGMA_LO, SIGMA_HI
    for _ in range(SIGMA_EXPANSIONS):
        if weight_sum(hi) >= target:
            break
        hi *= 2.0
    if weight_sum(hi) < target:
        return hi, True
    if weight_sum(lo) > target:
        return lo, True
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        s = weight_sum(mid)
        if abs(s - target) < 1e-5:
            return mid, False
        if s > target:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi), False


def calibrate(dist: DistanceMatrix, k: int = 15) -> FuzzyGraph:
    """Per-point bandwidth calibration and t-conorm symmetrization."""
    n = dist.n
    if not 2 <= k < n:
        raise ParameterError(f"k must satisfy 2 <= k < n, got k={k}, n={n}")
    values = dist.values
    rho = np.empty(n)
    sigma = np.empty(n)
    knn = np.empty((n, k), dtype=np.int64)
    directed = np.empty((n, k))
    target = np.log2(k)
    for i in range(n):
        order = np.argsort(values[i], kind="stable")
        nbrs = order[order != i][:k]
        knn[i] = nbrs
        sq = values[i, nbrs] ** 2
        rho[i] = sq.min()
        sigma[i], hit_bound = _smooth_knn_sigma(sq - rho[i], target)
        if hit_bound:
            log.warning("sigma search hit its bracket bound at point %d", i)
        directed[i] = np.exp(-np.maximum(sq - rho[i], 0.0) / sigma[i])
    pair_v: dict[tuple[int, int], float] = {}
    for i in range(n):
        for j_pos in range(k):
            j = int(knn[i, j_pos])
            key = (i, j) if i < j else (j, i)
            v = directed[i, j_pos]
            if key in pair_v:
                prev = pair_v[key]
                pair_v[key] = prev + v - prev * v
            else:
                pair_v[key] = v
    items = sorted(pair_v.items())
    heads = np.array([ij[0] for ij, _ in items], dtype=np.int64)
    tails = np.array([ij[1] for ij, _ in items], dtype=np.int64)
    weights = np.array([v for _, v in items])
    return FuzzyGraph(n=n, k_neighbors=k, rho=rho, sigma=sigma,
                      heads=heads, tails=tails, weights=weights, knn_indices=knn)


def fit_ab(min_dist: float, spread: float, fix_b: bool = False):
    """Fit (1 + a t^(2b))^-1 to the piecewise exponential falloff curve.

    The target is 1 for t <= min_dist and exp(-(t - min_dist)/spread) beyond,
    sampled at 300 points on [0, 3*spread].
    """
    if not 0 < min_dist < spread:
        raise ParameterError("require 0 < min_dist < spread")
    t = np.linspace(0.0, 3.0 * spread, 300)
    y = np.where(t <= min_dist, 1.0, np.exp(-(t - min_dist) / spread))
    try:
        if fix_b:
            (a,), _ = curve_fit(lambda tt, a: 1.0 / (1.0 + a * tt**2), t, y,
                                p0=[1.0], maxfev=1000)
            return float(a), 1.0
        (a, b), _ = curve_fit(lambda tt, a, b: 1.0 / (1.0 + a * tt ** (2 * b)), t, y,
                              p0=[1.0, 1.0], maxfev=1000)
    except RuntimeError as exc:
        raise FitError(f"a/b curve fit did not converge: {exc}")
    return float(a), float(b)


def edge_cross_entropy(r_i, r_j, v: float, a: float, b: float) -> float:
    """Per-edge fuzzy cross entropy -[v ln w + (1-v) ln(1-w)]."""
    u = float(((np.asarray(r_i) - np.asarray(r_j)) ** 2).sum())
    w = 1.0 / (1.0 + a * u**b)
    term = v * np.log(w)
    if v < 1.0:
        term += (1.0 - v) * np.log(max(1.0 - w, 1e-300))
    return -float(term)


def edge_gradient(r_i, r_j, v: float, a: float, b: float) -> np.ndarray:
    """Gradient of edge_cross_entropy w.r.t. r_i (w.r.t. r_j is its negation)."""
    diff = np.asarray(r_i, dtype=np.float64) - np.asarray(r_j, dtype=np.float64)
    u = float((diff**2).sum())
    if u == 0.0:
        return np.zeros_like(diff)
    attract = 2.0 * a * b * u ** (b - 1.0) / (1.0 + a * u**b)
    repulse = 2.0 * b / (u * (1.0 + a * u**b))
    return (v * attract - (1.0 - v) * repulse) * diff


def optimize(graph: FuzzyGraph, a: float, b: float, epochs: int = 500,
             seed: int = 0, init: str = "random") -> EmbeddingModel:
    """Negative-sampling layout optimization, deterministic given the seed.

    Each epoch applies an attractive update to every edge with probability
    proportional to its weight, plus NEGATIVE_SAMPLES repulsive updates
    against uniformly sampled points; the learning rate decays linearly to 0.
    """
    if graph.weights.size == 0:
        raise ParameterError("graph has no edges")
    # spectral init is out of scope; its enum literal falls back to random
    if init not in ("random", "spectral_fallback_random"):
        raise ParameterError(f"unknown init {init!r}")
    if epochs < 0:
        raise ParameterError("epochs must be nonnegative")
    rng = np.random.default_rng(seed)
    coords = rng.normal(0.0, INIT_SCALE, size=(graph.n, 2))
    heads, tails, w = graph.heads, graph.tails, graph.weights
    p_edge = w / w.max()
    for epoch in range(epochs):
        lr = 1.0 - epoch / epochs
        active = rng.random(w.size) < p_edge
        hi, ti = heads[active], tails[active]
        diff = coords[hi] - coords[ti]
        u = (diff**2).sum(axis=1)
        safe_u = np.maximum(u, 1e-12)
        attract = -2.0 * a * b * safe_u ** (b - 1.0) / (1.0 + a * safe_u**b)
        g = np.clip(attract[:, None] * diff, -GRAD_CLIP, GRAD_CLIP)
        np.add.at(coords, hi, lr * g)
        np.add.at(coords, ti, -lr * g)
        neg = rng.integers(0, graph.n, size=(hi.size, NEGATIVE_SAMPLES))
        for s in range(NEGATIVE_SAMPLES):
            nj = neg[:, s]
            # a draw that hits either endpoint of the positive edge is skipped
            keep = (nj != hi) & (nj != ti)
            diff = coords[hi] - coords[nj]
            u = (diff**2).sum(axis=1)
            rep = 2.0 * b / ((0.001 + u) * (1.0 + a * np.maximum(u, 1e-12) ** b))
            g = np.clip(rep[:, None] * diff, -GRAD_CLIP, GRAD_CLIP)
            np.add.at(coords, hi, np.where(keep[:, None], lr * g, 0.0))
    if not np.all(np.isfinite(coords)):
        raise ParameterError("optimization produced non-finite coordinates")
    return EmbeddingModel(coords=coords, a=a, b=b, graph=graph, rng_seed=seed)


def project(data_or_dist, f=None, metric_config=None,
            params: UmapParams = UmapParams()) -> EmbeddingModel:
    """distance_matrix -> calibrate -> fit_ab -> optimize.

    Accepts either a precomputed DistanceMatrix or a Dataset together with a
    classifier handle and metric config.
    """
    from .classifier import ClassifierHandle

    if f is not None and not isinstance(f, ClassifierHandle):
        raise ParameterError("second argument must be a classifier handle")
    if isinstance(data_or_dist, DistanceMatrix):
        dist = data_or_dist
    else:
        from .fisher_metric import FisherMetricConfig, distance_matrix

        if f is None:
            raise ParameterError("projecting a raw dataset needs a classifier")
        dist = distance_matrix(data_or_dist, f, metric_config or FisherMetricConfig())
    graph = calibrate(dist, k=params.k)
    a, b = fit_ab(params.min_dist, params.spread)
    return optimize(graph, a, b, epochs=params.epochs, seed=params.seed)
