"""Dataset container, synthetic generators, and CSV round-trip.

CSV format: header row, float feature columns, optional trailing integer
``label`` column.  A sidecar ``<path>.meta.json`` may declare
``{"image_shape": [h, w, channels]}`` so probes can be rendered as images.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParameterError


@dataclass
class Dataset:
    points: np.ndarray
    labels: np.ndarray | None = None
    feature_names: list[str] | None = None
    image_shape: tuple[int, int, int] | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim != 2 or self.points.shape[0] < 1 or self.points.shape[1] < 1:
            raise ParameterError("points must be a non-empty n x D matrix")
        if not np.all(np.isfinite(self.points)):
            raise ParameterError("points contain NaN or Inf")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (self.points.shape[0],):
                raise ParameterError("labels must be one integer per point")
            if np.any(self.labels < 0):
                raise ParameterError("labels must be nonnegative")
        if self.feature_names is not None and len(self.feature_names) != self.points.shape[1]:
            raise ParameterError("feature_names must have one entry per column")

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def make_blobs(n: int, classes: int = 3, dim: int = 10, center_spread: float = 6.0,
               noise: float = 1.0, seed: int = 0) -> Dataset:
    """Gaussian blobs, one per class, with deterministic seeded centers."""
    if classes < 2 or n < classes:
        raise ParameterError("need at least 2 classes and n >= classes")
    rng = np.random.default_rng(seed)
    centers = rng.normal(0.0, center_spread, size=(classes, dim))
    counts = [n // classes + (1 if c < n % classes else 0) for c in range(classes)]
    points = np.vstack([
        centers[c] + rng.normal(0.0, noise, size=(counts[c], dim)) for c in range(classes)
    ])
    labels = np.concatenate([np.full(counts[c], c, dtype=np.int64) for c in range(classes)])
    return Dataset(points, labels)


def make_xor(n: int = 200, noise: float = 0.25, seed: int = 0) -> Dataset:
    """Four 2D clusters at (+-1, +-1); label 1 when the corner signs agree."""
    rng = np.random.default_rng(seed)
    corners = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]], dtype=np.float64)
    counts = [n // 4 + (1 if c < n % 4 else 0) for c in range(4)]
    points = np.vstack([
        corners[c] + rng.normal(0.0, noise, size=(counts[c], 2)) for c in range(4)
    ])
    labels = np.concatenate([
        np.full(counts[c], 1 if corners[c, 0] * corners[c, 1] > 0 else 0, dtype=np.int64)
        for c in range(4)
    ])
    return Dataset(points, labels)


def load_csv(path: str | Path) -> Dataset:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader if row]
    if not rows:
        raise ParameterError(f"{path}: no data rows")
    has_labels = header[-1].strip().lower() == "label"
    feat_names = header[:-1] if has_labels else header
    points = np.array([[float(v) for v in row[: len(feat_names)]] for row in rows])
    labels = np.array([int(float(row[-1])) for row in rows], dtype=np.int64) if has_labels else None
    image_shape = None
    meta = path.with_name(path.name + ".meta.json")
    if meta.exists():
        info = json.loads(meta.read_text())
        if "image_shape" in info:
            image_shape = tuple(int(v) for v in info["image_shape"])
    return Dataset(points, labels, feature_names=list(feat_names), image_shape=image_shape)


def save_csv(path: str | Path, data: Dataset) -> None:
    path = Path(path)
    names = data.feature_names or [f"f{i}" for i in range(data.dim)]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(names) + (["label"] if data.labels is not None else []))
        for i in range(data.n):
            row = [repr(float(v)) for v in data.points[i]]
            if data.labels is not None:
                row.append(int(data.labels[i]))
            writer.writerow(row)
    if data.image_shape is not None:
        meta = path.with_name(path.name + ".meta.json")
        meta.write_text(json.dumps({"image_shape": list(data.image_shape)}))
