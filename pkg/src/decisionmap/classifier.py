"""Probabilistic classifier abstraction f : R^D -> P(C).

Two built-in differentiable classifiers (multinomial logistic regression and
a small tanh MLP, both trained by seeded full-batch gradient descent), plus
an adapter that proxies predictions to an external process over newline
delimited JSON (subprocess stdio) or HTTP POST /predict.
"""

from __future__ import annotations

import hashlib
import json
import shlex
import subprocess
import threading
from dataclasses import dataclass, field

import numpy as np

from .datasets import Dataset
from .errors import (
    BackendError,
    DegenerateLabelsError,
    DimensionError,
    ParameterError,
    UnsupportedError,
)

PROB_FLOOR = 1e-12

# rows per internal forward chunk; keeps the broadcasted affine bounded in memory
_FORWARD_CHUNK = 8192


def clean_probs(p: np.ndarray) -> np.ndarray:
    """Clamp probabilities to [1e-12, 1] and renormalize.

    Applied before every logarithm in the system so that saturated softmax
    outputs never produce NaN in KL/JS/entropy computations.
    """
    p = np.clip(np.asarray(p, dtype=np.float64), PROB_FLOOR, 1.0)
    return p / p.sum(axis=-1, keepdims=True)


def _affine(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    # Each output element reduces over its own fan-in slice only, so the
    # result of a row never depends on which other rows share the batch.
    return (x[:, :, None] * w[None, :, :]).sum(axis=1) + b


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _forward(layers, points: np.ndarray) -> np.ndarray:
    out = np.empty((points.shape[0], layers[-1][0].shape[1]))
    for lo in range(0, points.shape[0], _FORWARD_CHUNK):
        h = points[lo : lo + _FORWARD_CHUNK]
        for w, b in layers[:-1]:
            h = np.tanh(_affine(h, w, b))
        out[lo : lo + _FORWARD_CHUNK] = _softmax_rows(_affine(h, *layers[-1]))
    return out


@dataclass(frozen=True, eq=False)
class ClassifierHandle:
    """Immutable handle; safe for concurrent predict calls."""

    class_count: int
    kind: str  # softmax_linear | mlp | external
    batch_limit: int
    dim: int
    layers: tuple = None  # ((W, b), ...) for built-in kinds
    transport: object = None  # wire transport for kind == external
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def predict(self, points: np.ndarray) -> np.ndarray:
        return predict_batch(self, points)

    @property
    def is_builtin(self) -> bool:
        return self.kind in ("softmax_linear", "mlp")

    def fingerprint(self) -> str:
        h = hashlib.sha256(self.kind.encode())
        h.update(str(self.class_count).encode())
        if self.layers is not None:
            for w, b in self.layers:
                h.update(np.ascontiguousarray(w).tobytes())
                h.update(np.ascontiguousarray(b).tobytes())
        if self.transport is not None:
            h.update(repr(self.transport).encode())
        return h.hexdigest()[:16]

    def to_json(self) -> str:
        if not self.is_builtin:
            raise UnsupportedError("external handles cannot be serialized")
        return json.dumps(
            {
                "kind": self.kind,
                "class_count": self.class_count,
                "dim": self.dim,
                "batch_limit": self.batch_limit,
                "layers": [[w.tolist(), b.tolist()] for w, b in self.layers],
            },
            sort_keys=True,
        )

    @staticmethod
    def from_json(text: str) -> "ClassifierHandle":
        obj = json.loads(text)
        layers = tuple(
            (np.asarray(w, dtype=np.float64), np.asarray(b, dtype=np.float64))
            for w, b in obj["layers"]
        )
        return ClassifierHandle(
            class_count=int(obj["class_count"]),
            kind=obj["kind"],
            batch_limit=int(obj["batch_limit"]),
            dim=int(obj["dim"]),
            layers=layers,
        )


def predict_batch(handle: ClassifierHandle, points: np.ndarray) -> np.ndarray:
    """Row-stochastic m x C matrix of class probabilities."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[None, :]
    if points.ndim != 2 or points.shape[1] != handle.dim:
        raise DimensionError(
            f"expected points of dimension {handle.dim}, got shape {points.shape}"
        )
    if not np.all(np.isfinite(points)):
        raise DimensionError("points contain NaN or Inf")
    if handle.is_builtin:
        return _forward(handle.layers, points)
    out = np.empty((points.shape[0], handle.class_count))
    with handle._lock:  # wire requests are serialized
        for lo in range(0, points.shape[0], handle.batch_limit):
            chunk = points[lo : lo + handle.batch_limit]
            reply = handle.transport.request(
                {"op": "predict", "points": chunk.tolist()}
            )
            probs = _validate_probs_payload(reply, chunk.shape[0], handle.class_count)
            out[lo : lo + chunk.shape[0]] = probs
    return out


def _validate_probs_payload(reply, m: int, c: int) -> np.ndarray:
    if not isinstance(reply, dict) or "probs" not in reply:
        raise BackendError("backend reply missing 'probs'", payload=reply)
    try:
        probs = np.asarray(reply["probs"], dtype=np.float64)
    except (TypeError, ValueError):
        raise BackendError("backend 'probs' not numeric", payload=reply)
    if probs.shape != (m, c) or not np.all(np.isfinite(probs)):
        raise BackendError(
            f"backend 'probs' must be finite {m}x{c}, got shape {probs.shape}",
            payload=reply,
        )
    return probs


def _cross_entropy(probs: np.ndarray, labels: np.ndarray) -> float:
    p = clean_probs(probs)
    return float(-np.log(p[np.arange(len(labels)), labels]).mean())


def _check_training_data(data: Dataset) -> int:
    if data.labels is None:
        raise ParameterError("training requires labels")
    classes = int(data.labels.max()) + 1
    if len(np.unique(data.labels)) < 2:
        raise DegenerateLabelsError("training data contains a single class")
    if data.n < classes:
        raise ParameterError("need at least one point per class")
    return classes


def _gd_train(layers, data: Dataset, epochs: int, learning_rate: float):
    """Full-batch gradient descent on cross-entropy.

    The learning rate is halved (and the step retried) whenever a step would
    increase the loss, so the loss trace is non-increasing.
    """
    x, labels = data.points, data.labels
    n = x.shape[0]
    onehot = np.zeros((n, layers[-1][0].shape[1]))
    onehot[np.arange(n), labels] = 1.0
    lr = float(learning_rate)
    loss = _cross_entropy(_forward(layers, x), labels)
    for _ in range(int(epochs)):
        # forward with cached activations
        acts = [x]
        h = x
        for w, b in layers[:-1]:
            h = np.tanh(h @ w + b)
            acts.append(h)
        probs = _softmax_rows(acts[-1] @ layers[-1][0] + layers[-1][1])
        # backprop
        delta = (probs - onehot) / n
        grads = []
        for li in range(len(layers) - 1, -1, -1):
            grads.append((acts[li].T @ delta, delta.sum(axis=0)))
            if li > 0:
                delta = (delta @ layers[li][0].T) * (1.0 - acts[li] ** 2)
        grads.reverse()
        for _halving in range(64):
            trial = [
                (w - lr * gw, b - lr * gb) for (w, b), (gw, gb) in zip(layers, grads)
            ]
            trial_loss = _cross_entropy(_forward(trial, x), labels)
            if trial_loss <= loss:
                layers, loss = trial, trial_loss
                break
            lr *= 0.5
    return layers


def train_softmax(data: Dataset, epochs: int = 300, learning_rate: float = 1.0,
                  seed: int = 0) -> ClassifierHandle:
    """Multinomial logistic regression from a zero initialization."""
    classes = _check_training_data(data)
    layers = [(np.zeros((data.dim, classes)), np.zeros(classes))]
    layers = _gd_train(layers, data, epochs, learning_rate)
    return ClassifierHandle(
        class_count=classes,
        kind="softmax_linear",
        batch_limit=1 << 20,
        dim=data.dim,
        layers=tuple(layers),
    )


def train_mlp(data: Dataset, hidden_sizes=(16,), epochs: int = 1000,
              learning_rate: float = 0.5, seed: int = 0) -> ClassifierHandle:
    """One or two tanh hidden layers + softmax head, seeded init in +-1/sqrt(fan_in)."""
    if len(hidden_sizes) == 0:
        return train_softmax(data, epochs=epochs, learning_rate=learning_rate, seed=seed)
    if len(hidden_sizes) > 2:
        raise ParameterError("at most two hidden layers are supported")
    classes = _check_training_data(data)
    rng = np.random.default_rng(seed)
    sizes = [data.dim, *hidden_sizes, classes]
    layers = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        layers.append((rng.uniform(-bound, bound, size=(fan_in, fan_out)), np.zeros(fan_out)))
    layers = _gd_train(layers, data, epochs, learning_rate)
    return ClassifierHandle(
        class_count=classes,
        kind="mlp",
        batch_limit=1 << 20,
        dim=data.dim,
        layers=tuple(layers),
    )


def input_gradient(handle: ClassifierHandle, x: np.ndarray, true_label: int) -> np.ndarray:
    """Gradient of the cross-entropy loss w.r.t. the input, by backpropagation."""
    if not handle.is_builtin:
        raise UnsupportedError("input gradients need a built-in classifier")
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (handle.dim,):
        raise DimensionError(f"expected a vector of dimension {handle.dim}")
    if not 0 <= int(true_label) < handle.class_count:
        raise ParameterError("true_label out of range")
    acts = [x[None, :]]
    h = acts[0]
    for w, b in handle.layers[:-1]:
        h = np.tanh(h @ w + b)
        acts.append(h)
    probs = _softmax_rows(h @ handle.layers[-1][0] + handle.layers[-1][1])
    delta = probs.copy()
    delta[0, int(true_label)] -= 1.0
    for li in range(len(handle.layers) - 1, -1, -1):
        delta = delta @ handle.layers[li][0].T
        if li > 0:
            delta = delta * (1.0 - acts[li] ** 2)
    return delta[0]


def fgsm(handle: ClassifierHandle, x: np.ndarray, true_label: int,
         epsilon: float) -> np.ndarray:
    """x + epsilon * sign(grad); stays inside the inf-norm ball of radius epsilon."""
    if epsilon < 0:
        raise ParameterError("epsilon must be nonnegative")
    grad = input_gradient(handle, x, true_label)
    x = np.asarray(x, dtype=np.float64)
    adv = x + epsilon * np.sign(grad)
    # x + eps - x can round one ulp past eps; walk offenders back so the
    # measured inf-norm displacement never exceeds eps
    over = np.abs(adv - x) > epsilon
    while np.any(over):
        adv = np.where(over, np.nextafter(adv, x), adv)
        over = np.abs(adv - x) > epsilon
    return adv


class _StdioTransport:
    """Newline-delimited JSON over a child process's stdin/stdout."""

    def __init__(self, command: str):
        self.command = command
        self.proc = subprocess.Popen(
            shlex.split(command),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
        )

    def request(self, obj: dict) -> dict:
        try:
            self.proc.stdin.write(json.dumps(obj) + "\n")
            self.proc.stdin.flush()
            line = self.proc.stdout.readline()
        except (BrokenPipeError, OSError) as exc:
            raise BackendError(f"backend process I/O failed: {exc}")
        if not line:
            raise BackendError("backend process closed its stdout", payload=line)
        try:
            return json.loads(line)
        except json.JSONDecodeError:
            raise BackendError("backend reply is not valid JSON", payload=line)

    def close(self):
        try:
            self.proc.stdin.close()
            self.proc.wait(timeout=5)
        except Exception:
            self.proc.kill()

    def __repr__(self):
        return f"_StdioTransport({self.command!r})"


class _HttpTransport:
    def __init__(self, url: str):
        self.url = url if url.rstrip("/").endswith("/predict") else url.rstrip("/") + "/predict"

    def request(self, obj: dict) -> dict:
        import requests

        try:
            resp = requests.post(self.url, json=obj, timeout=60)
        except requests.RequestException as exc:
            raise BackendError(f"backend HTTP request failed: {exc}")
        if resp.status_code != 200:
            raise BackendError(f"backend HTTP status {resp.status_code}", payload=resp.text)
        try:
            return resp.json()
        except ValueError:
            raise BackendError("backend reply is not valid JSON", payload=resp.text)

    def close(self):
        pass

    def __repr__(self):
        return f"_HttpTransport({self.url!r})"


def external_connect(command_or_url: str, class_count: int,
                     batch_limit: int = 256) -> ClassifierHandle:
    """Connect to an external classifier and verify the {"op":"info"} handshake."""
    if batch_limit < 1:
        raise ParameterError("batch_limit must be >= 1")
    if command_or_url.startswith(("http://", "https://")):
        transport = _HttpTransport(command_or_url)
    else:
        transport = _StdioTransport(command_or_url)
    info = transport.request({"op": "info"})
    if not isinstance(info, dict) or "classes" not in info or "dim" not in info:
        raise BackendError("handshake reply missing 'classes'/'dim'", payload=info)
    if int(info["classes"]) != class_count:
        raise BackendError(
            f"backend declares {info['classes']} classes, handle expects {class_count}",
            payload=info,
        )
    return ClassifierHandle(
        class_count=int(class_count),
        kind="external",
        batch_limit=int(batch_limit),
        dim=int(info["dim"]),
        transport=transport,
    )
