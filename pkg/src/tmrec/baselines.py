"""Gradient-trained reference models and the popularity ranker.

The feed-forward network is five sigmoid hidden layers of widths
120/110/90/80/70 ending in a softmax; logistic regression is the same
softmax head with no hidden layers.  Both train with plain mini-batch
SGD on mean cross-entropy.  All arithmetic is float64 numpy so that the
finite-difference gradient checks are meaningful.
"""

from __future__ import annotations

import numpy as np

from . import serialize
from .exceptions import (
    DimensionError,
    DivergenceError,
    FormatError,
    MetricError,
    RangeError,
)

DEFAULT_HIDDEN = (120, 110, 90, 80, 70)


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _log_softmax(z):
    shifted = z - z.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


class _LayeredModel:
    """Shared forward/backward machinery for the MLP and LR."""

    kind = ""

    def __init__(self, weights, biases):
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        for w, b in zip(self.weights, self.biases):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise DimensionError("weight/bias shapes do not chain")
        for prev, nxt in zip(self.weights, self.weights[1:]):
            if prev.shape[1] != nxt.shape[0]:
                raise DimensionError("layer widths do not chain")

    @property
    def input_width(self) -> int:
        return self.weights[0].shape[0]

    @property
    def num_classes(self) -> int:
        return self.weights[-1].shape[1]

    @property
    def widths(self) -> list[int]:
        return [self.input_width] + [w.shape[1] for w in self.weights]

    def _as_batch(self, X):
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        if single:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.input_width:
            raise DimensionError(
                f"input width {X.shape} does not match model width {self.input_width}"
            )
        return X, single

    def _activations(self, X):
        acts = [X]
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            acts.append(_sigmoid(acts[-1] @ w + b))
        logits = acts[-1] @ self.weights[-1] + self.biases[-1]
        return acts, logits

    def forward(self, X) -> np.ndarray:
        """Class probability rows (softmax of the final logits)."""
        X, single = self._as_batch(X)
        _, logits = self._activations(X)
        probs = np.exp(_log_softmax(logits))
        return probs[0] if single else probs

    def predict(self, X) -> np.ndarray | int:
        X, single = self._as_batch(X)
        _, logits = self._activations(X)
        pred = logits.argmax(axis=1)
        return int(pred[0]) if single else pred

    def loss(self, X, y) -> float:
        X, _ = self._as_batch(X)
        y = np.asarray(y, dtype=np.int64)
        _, logits = self._activations(X)
        return float(-_log_softmax(logits)[np.arange(len(y)), y].mean())

    def loss_and_grads(self, X, y):
        """Mean cross-entropy plus gradients for every weight and bias."""
        X, _ = self._as_batch(X)
        y = np.asarray(y, dtype=np.int64)
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise DimensionError("labels must be 1-D and match the batch length")
        if y.size and (y.min() < 0 or y.max() >= self.num_classes):
            raise RangeError("label out of range")
        acts, logits = self._activations(X)
        logp = _log_softmax(logits)
        n = X.shape[0]
        loss = float(-logp[np.arange(n), y].mean())
        delta = np.exp(logp)
        delta[np.arange(n), y] -= 1.0
        delta /= n
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        for layer in range(len(self.weights) - 1, -1, -1):
            grads_w[layer] = acts[layer].T @ delta
            grads_b[layer] = delta.sum(axis=0)
            if layer > 0:
                a = acts[layer]
                delta = (delta @ self.weights[layer].T) * a * (1.0 - a)
        return loss, grads_w, grads_b

    def apply_gradients(self, grads_w, grads_b, lr: float) -> None:
        for w, gw in zip(self.weights, grads_w):
            w -= lr * gw
        for b, gb in zip(self.biases, grads_b):
            b -= lr * gb

    # -- persistence ---------------------------------------------------

    def to_bytes(self) -> bytes:
        arrays = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            arrays[f"w{i}"] = w
            arrays[f"b{i}"] = b
        return serialize.dump_container(self.kind, {"layers": len(self.weights)}, arrays)

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def from_bytes(cls, data: bytes):
        kind, meta, arrays = serialize.load_container(data)
        if kind != cls.kind:
            raise FormatError(f"expected a {cls.kind!r} container, got {kind!r}")
        layers = meta["layers"]
        return cls(
            [arrays[f"w{i}"] for i in range(layers)],
            [arrays[f"b{i}"] for i in range(layers)],
        )

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return (
            len(self.weights) == len(other.weights)
            and all(np.array_equal(a, b) for a, b in zip(self.weights, other.weights))
            and all(np.array_equal(a, b) for a, b in zip(self.biases, other.biases))
        )


class MLPModel(_LayeredModel):
    kind = "mlp"


class LRModel(_LayeredModel):
    kind = "lr"

    def __init__(self, weights, biases):
        super().__init__(weights, biases)
        if len(self.weights) != 1:
            raise DimensionError("logistic regression has exactly one layer")


def mlp_init(input_width: int, num_classes: int,
             hidden: tuple[int, ...] = DEFAULT_HIDDEN, seed: int = 0) -> MLPModel:
    """Uniform(+-1/sqrt(fan_in)) weights, zero biases."""
    if input_width < 1 or num_classes < 1:
        raise DimensionError("input_width and num_classes must be >= 1")
    rng = np.random.default_rng(seed)
    widths = [input_width, *hidden, num_classes]
    weights, biases = [], []
    for fan_in, fan_out in zip(widths, widths[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MLPModel(weights, biases)


def lr_init(input_width: int, num_classes: int) -> LRModel:
    if input_width < 1 or num_classes < 1:
        raise DimensionError("input_width and num_classes must be >= 1")
    return LRModel([np.zeros((input_width, num_classes))], [np.zeros(num_classes)])


def train_sgd(model, X, y, lr: float = 0.05, batch_size: int = 64,
              epochs: int = 1, seed: int = 0) -> list[float]:
    """Shuffled mini-batch SGD; returns full-data loss after each epoch."""
    if lr <= 0 or batch_size < 1 or epochs < 0:
        raise RangeError("need lr > 0, batch_size >= 1, epochs >= 0")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    rng = np.random.default_rng(seed)
    curve = []
    for epoch in range(epochs):
        order = rng.permutation(len(X))
        for start in range(0, len(X), batch_size):
            idx = order[start : start + batch_size]
            loss, gw, gb = model.loss_and_grads(X[idx], y[idx])
            if not np.isfinite(loss):
                raise DivergenceError(epoch + 1)
            model.apply_gradients(gw, gb, lr)
        epoch_loss = model.loss(X, y)
        if not np.isfinite(epoch_loss):
            raise DivergenceError(epoch + 1)
        curve.append(epoch_loss)
    return curve


def input_weight_sums(model: _LayeredModel) -> np.ndarray:
    """Per input feature, the sum of its outgoing first-layer weights."""
    return model.weights[0].sum(axis=1)


class PopularityModel:
    """Recommends the training-popularity ranking to every user."""

    kind = "popularity"

    def __init__(self, ranking):
        self.ranking = [int(c) for c in ranking]
        if len(set(self.ranking)) != len(self.ranking):
            raise MetricError("popularity ranking contains duplicates")

    def rank_classes(self, x=None, k: int | None = None) -> np.ndarray:
        k = len(self.ranking) if k is None else k
        if not 1 <= k <= len(self.ranking):
            raise RangeError(f"k={k} out of range")
        return np.asarray(self.ranking[:k], dtype=np.int64)

    def predict(self, X) -> np.ndarray:
        n = 1 if np.asarray(X).ndim == 1 else len(X)
        return np.full(n, self.ranking[0], dtype=np.int64)

    def to_bytes(self) -> bytes:
        return serialize.dump_container(
            self.kind, {}, {"ranking": np.asarray(self.ranking, dtype=np.int64)}
        )

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def from_bytes(cls, data: bytes) -> "PopularityModel":
        kind, _, arrays = serialize.load_container(data)
        if kind != cls.kind:
            raise FormatError(f"expected a {cls.kind!r} container, got {kind!r}")
        return cls(arrays["ranking"].tolist())

    @classmethod
    def load(cls, path) -> "PopularityModel":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())

    def __eq__(self, other):
        if not isinstance(other, PopularityModel):
            return NotImplemented
        return self.ranking == other.ranking
