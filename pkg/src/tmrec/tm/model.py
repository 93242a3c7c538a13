"""Multi-class Tsetlin Machine.

A model is one clause bank per class.  Every clause is a conjunction
over literals (each input feature and its negation); each literal is
steered by a two-action automaton whose integer state decides whether
the literal is included.  Even-indexed clauses vote for their class,
odd-indexed ones against; prediction is the argmax of the vote sums.

Training gives the target class's bank reinforcement on its voting
clauses (growing patterns that match the input) and penalty on its
opposing clauses, and does the reverse for one randomly sampled
non-target class.  Feedback intensity is controlled by the vote-clamp
threshold and the specificity parameter; see `train_epoch`.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .. import rng, serialize
from ..exceptions import ConfigError, DimensionError, FormatError, RangeError
from . import backends

MODEL_KIND = "tm"


@dataclass(frozen=True)
class TMConfig:
    """Sizing and training hyperparameters.

    threshold defaults to 15 scaled by clauses_per_class / 200 (at least 1);
    states_per_action is the depth of each automaton half-range.
    """

    num_features: int
    num_classes: int = 400
    clauses_per_class: int = 200
    threshold: int | None = None
    specificity: float = 3.9
    states_per_action: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.threshold is None:
            object.__setattr__(
                self, "threshold", max(1, round(15 * self.clauses_per_class / 200))
            )
        if self.num_features < 1:
            raise ConfigError("num_features must be >= 1")
        if self.num_classes < 1:
            raise ConfigError("num_classes must be >= 1")
        if self.clauses_per_class < 2 or self.clauses_per_class % 2 != 0:
            raise ConfigError("clauses_per_class must be a positive even integer")
        if self.threshold < 1:
            raise ConfigError("threshold must be >= 1")
        if not self.specificity > 1.0:
            raise ConfigError("specificity must be > 1")
        if not 1 <= self.states_per_action <= 16383:
            raise ConfigError("states_per_action must be in [1, 16383]")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")

    @property
    def num_literals(self) -> int:
        return 2 * self.num_features


@dataclass
class EpochStats:
    examples: int
    type_i_events: int
    type_ii_events: int

    @property
    def feedback_events(self) -> int:
        return self.type_i_events + self.type_ii_events


@dataclass
class TrainedEpoch:
    """One `fit` epoch: stats plus optional train accuracy."""

    epoch: int
    stats: EpochStats
    train_accuracy: float | None = None


def literal_name(literal: int, num_features: int, feature_names=None) -> str:
    if not 0 <= literal < 2 * num_features:
        raise RangeError(f"literal {literal} out of range")
    feat = literal if literal < num_features else literal - num_features
    name = feature_names[feat] if feature_names is not None else f"x{feat}"
    return name if literal < num_features else f"~{name}"


class TsetlinMachine:
    """Multi-class TM over fixed-width binary feature vectors.

    Inference is pure and read-only (safe for concurrent callers).
    Training mutates the automaton states using one counter-based random
    stream per class (stream `num_classes` picks the per-example
    negative class), so results are bit-reproducible for a given seed
    on either compute backend.
    """

    def __init__(self, config: TMConfig, backend: str | None = None):
        self.config = config
        self._kernel = backends.get_kernel(backend)
        n = config.states_per_action
        self.ta_state = np.full(
            (config.num_classes, config.clauses_per_class, config.num_literals),
            n,
            dtype=np.int16,
        )
        self.stream_seeds = np.array(
            [rng.stream_seed(config.seed, c) for c in range(config.num_classes + 1)],
            dtype=np.uint64,
        )
        self.stream_counters = np.zeros(config.num_classes + 1, dtype=np.uint64)

    # -- helpers -------------------------------------------------------

    @property
    def backend_name(self) -> str:
        return self._kernel.BACKEND_NAME

    def clause_polarity(self, clause_index: int) -> int:
        """+1 for voting clauses (even index), -1 for opposing ones."""
        self._check_clause(clause_index)
        return 1 if clause_index % 2 == 0 else -1

    def include_mask(self, class_id: int | None = None) -> np.ndarray:
        """Boolean inclusion mask; per class or for the whole model."""
        if class_id is None:
            return self.ta_state > self.config.states_per_action
        self._check_class(class_id)
        return self.ta_state[class_id] > self.config.states_per_action

    def set_clause(self, class_id: int, clause_index: int, included_literals) -> None:
        """Hand-build a clause: include exactly the given literals."""
        self._check_class(class_id)
        self._check_clause(clause_index)
        n = self.config.states_per_action
        row = self.ta_state[class_id, clause_index]
        row[:] = n
        for lit in included_literals:
            if not 0 <= lit < self.config.num_literals:
                raise RangeError(f"literal {lit} out of range")
            row[lit] = 2 * n

    def _check_class(self, class_id: int) -> None:
        if not 0 <= class_id < self.config.num_classes:
            raise RangeError(
                f"class {class_id} out of range [0, {self.config.num_classes})"
            )

    def _check_clause(self, clause_index: int) -> None:
        if not 0 <= clause_index < self.config.clauses_per_class:
            raise RangeError(f"clause {clause_index} out of range")

    def _as_input(self, x) -> np.ndarray:
        x = np.ascontiguousarray(x, dtype=np.uint8)
        if x.ndim != 1 or x.shape[0] != self.config.num_features:
            raise DimensionError(
                f"input width {x.shape} does not match num_features="
                f"{self.config.num_features}"
            )
        return x

    def _as_batch(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.uint8)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.config.num_features:
            raise DimensionError(
                f"batch width {X.shape} does not match num_features="
                f"{self.config.num_features}"
            )
        return X

    # -- inference -----------------------------------------------------

    def clause_outputs(self, class_id: int, x, training: bool = False) -> np.ndarray:
        self._check_class(class_id)
        return self._kernel.clause_outputs(
            self.ta_state[class_id], self.config.states_per_action,
            self._as_input(x), training,
        )

    def clause_output(self, class_id: int, clause_index: int, x,
                      training: bool = False) -> int:
        self._check_clause(clause_index)
        return int(self.clause_outputs(class_id, x, training)[clause_index])

    def class_scores(self, X) -> np.ndarray:
        """Vote sums, shape (examples, classes)."""
        return self._kernel.class_scores_batch(
            self.ta_state, self.config.states_per_action, self._as_batch(X)
        )

    def class_score(self, class_id: int, x) -> int:
        self._check_class(class_id)
        return int(self.class_scores(self._as_input(x)[None, :])[0, class_id])

    def predict(self, X) -> np.ndarray | int:
        single = np.asarray(X).ndim == 1
        scores = self.class_scores(X)
        pred = scores.argmax(axis=1)  # argmax takes the lowest index on ties
        return int(pred[0]) if single else pred

    def rank_classes(self, x, k: int) -> np.ndarray:
        """Top-k classes by descending score, ties by ascending class id."""
        if not 1 <= k <= self.config.num_classes:
            raise RangeError(f"k={k} out of range [1, {self.config.num_classes}]")
        scores = self.class_scores(self._as_input(x)[None, :])[0]
        order = np.lexsort((np.arange(scores.shape[0]), -scores))
        return order[:k]

    def rank_classes_batch(self, X, k: int) -> np.ndarray:
        if not 1 <= k <= self.config.num_classes:
            raise RangeError(f"k={k} out of range [1, {self.config.num_classes}]")
        scores = self.class_scores(X)
        idx = np.arange(scores.shape[1])
        return np.stack(
            [np.lexsort((idx, -row))[:k] for row in scores], axis=0
        )

    # -- training ------------------------------------------------------

    def train_epoch(self, X, y) -> EpochStats:
        """One pass over the examples in order.

        Per example the target bank is updated with probability scaled by
        (T - clamp(votes)) / 2T per clause, one sampled non-target bank
        with (T + clamp(votes)) / 2T; voting clauses of the target (and
        opposing clauses of the non-target) receive reinforcement, the
        others penalty.
        """
        X = self._as_batch(X)
        y = np.ascontiguousarray(y, dtype=np.int64)
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise DimensionError("labels must be 1-D and match the batch length")
        if y.size and (y.min() < 0 or y.max() >= self.config.num_classes):
            raise RangeError("label out of range")
        if y.size == 0:
            return EpochStats(0, 0, 0)
        t1, t2 = self._kernel.train_epoch(
            self.ta_state, self.config.states_per_action, X, y,
            self.config.threshold, self.config.specificity,
            self.stream_seeds, self.stream_counters,
        )
        return EpochStats(int(X.shape[0]), t1, t2)

    def fit(self, X, y, epochs: int = 1, track_accuracy: bool = False) -> list[TrainedEpoch]:
        history = []
        for epoch in range(epochs):
            stats = self.train_epoch(X, y)
            acc = None
            if track_accuracy:
                acc = float((self.predict(X) == np.asarray(y)).mean())
            history.append(TrainedEpoch(epoch, stats, acc))
        return history

    # -- persistence ---------------------------------------------------

    def __eq__(self, other) -> bool:
        if not isinstance(other, TsetlinMachine):
            return NotImplemented
        return (
            self.config == other.config
            and np.array_equal(self.ta_state, other.ta_state)
            and np.array_equal(self.stream_counters, other.stream_counters)
        )

    def to_bytes(self) -> bytes:
        return serialize.dump_container(
            MODEL_KIND,
            asdict(self.config),
            {"ta_state": self.ta_state, "stream_counters": self.stream_counters},
        )

    @classmethod
    def from_bytes(cls, data: bytes, backend: str | None = None) -> "TsetlinMachine":
        return cls._from_parsed(*serialize.load_container(data), backend=backend)

    @classmethod
    def _from_parsed(cls, kind, config, arrays, backend=None) -> "TsetlinMachine":
        if kind != MODEL_KIND:
            raise FormatError(f"expected a {MODEL_KIND!r} container, got {kind!r}")
        model = cls(TMConfig(**config), backend=backend)
        state = arrays["ta_state"]
        counters = arrays["stream_counters"]
        if state.shape != model.ta_state.shape:
            raise FormatError(
                f"state shape {state.shape} does not match config "
                f"{model.ta_state.shape}"
            )
        if counters.shape != model.stream_counters.shape:
            raise FormatError("stream counter table has the wrong length")
        model.ta_state = np.ascontiguousarray(state, dtype=np.int16)
        model.stream_counters = np.ascontiguousarray(counters, dtype=np.uint64)
        return model

    def save(self, path) -> None:
        serialize.save_container(
            path, MODEL_KIND, asdict(self.config),
            {"ta_state": self.ta_state, "stream_counters": self.stream_counters},
        )

    @classmethod
    def load(cls, path, backend: str | None = None) -> "TsetlinMachine":
        return cls._from_parsed(*serialize.read_container(path), backend=backend)
