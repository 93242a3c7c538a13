"""Implicit-feedback alternating least squares.

Purchase events carry no ratings, so every observed (user, item) pair
gets preference 1 with confidence 1 + alpha * count, and every
unobserved pair preference 0 with confidence 1.  Each half-sweep solves
its side's regularized weighted least squares exactly via rank x rank
normal equations (Gramian plus per-row corrections for observed pairs),
which makes the objective non-increasing sweep over sweep.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import asdict, dataclass

import numpy as np

from . import serialize
from .exceptions import ConfigError, DataError, DimensionError, FormatError

FACTORS_KIND = "als"


@dataclass(frozen=True)
class ALSConfig:
    rank: int = 16
    regularization: float = 0.01
    confidence_alpha: float = 40.0
    sweeps: int = 15
    seed: int = 0

    def __post_init__(self):
        if self.rank < 1:
            raise ConfigError("rank must be >= 1")
        if not self.regularization > 0:
            raise ConfigError("regularization must be > 0")
        if self.confidence_alpha < 0:
            raise ConfigError("confidence_alpha must be >= 0")
        if self.sweeps < 1:
            raise ConfigError("sweeps must be >= 1")


class LatentFactors:
    """Per-user and per-item factor rows with id lookup.

    Ids absent from training have no row; lookups fall back to the zero
    vector so downstream encoding handles cold starts uniformly.
    """

    def __init__(self, user_ids, item_ids, user_factors, item_factors, config):
        self.user_ids = list(user_ids)
        self.item_ids = list(item_ids)
        self.user_factors = np.asarray(user_factors, dtype=np.float64)
        self.item_factors = np.asarray(item_factors, dtype=np.float64)
        self.config = config
        if self.user_factors.shape != (len(self.user_ids), config.rank):
            raise DimensionError("user factor matrix does not match id index")
        if self.item_factors.shape != (len(self.item_ids), config.rank):
            raise DimensionError("item factor matrix does not match id index")
        if not (np.isfinite(self.user_factors).all()
                and np.isfinite(self.item_factors).all()):
            raise DataError("factors contain non-finite entries")
        self._user_row = {u: i for i, u in enumerate(self.user_ids)}
        self._item_row = {v: i for i, v in enumerate(self.item_ids)}

    @property
    def rank(self) -> int:
        return self.config.rank

    def has_user(self, user_id) -> bool:
        return user_id in self._user_row

    def has_item(self, item_id) -> bool:
        return item_id in self._item_row

    def user_vector(self, user_id) -> np.ndarray:
        row = self._user_row.get(user_id)
        return self.user_factors[row] if row is not None else np.zeros(self.rank)

    def item_vector(self, item_id) -> np.ndarray:
        row = self._item_row.get(item_id)
        return self.item_factors[row] if row is not None else np.zeros(self.rank)

    def predict(self, user_id, item_id) -> float:
        return float(self.user_vector(user_id) @ self.item_vector(item_id))

    def save(self, path) -> None:
        serialize.save_container(
            path, FACTORS_KIND,
            {"config": asdict(self.config),
             "user_ids": [str(u) for u in self.user_ids],
             "item_ids": [str(v) for v in self.item_ids]},
            {"user_factors": self.user_factors, "item_factors": self.item_factors},
        )

    @classmethod
    def load(cls, path) -> "LatentFactors":
        kind, meta, arrays = serialize.read_container(path)
        if kind != FACTORS_KIND:
            raise FormatError(f"expected a {FACTORS_KIND!r} container, got {kind!r}")
        return cls(meta["user_ids"], meta["item_ids"],
                   arrays["user_factors"], arrays["item_factors"],
                   ALSConfig(**meta["config"]))


def _aggregate(interactions):
    """Count events per (user, item); ids are indexed in sorted order."""
    counts = Counter()
    for user, item in interactions:
        counts[(user, item)] += 1
    if not counts:
        raise DataError("interaction set is empty")
    user_ids = sorted({u for u, _ in counts})
    item_ids = sorted({v for _, v in counts})
    urow = {u: i for i, u in enumerate(user_ids)}
    irow = {v: i for i, v in enumerate(item_ids)}
    by_user = [[] for _ in user_ids]
    by_item = [[] for _ in item_ids]
    for (u, v), n in sorted(counts.items(), key=lambda kv: (urow[kv[0][0]], irow[kv[0][1]])):
        by_user[urow[u]].append((irow[v], n))
        by_item[irow[v]].append((urow[u], n))
    return user_ids, item_ids, by_user, by_item


def _solve_side(target, source, rows, alpha, lam):
    """Solve every row of `target` given `source` fixed.

    Per row: (S^T S + sum_obs (c-1) s s^T + lam I) t = sum_obs c s,
    with c = 1 + alpha * count; the Gramian S^T S covers the implicit
    all-pairs term, observed pairs add their confidence excess.
    """
    rank = source.shape[1]
    gram = source.T @ source
    eye = lam * np.eye(rank)
    for r, obs in enumerate(rows):
        A = gram + eye
        b = np.zeros(rank)
        for src_row, n in obs:
            c = 1.0 + alpha * n
            s = source[src_row]
            A = A + (c - 1.0) * np.outer(s, s)
            b += c * s
        target[r] = np.linalg.solve(A, b)


def fit_als(interactions, config: ALSConfig | None = None,
            track_objective: bool = False):
    """Factorize an iterable of (user_id, item_id) events.

    Returns LatentFactors, or (LatentFactors, objective-per-sweep list)
    when track_objective is set.
    """
    config = config or ALSConfig()
    user_ids, item_ids, by_user, by_item = _aggregate(interactions)
    rng = np.random.default_rng(config.seed)
    U = rng.uniform(0.0, 0.1, size=(len(user_ids), config.rank))
    V = rng.uniform(0.0, 0.1, size=(len(item_ids), config.rank))
    curve = []
    for _ in range(config.sweeps):
        _solve_side(U, V, by_user, config.confidence_alpha, config.regularization)
        _solve_side(V, U, by_item, config.confidence_alpha, config.regularization)
        if track_objective:
            curve.append(_objective_indexed(by_user, U, V, config))
    factors = LatentFactors(user_ids, item_ids, U, V, config)
    return (factors, curve) if track_objective else factors


def _objective_indexed(by_user, U, V, config) -> float:
    # sum over ALL pairs of (u.v)^2 collapses to tr(Gu Gv); observed pairs
    # swap that term for the confidence-weighted residual
    total = float(np.trace((U.T @ U) @ (V.T @ V)))
    for urow, obs in enumerate(by_user):
        for irow, n in obs:
            c = 1.0 + config.confidence_alpha * n
            s = float(U[urow] @ V[irow])
            total += c * (1.0 - s) ** 2 - s * s
    total += config.regularization * (float((U * U).sum()) + float((V * V).sum()))
    return total


def objective(interactions, factors: LatentFactors, config: ALSConfig | None = None) -> float:
    """Exact implicit-feedback loss of the given factors on the events."""
    config = config or factors.config
    if config.rank != factors.rank:
        raise DimensionError(
            f"config rank {config.rank} does not match factors rank {factors.rank}"
        )
    counts = Counter()
    for user, item in interactions:
        if not (factors.has_user(user) and factors.has_item(item)):
            raise DimensionError(f"pair ({user!r}, {item!r}) not in the factor index")
        counts[(user, item)] += 1
    if not counts:
        raise DataError("interaction set is empty")
    U, V = factors.user_factors, factors.item_factors
    total = float(np.trace((U.T @ U) @ (V.T @ V)))
    for (u, v), n in counts.items():
        c = 1.0 + config.confidence_alpha * n
        s = factors.predict(u, v)
        total += c * (1.0 - s) ** 2 - s * s
    total += config.regularization * (float((U * U).sum()) + float((V * V).sum()))
    return total
