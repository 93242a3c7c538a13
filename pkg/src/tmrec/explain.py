"""Clause-level introspection and model-agnostic attributions.

The clause machine explains itself: every prediction is a sum of +-1
clause votes, so the per-clause contribution list reconstructs the
class score exactly.  For cross-model comparisons a permutation-
sampling Shapley estimator treats any scorer as a black box; an exact
enumerator over all feature subsets backs it for small widths.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from math import factorial

import numpy as np

from .exceptions import DataError, DimensionError, RangeError
from .tm import TsetlinMachine, literal_name


# -- clause introspection -------------------------------------------------


@dataclass(frozen=True)
class ClauseInclusionMatrix:
    """Included-literal mask for one class, split by clause polarity."""

    class_id: int
    matrix: np.ndarray  # bool, clauses x 2*num_features

    @property
    def positive_rows(self) -> np.ndarray:
        return self.matrix[0::2]

    @property
    def negative_rows(self) -> np.ndarray:
        return self.matrix[1::2]

    def to_pairs(self) -> list[tuple[int, int]]:
        """Sparse (clause, literal) list, plot-ready."""
        rows, cols = np.nonzero(self.matrix)
        return list(zip(rows.tolist(), cols.tolist()))


def clause_inclusion_matrix(model: TsetlinMachine, class_id: int) -> ClauseInclusionMatrix:
    return ClauseInclusionMatrix(class_id, model.include_mask(class_id).copy())


@dataclass(frozen=True)
class ClassInclusionRow:
    class_id: int
    prediction_count: int
    pos: int      # plain literals included in positive clauses
    not_pos: int  # negated literals included in positive clauses
    neg: int      # plain literals included in negative clauses
    not_neg: int  # negated literals included in negative clauses


@dataclass(frozen=True)
class InclusionStats:
    rows: tuple[ClassInclusionRow, ...]           # sorted by prediction count
    feature_positive_inclusions: np.ndarray       # per feature, across classes
    mean_inclusion_rate: float                    # fraction of literal slots included

    def to_json(self) -> dict:
        return {
            "rows": [vars(r) for r in self.rows],
            "feature_positive_inclusions":
                self.feature_positive_inclusions.tolist(),
            "mean_inclusion_rate": self.mean_inclusion_rate,
        }


def inclusion_stats(model: TsetlinMachine, prediction_counts=None) -> InclusionStats:
    """Literal-count table per class plus per-feature inclusion counts."""
    F = model.config.num_features
    counts = dict(prediction_counts or {})
    mask = model.include_mask()  # (classes, clauses, 2F)
    plain, negated = mask[:, :, :F], mask[:, :, F:]
    pos_rows = slice(0, None, 2)
    neg_rows = slice(1, None, 2)
    rows = []
    for c in range(model.config.num_classes):
        rows.append(ClassInclusionRow(
            class_id=c,
            prediction_count=int(counts.get(c, 0)),
            pos=int(plain[c, pos_rows].sum()),
            not_pos=int(negated[c, pos_rows].sum()),
            neg=int(plain[c, neg_rows].sum()),
            not_neg=int(negated[c, neg_rows].sum()),
        ))
    rows.sort(key=lambda r: (-r.prediction_count, r.class_id))
    per_feature = plain[:, pos_rows].sum(axis=(0, 1)).astype(np.int64)
    return InclusionStats(tuple(rows), per_feature, float(mask.mean()))


# -- per-prediction explanations ------------------------------------------


@dataclass(frozen=True)
class ClauseContribution:
    clause_index: int
    polarity: int
    satisfied_literals: tuple[str, ...]


@dataclass(frozen=True)
class CounterfactualNote:
    feature: int
    flipped_to: int
    new_prediction: int


@dataclass(frozen=True)
class PredictionExplanation:
    predicted_class: int
    ranked: tuple[tuple[int, int], ...]  # (class, score), best first
    contributions: dict  # class -> tuple[ClauseContribution, ...]
    counterfactuals: tuple[CounterfactualNote, ...] = ()

    def score(self, class_id: int) -> int:
        for c, s in self.ranked:
            if c == class_id:
                return s
        raise RangeError(f"class {class_id} not among the explained classes")


def _firing_clauses(model, class_id, x, feature_names):
    F = model.config.num_features
    outs = model.clause_outputs(class_id, x, training=False)
    mask = model.include_mask(class_id)
    contribs = []
    for j in np.nonzero(outs)[0]:
        lits = np.nonzero(mask[j])[0]
        contribs.append(ClauseContribution(
            int(j),
            model.clause_polarity(int(j)),
            tuple(literal_name(int(l), F, feature_names) for l in lits),
        ))
    return tuple(contribs)


def explain_prediction(model: TsetlinMachine, x, top_m: int = 5,
                       counterfactual_budget: int = 0,
                       feature_names=None) -> PredictionExplanation:
    """Scores, firing clauses, and optional single-flip counterfactuals.

    The contribution list reproduces each class score exactly: the sum
    of polarities over firing clauses equals class_score.
    """
    x = np.ascontiguousarray(x, dtype=np.uint8)
    scores = model.class_scores(x[None, :])[0]
    order = np.lexsort((np.arange(len(scores)), -scores))
    top_m = min(top_m, len(order))
    ranked = tuple((int(c), int(scores[c])) for c in order[:top_m])
    predicted = ranked[0][0]

    contributions = {
        c: _firing_clauses(model, c, x, feature_names) for c, _ in ranked
    }

    notes = []
    budget = min(counterfactual_budget, model.config.num_features)
    for f in range(budget):
        flipped = x.copy()
        flipped[f] ^= 1
        new_pred = model.predict(flipped)
        if new_pred != predicted:
            notes.append(CounterfactualNote(f, int(flipped[f]), int(new_pred)))
    return PredictionExplanation(predicted, ranked, contributions, tuple(notes))


# -- sampled and exact Shapley values ---------------------------------------


@dataclass(frozen=True)
class ShapleyReport:
    attributions: np.ndarray
    standard_errors: np.ndarray
    baseline: float       # mean scorer value over the drawn references
    prediction: float     # scorer value at x
    n_permutations: int
    x: np.ndarray = field(repr=False, default=None)

    def to_json(self) -> dict:
        return {
            "attributions": self.attributions.tolist(),
            "standard_errors": self.standard_errors.tolist(),
            "baseline": self.baseline,
            "prediction": self.prediction,
            "n_permutations": self.n_permutations,
            "x": self.x.tolist() if self.x is not None else None,
        }


def _as_scorer(predict_fn, class_id):
    """Normalize the scorer to batched rows -> 1-D float array."""

    def score(rows):
        out = np.asarray(predict_fn(np.asarray(rows)), dtype=np.float64)
        if out.ndim == 2:
            if class_id is None:
                raise DimensionError(
                    "scorer returned per-class output but no class_id was given"
                )
            out = out[:, class_id]
        if out.ndim != 1 or out.shape[0] != len(rows):
            raise DimensionError("scorer must return one value per input row")
        return out

    return score


def shapley_attribute(predict_fn, background, x, n_permutations: int,
                      seed: int = 0, class_id: int | None = None) -> ShapleyReport:
    """Monte Carlo permutation-sampling Shapley attributions.

    Per permutation a background reference row is drawn and features are
    switched to x's values in permutation order; the marginal score
    deltas telescope, so summed attributions equal prediction minus the
    mean reference score exactly.
    """
    if n_permutations < 1:
        raise RangeError("n_permutations must be >= 1")
    background = np.asarray(background)
    if background.ndim != 2 or background.shape[0] == 0:
        raise DataError("background must be a non-empty 2-D sample set")
    x = np.asarray(x)
    if x.shape != (background.shape[1],):
        raise DimensionError("x width does not match the background")
    score = _as_scorer(predict_fn, class_id)
    F = x.shape[0]
    rng = np.random.default_rng(seed)

    deltas = np.zeros((n_permutations, F))
    base_values = np.zeros(n_permutations)
    for p in range(n_permutations):
        perm = rng.permutation(F)
        ref = background[rng.integers(background.shape[0])]
        # rows[i] has the first i permuted features switched to x
        rows = np.tile(ref, (F + 1, 1))
        for i, f in enumerate(perm):
            rows[i + 1 :, f] = x[f]
        try:
            values = score(rows)
        except Exception as exc:
            exc.args = (f"scorer failed at permutation {p}",) + exc.args
            raise
        deltas[p, perm] = np.diff(values)
        base_values[p] = values[0]

    attributions = deltas.mean(axis=0)
    if n_permutations > 1:
        se = deltas.std(axis=0, ddof=1) / np.sqrt(n_permutations)
    else:
        se = np.full(F, np.nan)
    return ShapleyReport(
        attributions, se, float(base_values.mean()),
        float(score(x[None, :])[0]), n_permutations, x.copy(),
    )


def exact_shapley(predict_fn, background, x, class_id: int | None = None) -> ShapleyReport:
    """Exact Shapley values by full subset enumeration (small widths only).

    The coalition value v(S) is the scorer averaged over the background
    with features in S taken from x and the rest from the reference row.
    """
    background = np.asarray(background)
    x = np.asarray(x)
    if x.shape != (background.shape[1],):
        raise DimensionError("x width does not match the background")
    F = x.shape[0]
    if F > 16:
        raise RangeError("exact enumeration is limited to 16 features")
    score = _as_scorer(predict_fn, class_id)

    # value of every subset, encoded as a bitmask
    values = np.zeros(2**F)
    for mask in range(2**F):
        rows = background.copy()
        for f in range(F):
            if mask >> f & 1:
                rows[:, f] = x[f]
        values[mask] = score(rows).mean()

    attributions = np.zeros(F)
    fact = [factorial(i) for i in range(F + 1)]
    for mask in range(2**F):
        size = bin(mask).count("1")
        weight = fact[size] * fact[F - size - 1] / fact[F]
        for f in range(F):
            if not mask >> f & 1:
                attributions[f] += weight * (values[mask | 1 << f] - values[mask])
    return ShapleyReport(
        attributions, np.zeros(F), float(values[0]),
        float(values[2**F - 1]), 0, x.copy(),
    )


def beeswarm_export(reports, top_m: int) -> list[dict]:
    """Flatten many Shapley reports into plot-ready rows.

    Keeps the top_m features by mean absolute attribution (ties by
    feature index); one row per (report, feature) pair.
    """
    reports = list(reports)
    if not reports:
        raise DataError("need at least one report")
    if top_m < 1:
        raise RangeError("top_m must be >= 1")
    stack = np.stack([r.attributions for r in reports])
    mean_abs = np.abs(stack).mean(axis=0)
    order = np.lexsort((np.arange(len(mean_abs)), -mean_abs))
    keep = sorted(int(f) for f in order[: min(top_m, len(mean_abs))])

    rows = []
    for idx, report in enumerate(reports):
        for f in keep:
            rows.append({
                "report": idx,
                "feature": f,
                "attribution": float(report.attributions[f]),
                "feature_value": (
                    float(report.x[f]) if report.x is not None else None
                ),
                "mean_abs_attribution": float(mean_abs[f]),
            })
    return rows


def write_beeswarm_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


def write_json(doc, path) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
