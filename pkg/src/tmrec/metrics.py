"""Ranking and classification metrics.

AP@k follows the recommendation-competition convention: the normalizer
is min(|relevant|, k), every rank i in the top k contributes
precision@i when the item at i is relevant, and users with an empty
relevant set are skipped (and counted) rather than scored as zero.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .exceptions import MetricError, RangeError


@dataclass(frozen=True)
class RankedPrediction:
    customer_id: object
    ranked_items: tuple
    relevant_items: frozenset

    def __init__(self, customer_id, ranked_items, relevant_items):
        object.__setattr__(self, "customer_id", customer_id)
        object.__setattr__(self, "ranked_items", tuple(ranked_items))
        object.__setattr__(self, "relevant_items", frozenset(relevant_items))


def ap_at_k(ranked, relevant, k: int) -> float:
    """Average precision truncated at k; 0.0 when nothing is relevant."""
    if k < 1:
        raise RangeError(f"k must be >= 1, got {k}")
    ranked = list(ranked)
    if len(set(ranked)) != len(ranked):
        raise MetricError("ranked list contains duplicates")
    relevant = set(relevant)
    if not relevant:
        return 0.0
    hits = 0
    total = 0.0
    for i, item in enumerate(ranked[:k], start=1):
        if item in relevant:
            hits += 1
            total += hits / i
    return total / min(len(relevant), k)


@dataclass(frozen=True)
class MapReport:
    k: int
    value: float
    scored_users: int
    skipped_users: int

    def to_json(self) -> dict:
        return {"k": self.k, "map": self.value,
                "scored_users": self.scored_users,
                "skipped_users": self.skipped_users}


def map_at_k(predictions, k: int) -> MapReport:
    """Mean AP@k over users with at least one relevant item."""
    if k < 1:
        raise RangeError(f"k must be >= 1, got {k}")
    scores = []
    skipped = 0
    for pred in predictions:
        if not pred.relevant_items:
            skipped += 1
            continue
        scores.append(ap_at_k(pred.ranked_items, pred.relevant_items, k))
    if not scores:
        raise MetricError("no scorable users (all relevant sets empty)")
    return MapReport(k, float(np.mean(scores)), len(scores), skipped)


def accuracy(predicted, actual) -> float:
    predicted = np.asarray(predicted)
    actual = np.asarray(actual)
    if predicted.shape != actual.shape:
        raise MetricError("prediction and label arrays differ in shape")
    if predicted.size == 0:
        raise MetricError("nothing to score")
    return float((predicted == actual).mean())


def popularity_baseline(item_events, k: int) -> list:
    """The k most purchased items, ties broken by ascending item id."""
    if k < 1:
        raise RangeError(f"k must be >= 1, got {k}")
    counts = Counter(item_events)
    if not counts:
        raise MetricError("no items to rank")
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return [item for item, _ in ranked[:k]]


@dataclass
class MetricTable:
    """One evaluated model's row set: MAP at several ks plus accuracy."""

    model: str
    maps: list[MapReport] = field(default_factory=list)
    accuracy: float | None = None

    def to_json(self) -> dict:
        doc = {"model": self.model, "map": {str(r.k): r.to_json() for r in self.maps}}
        if self.accuracy is not None:
            doc["accuracy"] = self.accuracy
        return doc

    def render(self) -> str:
        """Aligned text table, one column per configured k."""
        headers = ["model"] + [f"MAP@{r.k}" for r in self.maps]
        values = [self.model] + [f"{r.value:.4f}" for r in self.maps]
        if self.accuracy is not None:
            headers.append("accuracy")
            values.append(f"{self.accuracy:.4f}")
        widths = [max(len(h), len(v)) for h, v in zip(headers, values)]
        head = "  ".join(h.ljust(w) for h, w in zip(headers, widths))
        row = "  ".join(v.ljust(w) for v, w in zip(values, widths))
        return head + "\n" + row
