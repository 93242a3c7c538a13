"""Transaction-log ingestion, temporal splitting, and synthetic data.

Tables follow the fashion-retail CSV layout: ``transactions.csv``
(t_dat, customer_id, article_id, price, sales_channel_id) plus
``customers.csv`` and ``articles.csv`` attribute tables.  Internally
the columns are renamed to date / customer_id / item_id / price /
channel.  Synthetic logs export to the identical layout so every
downstream path is format-agnostic about where the data came from.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .exceptions import ConfigError, DataError, IntegrityError, RangeError, SchemaError

log_ = logging.getLogger(__name__)

TRANSACTION_COLUMNS = {
    "t_dat": "date",
    "customer_id": "customer_id",
    "article_id": "item_id",
    "price": "price",
    "sales_channel_id": "channel",
}


@dataclass
class InteractionLog:
    """Transactions plus the customer and item attribute tables."""

    transactions: pd.DataFrame
    customers: pd.DataFrame
    items: pd.DataFrame
    _customer_cache: dict = field(default_factory=dict, repr=False)
    _item_cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_transactions(self) -> int:
        return len(self.transactions)

    def item_counts(self) -> pd.Series:
        return self.transactions["item_id"].value_counts()

    def customer_record(self, customer_id) -> dict:
        if not self._customer_cache:
            self._customer_cache.update(
                (row["customer_id"], row)
                for row in self.customers.to_dict("records")
            )
        try:
            return self._customer_cache[customer_id]
        except KeyError:
            raise IntegrityError(f"unknown customer {customer_id!r}") from None

    def item_record(self, item_id) -> dict:
        if not self._item_cache:
            self._item_cache.update(
                (row["item_id"], row) for row in self.items.to_dict("records")
            )
        try:
            return self._item_cache[item_id]
        except KeyError:
            raise IntegrityError(f"unknown item {item_id!r}") from None


def _require_columns(frame: pd.DataFrame, columns, table: str) -> None:
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise SchemaError(f"{table} is missing column(s): {', '.join(missing)}")


def _check_integrity(transactions, customers, items) -> None:
    bad_customers = set(transactions["customer_id"]) - set(customers["customer_id"])
    if bad_customers:
        sample = sorted(map(repr, bad_customers))[:5]
        raise IntegrityError(
            f"{len(bad_customers)} transaction customer id(s) missing from the "
            f"customer table: {', '.join(sample)}"
        )
    bad_items = set(transactions["item_id"]) - set(items["item_id"])
    if bad_items:
        sample = sorted(map(repr, bad_items))[:5]
        raise IntegrityError(
            f"{len(bad_items)} transaction item id(s) missing from the "
            f"item table: {', '.join(sample)}"
        )


def load_tables(transactions_path, customers_path, items_path) -> InteractionLog:
    """Read and cross-check the three CSV files."""
    tx = pd.read_csv(transactions_path, dtype={"customer_id": str, "article_id": str})
    _require_columns(tx, TRANSACTION_COLUMNS, "transactions")
    if tx.empty:
        raise DataError(f"no transactions in {transactions_path}")
    tx = tx.rename(columns=TRANSACTION_COLUMNS)[list(TRANSACTION_COLUMNS.values())]
    try:
        tx["date"] = pd.to_datetime(tx["date"])
    except (ValueError, TypeError) as exc:
        raise DataError(f"unparseable transaction date: {exc}") from exc
    tx["price"] = pd.to_numeric(tx["price"], errors="raise")
    tx["channel"] = tx["channel"].astype(str)

    customers = pd.read_csv(customers_path, dtype={"customer_id": str})
    _require_columns(customers, ["customer_id"], "customers")
    items = pd.read_csv(items_path, dtype={"article_id": str})
    _require_columns(items, ["article_id"], "articles")
    items = items.rename(columns={"article_id": "item_id"})

    _check_integrity(tx, customers, items)
    log_.info(
        "loaded %d transactions, %d customers, %d items",
        len(tx), len(customers), len(items),
    )
    return InteractionLog(tx.reset_index(drop=True), customers, items)


@dataclass
class SplitDataset:
    train: InteractionLog
    test: InteractionLog
    cutoff_date: pd.Timestamp


def temporal_split(log: InteractionLog, cutoff_days: int = 30) -> SplitDataset:
    """Last ``cutoff_days`` of purchases become the test set."""
    if cutoff_days < 0:
        raise RangeError("cutoff_days must be >= 0")
    if log.n_transactions == 0:
        raise DataError("cannot split an empty log")
    max_date = log.transactions["date"].max()
    cutoff = max_date - pd.Timedelta(days=cutoff_days)
    in_test = log.transactions["date"] > cutoff
    train_tx = log.transactions[~in_test].reset_index(drop=True)
    test_tx = log.transactions[in_test].reset_index(drop=True)
    if train_tx.empty:
        warnings.warn(
            "cutoff covers the whole date span; training split is empty",
            stacklevel=2,
        )
    return SplitDataset(
        InteractionLog(train_tx, log.customers, log.items),
        InteractionLog(test_tx, log.customers, log.items),
        cutoff,
    )


def top_items(log: InteractionLog, k: int) -> list:
    """The k most purchased item ids, ties broken by ascending id."""
    if k < 1:
        raise RangeError("k must be >= 1")
    counts = log.item_counts()
    order = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return [item for item, _ in order[:k]]


def topk_subset(log: InteractionLog, k: int) -> InteractionLog:
    """Restrict the log to transactions on the k most popular items."""
    keep = set(top_items(log, k))
    tx = log.transactions[log.transactions["item_id"].isin(keep)].reset_index(drop=True)
    remaining_customers = set(tx["customer_id"])
    customers = log.customers[
        log.customers["customer_id"].isin(remaining_customers)
    ].reset_index(drop=True)
    items = log.items[log.items["item_id"].isin(keep)].reset_index(drop=True)
    return InteractionLog(tx, customers, items)


# -- synthetic transaction logs -----------------------------------------


@dataclass(frozen=True)
class PlantedRule:
    """Conjunction over customer attribute bits implying the next item."""

    conditions: tuple[tuple[int, int], ...]  # (feature index, required bit)
    item: int


@dataclass(frozen=True)
class SyntheticSpec:
    num_customers: int
    num_items: int
    num_features: int
    planted_rules: tuple[PlantedRule, ...]
    noise_rate: float = 0.0
    purchases_per_customer: int = 12
    days_between_purchases: int = 5
    seed: int = 0

    def __post_init__(self):
        if min(self.num_customers, self.num_items, self.num_features) < 1:
            raise ConfigError("sizes must be >= 1")
        if not 0.0 <= self.noise_rate <= 1.0:
            raise ConfigError("noise_rate must be in [0, 1]")
        if self.purchases_per_customer < 1:
            raise ConfigError("purchases_per_customer must be >= 1")
        if self.days_between_purchases < 1:
            raise ConfigError("days_between_purchases must be >= 1")
        for rule in self.planted_rules:
            for feat, bit in rule.conditions:
                if not 0 <= feat < self.num_features:
                    raise ConfigError(f"rule references feature {feat} out of range")
                if bit not in (0, 1):
                    raise ConfigError("rule bits must be 0 or 1")
            if not 0 <= rule.item < self.num_items:
                raise ConfigError(f"rule item {rule.item} out of range")


def _item_id(idx: int) -> str:
    return f"i{idx:04d}"


def _customer_id(idx: int) -> str:
    return f"c{idx:05d}"


def generate_synthetic(spec: SyntheticSpec) -> tuple[InteractionLog, pd.DataFrame]:
    """Planted-rule purchase log plus the per-transaction ground truth.

    Every customer gets random attribute bits; at each step the first
    matching rule names the next purchase (or a random fallback item),
    flipped to a uniform random item with probability noise_rate.
    """
    rng = np.random.default_rng(spec.seed)
    attrs = rng.integers(0, 2, size=(spec.num_customers, spec.num_features))
    base = pd.Timestamp("2020-01-01")

    rows, truth = [], []
    for c in range(spec.num_customers):
        cid = _customer_id(c)
        for step in range(spec.purchases_per_customer):
            rule_idx = -1
            for ridx, rule in enumerate(spec.planted_rules):
                if all(attrs[c, f] == bit for f, bit in rule.conditions):
                    rule_idx = ridx
                    break
            intended = (
                spec.planted_rules[rule_idx].item
                if rule_idx >= 0
                else int(rng.integers(spec.num_items))
            )
            noisy = bool(rng.random() < spec.noise_rate)
            actual = int(rng.integers(spec.num_items)) if noisy else intended
            date = base + pd.Timedelta(days=step * spec.days_between_purchases)
            rows.append((date, cid, _item_id(actual),
                         round(0.01 * (actual + 1), 4), "1"))
            truth.append((cid, step, _item_id(intended), rule_idx, noisy))

    tx = pd.DataFrame(rows, columns=["date", "customer_id", "item_id",
                                     "price", "channel"])
    customers = pd.DataFrame({
        "customer_id": [_customer_id(c) for c in range(spec.num_customers)],
        **{f"attr{f}": [str(attrs[c, f]) for c in range(spec.num_customers)]
           for f in range(spec.num_features)},
    })
    items = pd.DataFrame({
        "item_id": [_item_id(i) for i in range(spec.num_items)],
        "group": [f"g{i % 4}" for i in range(spec.num_items)],
    })
    ground_truth = pd.DataFrame(
        truth, columns=["customer_id", "step", "intended_item", "rule_index", "noisy"]
    )
    return InteractionLog(tx, customers, items), ground_truth


def export_csv_dir(log: InteractionLog, directory) -> dict[str, Path]:
    """Write the log in the external three-file CSV layout."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {
        "transactions": directory / "transactions.csv",
        "customers": directory / "customers.csv",
        "articles": directory / "articles.csv",
    }
    tx = log.transactions.rename(columns={
        "date": "t_dat", "item_id": "article_id", "channel": "sales_channel_id",
    })
    tx = tx.assign(t_dat=tx["t_dat"].dt.strftime("%Y-%m-%d"))
    tx.to_csv(paths["transactions"], index=False)
    log.customers.to_csv(paths["customers"], index=False)
    log.items.rename(columns={"item_id": "article_id"}).to_csv(
        paths["articles"], index=False
    )
    return paths


# -- direct classification fixtures --------------------------------------


def planted_classification(num_train: int = 5000, num_test: int = 1000,
                           seed: int = 0, background_rate: float = 0.35):
    """16-class fixture over 40 binary features with zero label noise.

    Classes 0-7 are 2-literal conjunctions on disjoint feature pairs,
    classes 8-15 are 3-literal conjunctions on disjoint triples.  The
    sampler plants exactly the labeled class's rule and breaks any other
    rule that holds by accident, so the label is always unambiguous.

    Returns (X_train, y_train, X_test, y_test, rules) where rules[c]
    is the tuple of feature indexes whose conjunction implies class c.
    """
    rules = [tuple(range(2 * c, 2 * c + 2)) for c in range(8)]
    rules += [tuple(range(16 + 3 * (c - 8), 16 + 3 * (c - 8) + 3))
              for c in range(8, 16)]
    rng = np.random.default_rng(seed)

    def sample(n):
        X = (rng.random((n, 40)) < background_rate).astype(np.uint8)
        y = rng.integers(0, 16, size=n).astype(np.int64)
        for i in range(n):
            X[i, list(rules[y[i]])] = 1
            for c, block in enumerate(rules):
                if c != y[i] and X[i, list(block)].all():
                    X[i, block[int(rng.integers(len(block)))]] = 0
        return X, y

    X_train, y_train = sample(num_train)
    X_test, y_test = sample(num_test)
    return X_train, y_train, X_test, y_test, rules


def xor_dataset(num_train: int = 2000, num_test: int = 500, seed: int = 0):
    """Two binary features; the label is their exclusive or."""
    rng = np.random.default_rng(seed)

    def sample(n):
        X = rng.integers(0, 2, size=(n, 2)).astype(np.uint8)
        return X, (X[:, 0] ^ X[:, 1]).astype(np.int64)

    X_train, y_train = sample(num_train)
    X_test, y_test = sample(num_test)
    return X_train, y_train, X_test, y_test
