"""Timing harnesses: dataset scaling and compute-backend comparison.

The scaling suite trains one model per top-k item subset with the same
hyperparameters, reports absolute wall-clock times, and normalizes them
to the smallest configuration, which by definition gets relative time
1.0.  Subset construction and encoding happen outside the timed
regions, and a warm-up epoch precedes the single-epoch measurement so
cache effects do not pollute the normalizer.
"""

from __future__ import annotations

import json
import platform
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import dataset, pipeline
from .exceptions import ConfigError, DataError
from .tm import TMConfig, TsetlinMachine, available_backends

TIMING_COLUMNS = ("train_total_s", "train_epoch_s", "test_pass_s")


@dataclass
class ScalingRow:
    item_count: int
    dataset_rows: int
    dataset_fraction: float
    train_examples: int
    num_classes: int
    train_total_s: float
    train_epoch_s: float
    test_pass_s: float
    rel_train_total: float = 0.0
    rel_train_epoch: float = 0.0
    rel_test_pass: float = 0.0
    skipped: str | None = None


@dataclass
class ScalingReport:
    model_kind: str
    epochs: int
    seed: int
    environment: dict
    rows: list[ScalingRow] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "model_kind": self.model_kind,
            "epochs": self.epochs,
            "seed": self.seed,
            "environment": self.environment,
            "rows": [asdict(r) for r in self.rows],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ScalingReport":
        report = cls(doc["model_kind"], doc["epochs"], doc["seed"],
                     doc["environment"])
        report.rows = [ScalingRow(**r) for r in doc["rows"]]
        return report

    def render(self) -> str:
        """Aligned text table; one row per item-count configuration."""
        headers = ["items", "rows", "fraction", "classes",
                   "train_total", "rel", "train_epoch", "rel", "test_pass", "rel"]
        lines = [headers]
        for r in self.rows:
            if r.skipped:
                lines.append([str(r.item_count), "-", "-", "-",
                              f"skipped: {r.skipped}", "", "", "", "", ""])
                continue
            lines.append([
                str(r.item_count), str(r.dataset_rows),
                f"{100 * r.dataset_fraction:.3f}%", str(r.num_classes),
                f"{r.train_total_s:.3f}s", f"{r.rel_train_total:.2f}",
                f"{r.train_epoch_s:.4f}s", f"{r.rel_train_epoch:.2f}",
                f"{r.test_pass_s:.4f}s", f"{r.rel_test_pass:.2f}",
            ])
        widths = [max(len(row[i]) for row in lines) for i in range(len(headers))]
        return "\n".join(
            "  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
            for row in lines
        )

    def to_csv_rows(self) -> list[dict]:
        return [asdict(r) for r in self.rows]


def _environment(seed: int, threads: int) -> dict:
    return {
        "machine": platform.machine(),
        "processor": platform.processor() or platform.machine(),
        "python": platform.python_version(),
        "threads": threads,
        "seed": seed,
        "backends": list(available_backends()),
    }


def _train_and_time(model, kind, prepared, epochs, config):
    """Timed sections only; returns (train_total, train_epoch, test_pass)."""
    X, y = prepared.X_train, prepared.y_train
    reals = prepared.reals_train

    if kind == "tm":
        start = time.perf_counter()
        for _ in range(epochs):
            model.train_epoch(X, y)
        train_total = time.perf_counter() - start
        model.train_epoch(X, y)  # warm-up for the single-epoch measurement
        start = time.perf_counter()
        model.train_epoch(X, y)
        train_epoch = time.perf_counter() - start
        eval_X = prepared.eval_X if len(prepared.eval_X) else X
        start = time.perf_counter()
        model.predict(eval_X)
        test_pass = time.perf_counter() - start
    else:
        from . import baselines

        mc = config["model"]
        start = time.perf_counter()
        baselines.train_sgd(model, reals, y, lr=mc["lr"],
                            batch_size=mc["batch_size"], epochs=epochs,
                            seed=config.seed)
        train_total = time.perf_counter() - start
        baselines.train_sgd(model, reals, y, lr=mc["lr"],
                            batch_size=mc["batch_size"], epochs=1,
                            seed=config.seed)
        start = time.perf_counter()
        baselines.train_sgd(model, reals, y, lr=mc["lr"],
                            batch_size=mc["batch_size"], epochs=1,
                            seed=config.seed)
        train_epoch = time.perf_counter() - start
        eval_reals = prepared.eval_reals if len(prepared.eval_reals) else reals
        start = time.perf_counter()
        model.predict(eval_reals)
        test_pass = time.perf_counter() - start
    return train_total, train_epoch, test_pass


def run_scaling_suite(model_kind: str, log: dataset.InteractionLog,
                      item_counts=(8, 64, 512), epochs: int = 10,
                      config: pipeline.RunConfig | None = None) -> ScalingReport:
    """Train per top-k subset and normalize timings to the smallest k.

    The model width (for the MLP/LR) and all hyperparameters stay fixed
    across configurations; only the data and the class universe change.
    """
    item_counts = list(item_counts)
    if not item_counts:
        raise ConfigError("need at least one item count")
    if item_counts != sorted(item_counts) or len(set(item_counts)) != len(item_counts):
        raise ConfigError("item_counts must be strictly ascending")
    if log.n_transactions == 0:
        raise DataError("empty interaction log")
    if config is None:
        config = pipeline.RunConfig.load()
    if model_kind not in ("tm", "mlp", "lr"):
        raise ConfigError(f"cannot benchmark model kind {model_kind!r}")

    report = ScalingReport(
        model_kind, epochs, config.seed,
        _environment(config.seed, config["threads"]),
    )
    total_rows = log.n_transactions
    for k in item_counts:
        subset = dataset.topk_subset(log, k)
        sub_config = pipeline.RunConfig(
            pipeline._merge(config.doc, {
                "classes": k,
                "model": {"kind": model_kind},
            })
        )
        try:
            prepared = pipeline.prepare_from_log(subset, sub_config)
            model = pipeline.build_model(
                sub_config, prepared.X_train.shape[1],
                prepared.reals_train.shape[1], prepared.num_classes,
            )
        except DataError as exc:
            report.rows.append(ScalingRow(
                item_count=k, dataset_rows=subset.n_transactions,
                dataset_fraction=subset.n_transactions / total_rows,
                train_examples=0, num_classes=0,
                train_total_s=0.0, train_epoch_s=0.0, test_pass_s=0.0,
                skipped=str(exc),
            ))
            continue
        train_total, train_epoch, test_pass = _train_and_time(
            model, model_kind, prepared, epochs, sub_config,
        )
        report.rows.append(ScalingRow(
            item_count=k,
            dataset_rows=subset.n_transactions,
            dataset_fraction=subset.n_transactions / total_rows,
            train_examples=len(prepared.X_train),
            num_classes=prepared.num_classes,
            train_total_s=train_total,
            train_epoch_s=train_epoch,
            test_pass_s=test_pass,
        ))

    timed = [r for r in report.rows if r.skipped is None]
    if timed:
        base = timed[0]
        for r in timed:
            r.rel_train_total = r.train_total_s / base.train_total_s
            r.rel_train_epoch = r.train_epoch_s / base.train_epoch_s
            r.rel_test_pass = r.test_pass_s / base.test_pass_s
    return report


# -- backend comparison -----------------------------------------------------


@dataclass
class BackendRow:
    backend: str
    train_epoch_s: float
    predict_s: float
    speedup_vs_python: float
    states_match_reference: bool


@dataclass
class BackendReport:
    num_examples: int
    num_features: int
    num_classes: int
    clauses_per_class: int
    epochs: int
    rows: list[BackendRow] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "workload": {
                "num_examples": self.num_examples,
                "num_features": self.num_features,
                "num_classes": self.num_classes,
                "clauses_per_class": self.clauses_per_class,
                "epochs": self.epochs,
            },
            "rows": [asdict(r) for r in self.rows],
        }

    def render(self) -> str:
        headers = ["backend", "train_epoch", "predict", "speedup", "bit_identical"]
        lines = [headers]
        for r in self.rows:
            lines.append([
                r.backend, f"{r.train_epoch_s:.4f}s", f"{r.predict_s:.4f}s",
                f"{r.speedup_vs_python:.2f}x", str(r.states_match_reference),
            ])
        widths = [max(len(row[i]) for row in lines) for i in range(len(headers))]
        return "\n".join(
            "  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
            for row in lines
        )


def compare_backends(num_examples: int = 2000, num_features: int = 64,
                     num_classes: int = 10, clauses_per_class: int = 50,
                     epochs: int = 3, seed: int = 0) -> BackendReport:
    """Identical workload on every available backend, python as reference.

    Besides timing, verifies that each backend reproduces the reference
    trained states bit for bit (the parity contract of the kernels).
    """
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 2, size=(num_examples, num_features)).astype(np.uint8)
    y = rng.integers(0, num_classes, size=num_examples).astype(np.int64)
    cfg = TMConfig(num_features=num_features, num_classes=num_classes,
                   clauses_per_class=clauses_per_class, seed=seed)

    report = BackendReport(num_examples, num_features, num_classes,
                           clauses_per_class, epochs)
    reference_state = None
    times = {}
    for name in ("python", "cython"):
        if name not in available_backends():
            continue
        model = TsetlinMachine(cfg, backend=name)
        start = time.perf_counter()
        for _ in range(epochs):
            model.train_epoch(X, y)
        train_time = (time.perf_counter() - start) / epochs
        start = time.perf_counter()
        model.predict(X)
        predict_time = time.perf_counter() - start
        if reference_state is None:
            reference_state = model.ta_state.copy()
        times[name] = (train_time, predict_time,
                       bool(np.array_equal(model.ta_state, reference_state)))

    py_train = times.get("python", (np.nan,))[0]
    for name, (train_time, predict_time, match) in times.items():
        report.rows.append(BackendRow(
            backend=name,
            train_epoch_s=train_time,
            predict_s=predict_time,
            speedup_vs_python=py_train / train_time if train_time else float("nan"),
            states_match_reference=match,
        ))
    return report


def write_report_json(report, path) -> None:
    with open(path, "w") as fh:
        json.dump(report.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")
