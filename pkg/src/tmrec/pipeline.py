"""End-to-end stages gluing the modules into one pipeline.

prepare: split the log in time, factorize the training interactions,
fit the feature schema, and persist encoded train/evaluation artifacts
with content hashes.  train: fit the chosen model kind against those
artifacts.  evaluate: rank the class universe per test customer and
score MAP@k plus top-1 accuracy.  Stages communicate only through the
output directory, and every artifact is byte-deterministic for a fixed
config and seed, so reruns are verifiable by checksum.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import als, baselines, dataset, encoding, metrics
from .exceptions import ArtifactError, ConfigError, DataError
from .tm import TMConfig, TsetlinMachine

MODEL_KINDS = ("tm", "mlp", "lr", "popularity")

DEFAULTS = {
    "data": {},
    "cutoff_days": 30,
    "history_length": 7,
    "bins": 8,
    "latent": {
        "rank": 16,
        "regularization": 0.01,
        "confidence_alpha": 40.0,
        "sweeps": 15,
    },
    "classes": 400,
    "model": {
        "kind": "tm",
        "epochs": 10,
        "clauses_per_class": 200,
        "threshold": None,
        "specificity": 3.9,
        "states_per_action": 100,
        "lr": 0.05,
        "batch_size": 64,
        "hidden": [120, 110, 90, 80, 70],
    },
    "map_k": [1, 12, 100],
    "seed": 0,
    "threads": 1,
}


def _merge(base: dict, update: dict) -> dict:
    out = dict(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


@dataclass(frozen=True)
class RunConfig:
    """Resolved run settings: defaults, then config file, then overrides."""

    doc: dict

    @classmethod
    def load(cls, config_path=None, overrides: dict | None = None) -> "RunConfig":
        doc = DEFAULTS
        if config_path is not None:
            path = Path(config_path)
            if not path.exists():
                raise DataError(f"config file not found: {path}")
            try:
                doc = _merge(doc, json.loads(path.read_text()))
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        if overrides:
            doc = _merge(doc, overrides)
        cfg = cls(doc)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.model_kind not in MODEL_KINDS:
            raise ConfigError(
                f"model kind must be one of {MODEL_KINDS}, got {self.model_kind!r}"
            )
        if self["classes"] < 1:
            raise ConfigError("classes must be >= 1")
        if self["cutoff_days"] < 0:
            raise ConfigError("cutoff_days must be >= 0")
        if self["history_length"] < 1:
            raise ConfigError("history_length must be >= 1")
        if self["bins"] < 1:
            raise ConfigError("bins must be >= 1")
        if self["latent"]["rank"] < 0:
            raise ConfigError("latent rank must be >= 0")
        if not self["map_k"] or any(k < 1 for k in self["map_k"]):
            raise ConfigError("map_k entries must be >= 1")
        if self["threads"] < 1:
            raise ConfigError("threads must be >= 1")

    def __getitem__(self, key):
        return self.doc[key]

    @property
    def model_kind(self) -> str:
        return self.doc["model"]["kind"]

    @property
    def seed(self) -> int:
        return int(self.doc["seed"])

    def to_json(self) -> dict:
        return json.loads(json.dumps(self.doc))


def _dump_json(doc, path) -> None:
    Path(path).write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n"
    )


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# -- feature assembly -----------------------------------------------------


def build_schema(train_log: dataset.InteractionLog, history_length: int,
                 bins: int, factors: als.LatentFactors | None,
                 latent_bins: int | None = None) -> encoding.FeatureSchema:
    """Derive the schema from training-split tables and factor ranges."""

    def specs(table, id_column):
        out = []
        for column in table.columns:
            if column == id_column:
                continue
            series = table[column]
            if series.dtype.kind in "if":
                values = series.dropna()
                lo = float(values.min()) if len(values) else 0.0
                hi = float(values.max()) if len(values) else 1.0
                if not lo < hi:
                    hi = lo + 1.0
                out.append(encoding.ContinuousSpec(column, lo, hi, bins))
            else:
                vocab = tuple(sorted(series.dropna().astype(str).unique()))
                if not vocab:
                    vocab = ("",)
                out.append(encoding.CategoricalSpec(column, vocab))
        return tuple(out)

    if factors is None:
        return encoding.FeatureSchema(
            customer_features=specs(train_log.customers, "customer_id"),
            item_features=specs(train_log.items, "item_id"),
            history_length=history_length,
        )
    return encoding.FeatureSchema(
        customer_features=specs(train_log.customers, "customer_id"),
        item_features=specs(train_log.items, "item_id"),
        history_length=history_length,
        latent_rank=factors.rank,
        latent_bins=latent_bins or bins,
        user_latent_min=tuple(factors.user_factors.min(axis=0)),
        user_latent_max=tuple(factors.user_factors.max(axis=0)),
        item_latent_min=tuple(factors.item_factors.min(axis=0)),
        item_latent_max=tuple(factors.item_factors.max(axis=0)),
    )


def _clean_record(record: dict, specs) -> dict:
    """Replace missing values: PAD for categoricals, range midpoint else."""
    out = dict(record)
    for spec in specs:
        value = out.get(spec.name)
        if isinstance(spec, encoding.CategoricalSpec):
            if value is None or (isinstance(value, float) and np.isnan(value)):
                out[spec.name] = encoding.PAD
            else:
                out[spec.name] = str(value)
        else:
            try:
                finite = value is not None and np.isfinite(float(value))
            except (TypeError, ValueError):
                finite = False
            if not finite:
                out[spec.name] = (spec.minimum + spec.maximum) / 2.0
    return out


@dataclass
class PreparedData:
    """Everything the train and evaluate stages need, in memory."""

    schema: encoding.FeatureSchema
    universe: list            # class index -> item id
    X_train: np.ndarray       # uint8 (examples, bits)
    y_train: np.ndarray       # int64 class indexes
    reals_train: np.ndarray   # float64, normalized
    normalizer: encoding.Normalizer
    eval_X: np.ndarray        # one row per evaluated customer
    eval_reals: np.ndarray
    eval_customers: list
    eval_relevant: list[list[int]]  # class indexes per customer
    excluded_test_rows: int   # test purchases outside the class universe
    factors: als.LatentFactors | None = None

    @property
    def num_classes(self) -> int:
        return len(self.universe)


def _customer_histories(transactions):
    """Per customer, the date-ordered list of purchased item ids."""
    ordered = transactions.sort_values("date", kind="stable")
    return {
        cid: list(group["item_id"])
        for cid, group in ordered.groupby("customer_id", sort=True)
    }


def prepare_from_log(log: dataset.InteractionLog, config: RunConfig) -> PreparedData:
    split = dataset.temporal_split(log, config["cutoff_days"])
    if split.train.n_transactions == 0:
        raise DataError("training split is empty; lower cutoff_days")

    factors = None
    if config["latent"]["rank"] > 0:
        als_config = als.ALSConfig(
            rank=config["latent"]["rank"],
            regularization=config["latent"]["regularization"],
            confidence_alpha=config["latent"]["confidence_alpha"],
            sweeps=config["latent"]["sweeps"],
            seed=config.seed,
        )
        pairs = list(zip(split.train.transactions["customer_id"],
                         split.train.transactions["item_id"]))
        factors = als.fit_als(pairs, als_config)

    schema = build_schema(split.train, config["history_length"],
                          config["bins"], factors)
    universe = dataset.top_items(split.train, config["classes"])
    class_of = {item: idx for idx, item in enumerate(universe)}

    def assemble_input(customer_id, history_items):
        record = _clean_record(log.customer_record(customer_id),
                               schema.customer_features)
        history = [
            _clean_record(log.item_record(iid), schema.item_features)
            | {"item_id": iid}
            for iid in history_items
        ]
        return encoding.assemble(record, history, factors, schema, strict=False)

    # one training example per transaction in the class universe, the
    # history being the customer's prior purchases, most recent first
    train_hist = _customer_histories(split.train.transactions)
    bits_rows, real_rows, labels = [], [], []
    for cid in sorted(train_hist):
        items = train_hist[cid]
        for t, item in enumerate(items):
            label = class_of.get(item)
            if label is None:
                continue
            assembled = assemble_input(cid, items[:t][::-1])
            bits_rows.append(assembled.bits)
            real_rows.append(assembled.reals)
            labels.append(label)
    if not bits_rows:
        raise DataError("no training examples fall inside the class universe")
    X_train = np.stack(bits_rows)
    raw_reals = np.stack(real_rows)
    y_train = np.asarray(labels, dtype=np.int64)
    normalizer = encoding.Normalizer.fit(raw_reals)
    reals_train = normalizer.apply(raw_reals)

    # evaluation: one ranking per customer with test purchases, from the
    # history they had at the end of the training window
    test_by_customer = _customer_histories(split.test.transactions)
    eval_bits, eval_reals_rows, eval_customers, eval_relevant = [], [], [], []
    excluded = 0
    for cid in sorted(test_by_customer):
        purchases = test_by_customer[cid]
        relevant = sorted({class_of[i] for i in purchases if i in class_of})
        excluded += sum(1 for i in purchases if i not in class_of)
        history = train_hist.get(cid, [])[::-1]
        assembled = assemble_input(cid, history)
        eval_bits.append(assembled.bits)
        eval_reals_rows.append(assembled.reals)
        eval_customers.append(cid)
        eval_relevant.append(relevant)
    if eval_bits:
        eval_X = np.stack(eval_bits)
        eval_reals = normalizer.apply(np.stack(eval_reals_rows))
    else:
        eval_X = np.zeros((0, schema.total_bits), dtype=np.uint8)
        eval_reals = np.zeros((0, schema.total_reals))

    return PreparedData(
        schema, universe, X_train, y_train, reals_train, normalizer,
        eval_X, eval_reals, eval_customers, eval_relevant, excluded, factors,
    )


# -- on-disk artifact layout ------------------------------------------------

PREPARED_DIR = "prepared"


def _schema_hash(schema_doc: dict) -> str:
    blob = json.dumps(schema_doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def load_log(config: RunConfig) -> dataset.InteractionLog:
    data = config["data"]
    if "synthetic" in data:
        spec_doc = dict(data["synthetic"])
        rules = tuple(
            dataset.PlantedRule(
                tuple((int(f), int(b)) for f, b in rule["conditions"]),
                int(rule["item"]),
            )
            for rule in spec_doc.pop("planted_rules", [])
        )
        spec = dataset.SyntheticSpec(planted_rules=rules, **spec_doc)
        log, _ = dataset.generate_synthetic(spec)
        return log
    for key in ("transactions", "customers", "articles"):
        if key not in data:
            raise ConfigError(f"data section needs {key!r} (or a synthetic spec)")
    return dataset.load_tables(
        data["transactions"], data["customers"], data["articles"]
    )


def run_prepare(config: RunConfig, outdir) -> dict:
    outdir = Path(outdir)
    prep_dir = outdir / PREPARED_DIR
    prep_dir.mkdir(parents=True, exist_ok=True)

    log = load_log(config)
    prepared = prepare_from_log(log, config)

    schema_doc = prepared.schema.to_json()
    _dump_json(schema_doc, prep_dir / "schema.json")
    _dump_json({"items": list(prepared.universe)}, prep_dir / "universe.json")
    _dump_json(prepared.normalizer.to_json(), prep_dir / "normalizer.json")
    np.save(prep_dir / "train_X.npy", prepared.X_train)
    np.save(prep_dir / "train_y.npy", prepared.y_train)
    np.save(prep_dir / "train_reals.npy", prepared.reals_train)
    np.save(prep_dir / "eval_X.npy", prepared.eval_X)
    np.save(prep_dir / "eval_reals.npy", prepared.eval_reals)
    _dump_json(
        {
            "customers": list(prepared.eval_customers),
            "relevant": [list(r) for r in prepared.eval_relevant],
            "excluded_test_rows": prepared.excluded_test_rows,
        },
        prep_dir / "evaluation.json",
    )
    if prepared.factors is not None:
        prepared.factors.save(prep_dir / "factors.bin")

    files = sorted(p.name for p in prep_dir.iterdir() if p.name != "manifest.json")
    manifest = {
        "schema_hash": _schema_hash(schema_doc),
        "config": config.to_json(),
        "checksums": {name: _sha256(prep_dir / name) for name in files},
    }
    _dump_json(manifest, prep_dir / "manifest.json")
    _dump_json(config.to_json(), outdir / "config.json")
    return manifest


class StoredData:
    """Read-back view of the prepared artifacts."""

    def __init__(self, outdir):
        prep_dir = Path(outdir) / PREPARED_DIR
        manifest_path = prep_dir / "manifest.json"
        if not manifest_path.exists():
            raise ArtifactError(f"no prepared artifacts under {prep_dir}")
        self.manifest = json.loads(manifest_path.read_text())
        schema_doc = json.loads((prep_dir / "schema.json").read_text())
        if _schema_hash(schema_doc) != self.manifest["schema_hash"]:
            raise ArtifactError("schema.json does not match its recorded hash")
        self.schema = encoding.FeatureSchema.from_json(schema_doc)
        self.schema_hash = self.manifest["schema_hash"]
        self.universe = json.loads((prep_dir / "universe.json").read_text())["items"]
        self.normalizer = encoding.Normalizer.from_json(
            json.loads((prep_dir / "normalizer.json").read_text())
        )
        self.X_train = np.load(prep_dir / "train_X.npy")
        self.y_train = np.load(prep_dir / "train_y.npy")
        self.reals_train = np.load(prep_dir / "train_reals.npy")
        self.eval_X = np.load(prep_dir / "eval_X.npy")
        self.eval_reals = np.load(prep_dir / "eval_reals.npy")
        evaluation = json.loads((prep_dir / "evaluation.json").read_text())
        self.eval_customers = evaluation["customers"]
        self.eval_relevant = evaluation["relevant"]
        self.excluded_test_rows = evaluation["excluded_test_rows"]

    @property
    def num_classes(self) -> int:
        return len(self.universe)


def build_model(config: RunConfig, num_features_bits: int,
                num_reals: int, num_classes: int):
    kind = config.model_kind
    mc = config["model"]
    if kind == "tm":
        return TsetlinMachine(TMConfig(
            num_features=num_features_bits,
            num_classes=num_classes,
            clauses_per_class=mc["clauses_per_class"],
            threshold=mc["threshold"],
            specificity=mc["specificity"],
            states_per_action=mc["states_per_action"],
            seed=config.seed,
        ))
    if kind == "mlp":
        return baselines.mlp_init(num_reals, num_classes,
                                  hidden=tuple(mc["hidden"]), seed=config.seed)
    if kind == "lr":
        return baselines.lr_init(num_reals, num_classes)
    raise ConfigError(f"no trainable model for kind {kind!r}")


def run_train(config: RunConfig, outdir) -> dict:
    outdir = Path(outdir)
    stored = StoredData(outdir)
    kind = config.model_kind
    mc = config["model"]
    epochs = int(mc["epochs"])
    log_lines = []

    if kind == "popularity":
        counts = np.bincount(stored.y_train, minlength=stored.num_classes)
        order = np.lexsort((np.arange(stored.num_classes), -counts))
        model = baselines.PopularityModel(order.tolist())
        log_lines.append({"event": "ranked", "classes": stored.num_classes})
    elif kind == "tm":
        model = build_model(config, stored.X_train.shape[1],
                            stored.reals_train.shape[1], stored.num_classes)
        for epoch in range(epochs):
            stats = model.train_epoch(stored.X_train, stored.y_train)
            acc = float((model.predict(stored.X_train) == stored.y_train).mean())
            log_lines.append({
                "epoch": epoch,
                "type_i_events": stats.type_i_events,
                "type_ii_events": stats.type_ii_events,
                "train_accuracy": acc,
            })
    else:
        model = build_model(config, stored.X_train.shape[1],
                            stored.reals_train.shape[1], stored.num_classes)
        curve = baselines.train_sgd(
            model, stored.reals_train, stored.y_train,
            lr=mc["lr"], batch_size=mc["batch_size"],
            epochs=epochs, seed=config.seed,
        )
        acc = float((model.predict(stored.reals_train) == stored.y_train).mean())
        log_lines = [{"epoch": i, "loss": loss} for i, loss in enumerate(curve)]
        log_lines.append({"event": "final", "train_accuracy": acc})

    model_path = outdir / f"model_{kind}.bin"
    model.save(model_path)
    meta = {
        "kind": kind,
        "schema_hash": stored.schema_hash,
        "num_classes": stored.num_classes,
        "model_file": model_path.name,
        "model_sha256": _sha256(model_path),
    }
    _dump_json(meta, outdir / "model_meta.json")
    with open(outdir / "train_log.jsonl", "w") as fh:
        for line in log_lines:
            fh.write(json.dumps(line, sort_keys=True) + "\n")
    return meta


def load_model(outdir, kind: str):
    path = Path(outdir) / f"model_{kind}.bin"
    if not path.exists():
        raise ArtifactError(f"model artifact missing: {path}")
    if kind == "tm":
        return TsetlinMachine.load(path)
    if kind == "mlp":
        return baselines.MLPModel.load(path)
    if kind == "lr":
        return baselines.LRModel.load(path)
    if kind == "popularity":
        return baselines.PopularityModel.load(path)
    raise ConfigError(f"unknown model kind {kind!r}")


def _rank_all(model, kind, eval_X, eval_reals, k: int) -> np.ndarray:
    if kind == "tm":
        return model.rank_classes_batch(eval_X, k)
    if kind == "popularity":
        top = model.rank_classes(k=k)
        return np.tile(top, (len(eval_X), 1))
    probs = model.forward(eval_reals)
    idx = np.arange(probs.shape[1])
    return np.stack([np.lexsort((idx, -row))[:k] for row in probs])


def run_evaluate(config: RunConfig, outdir) -> dict:
    outdir = Path(outdir)
    stored = StoredData(outdir)
    meta_path = outdir / "model_meta.json"
    if not meta_path.exists():
        raise ArtifactError(f"no trained model metadata under {outdir}")
    meta = json.loads(meta_path.read_text())
    if meta["schema_hash"] != stored.schema_hash:
        raise ArtifactError("model was trained against a different schema")
    if meta["num_classes"] != stored.num_classes:
        raise ArtifactError("model class universe does not match the artifacts")
    kind = meta["kind"]
    model = load_model(outdir, kind)

    if len(stored.eval_X) == 0:
        raise DataError("no test customers to evaluate")
    ks = [int(k) for k in config["map_k"]]
    max_k = min(max(ks), stored.num_classes)
    rankings = _rank_all(model, kind, stored.eval_X, stored.eval_reals, max_k)

    predictions = [
        metrics.RankedPrediction(cid, ranking.tolist(), relevant)
        for cid, ranking, relevant in zip(
            stored.eval_customers, rankings, stored.eval_relevant
        )
    ]
    # a ranking can never exceed the class universe, so AP@k with k beyond
    # num_classes equals AP over the whole ranking; the label keeps the
    # requested k
    table = metrics.MetricTable(model=kind)
    for k in ks:
        table.maps.append(metrics.map_at_k(predictions, k))
    scored = [p for p in predictions if p.relevant_items]
    hits = [1 if p.ranked_items[0] in p.relevant_items else 0 for p in scored]
    table.accuracy = float(np.mean(hits))

    report = table.to_json()
    report["requested_ks"] = ks
    report["excluded_test_rows"] = stored.excluded_test_rows
    _dump_json(report, outdir / "report.json")
    (outdir / "report.txt").write_text(table.render() + "\n")
    return report
