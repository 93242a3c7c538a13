"""Command-line front end.

Subcommands mirror the pipeline stages: synth (write a synthetic CSV
dataset), prepare (split, factorize, encode), train, evaluate, explain
(clause introspection and Shapley attributions), bench (scaling and
backend timing).  Every run persists its resolved configuration, and
reruns with the same config and seed produce byte-identical artifacts.

Exit codes: 0 success, 1 usage, 2 unusable input or data, 3 artifact
incompatibility.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bench, dataset, explain, pipeline
from .exceptions import ArtifactError, ConfigError, FormatError, TmrecError

USAGE_EXIT = 1
DATA_EXIT = 2
ARTIFACT_EXIT = 3


class _Parser(argparse.ArgumentParser):
    """argparse defaults to exit code 2 on usage errors; we reserve 2 for
    data problems, so usage errors exit 1 instead."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_EXIT, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    try:
        values = [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated integers, got {text!r}"
        ) from None
    if not values:
        raise argparse.ArgumentTypeError("expected at least one integer")
    return values


def _parse_rule(text: str) -> dict:
    """Parse 'x0=1&x3=0->5' into a planted-rule document."""
    try:
        lhs, rhs = text.split("->")
        conditions = []
        for clause in lhs.split("&"):
            name, bit = clause.strip().split("=")
            if not name.startswith("x"):
                raise ValueError(name)
            conditions.append((int(name[1:]), int(bit)))
        return {"conditions": conditions, "item": int(rhs)}
    except (ValueError, IndexError):
        raise argparse.ArgumentTypeError(
            f"rules look like 'x0=1&x3=0->5', got {text!r}"
        ) from None


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, help="master seed override")
    parser.add_argument("--threads", type=int,
                        help="thread count (recorded; kernels are single-threaded)")
    parser.add_argument("--model", choices=pipeline.MODEL_KINDS,
                        help="model kind override")
    parser.add_argument("--classes", type=int, help="class-universe size")
    parser.add_argument("--map-k", type=_int_list, metavar="K1,K2,...",
                        help="MAP cutoffs, e.g. 1,12,100")
    parser.add_argument("--transactions", help="transactions CSV path")
    parser.add_argument("--customers", help="customers CSV path")
    parser.add_argument("--articles", help="articles CSV path")


def _overrides(args) -> dict:
    doc: dict = {}
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.threads is not None:
        doc["threads"] = args.threads
    if getattr(args, "model", None) is not None:
        doc.setdefault("model", {})["kind"] = args.model
    if getattr(args, "epochs", None) is not None:
        doc.setdefault("model", {})["epochs"] = args.epochs
    if args.classes is not None:
        doc["classes"] = args.classes
    if args.map_k is not None:
        doc["map_k"] = args.map_k
    data = {}
    for key in ("transactions", "customers", "articles"):
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    if data:
        doc["data"] = data
    return doc


def _load_config(args) -> pipeline.RunConfig:
    return pipeline.RunConfig.load(args.config, _overrides(args))


def build_parser() -> _Parser:
    parser = _Parser(prog="tmrec", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic CSV dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--customers", type=int, default=200)
    p.add_argument("--items", type=int, default=50)
    p.add_argument("--features", type=int, default=12)
    p.add_argument("--purchases", type=int, default=12)
    p.add_argument("--days-between", type=int, default=5)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rule", type=_parse_rule, action="append", default=[],
                   help="planted rule like 'x0=1&x3=0->5' (repeatable)")
    p.add_argument("--auto-rules", type=int, default=0,
                   help="additionally generate this many random rules")

    p = sub.add_parser("prepare", help="split, factorize, and encode")
    _common_flags(p)

    p = sub.add_parser("train", help="train the configured model")
    _common_flags(p)
    p.add_argument("--epochs", type=int, help="training epochs override")

    p = sub.add_parser("evaluate", help="rank and score the test customers")
    _common_flags(p)

    p = sub.add_parser("explain", help="write explanation artifacts")
    _common_flags(p)
    p.add_argument("--class-id", type=int, default=0,
                   help="class for the clause inclusion matrix")
    p.add_argument("--input-index", type=_int_list, default=[0],
                   metavar="I1,I2,...", help="evaluation rows to explain")
    p.add_argument("--permutations", type=int, default=200)
    p.add_argument("--background", type=int, default=100)
    p.add_argument("--top-m", type=int, default=10)

    p = sub.add_parser("bench", help="scaling suite or backend comparison")
    _common_flags(p)
    p.add_argument("--items", type=_int_list, default=[8, 64, 512],
                   metavar="K1,K2,...", help="top-k item subset sizes")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--backends", action="store_true",
                   help="compare compute backends instead of dataset scaling")

    return parser


# -- subcommand bodies -----------------------------------------------------


def _cmd_synth(args) -> int:
    rules = [dict(r) for r in args.rule]
    if args.auto_rules:
        rng = np.random.default_rng(args.seed + 1)
        for r in range(args.auto_rules):
            width = int(rng.integers(2, 4))
            feats = rng.choice(args.features, size=width, replace=False)
            rules.append({
                "conditions": [(int(f), int(rng.integers(2))) for f in feats],
                "item": r % args.items,
            })
    spec = dataset.SyntheticSpec(
        num_customers=args.customers,
        num_items=args.items,
        num_features=args.features,
        planted_rules=tuple(
            dataset.PlantedRule(tuple((f, b) for f, b in r["conditions"]), r["item"])
            for r in rules
        ),
        noise_rate=args.noise,
        purchases_per_customer=args.purchases,
        days_between_purchases=args.days_between,
        seed=args.seed,
    )
    log, truth = dataset.generate_synthetic(spec)
    paths = dataset.export_csv_dir(log, args.out)
    truth.to_csv(Path(args.out) / "ground_truth.csv", index=False)
    for name, path in paths.items():
        print(f"{name}: {path}")
    print(f"ground_truth: {Path(args.out) / 'ground_truth.csv'}")
    return 0


def _cmd_prepare(args) -> int:
    config = _load_config(args)
    manifest = pipeline.run_prepare(config, args.out)
    print(f"prepared {len(manifest['checksums'])} artifacts under "
          f"{Path(args.out) / pipeline.PREPARED_DIR}")
    return 0


def _cmd_train(args) -> int:
    config = _load_config(args)
    meta = pipeline.run_train(config, args.out)
    print(f"trained {meta['kind']} model -> {Path(args.out) / meta['model_file']}")
    return 0


def _cmd_evaluate(args) -> int:
    config = _load_config(args)
    report = pipeline.run_evaluate(config, args.out)
    print((Path(args.out) / "report.txt").read_text(), end="")
    for k, doc in sorted(report["map"].items(), key=lambda kv: int(kv[0])):
        print(f"MAP@{k} = {doc['map']:.4f} "
              f"({doc['scored_users']} scored, {doc['skipped_users']} skipped)")
    return 0


def _tm_scorer(model, class_id):
    return lambda rows: model.class_scores(rows.astype(np.uint8))[:, class_id]


def _cmd_explain(args) -> int:
    config = _load_config(args)
    outdir = Path(args.out)
    stored = pipeline.StoredData(outdir)
    meta_path = outdir / "model_meta.json"
    if not meta_path.exists():
        raise ArtifactError(f"no trained model metadata under {outdir}")
    meta = json.loads(meta_path.read_text())
    if meta["schema_hash"] != stored.schema_hash:
        raise ArtifactError("model was trained against a different schema")
    kind = meta["kind"]
    model = pipeline.load_model(outdir, kind)
    exp_dir = outdir / "explain"
    exp_dir.mkdir(parents=True, exist_ok=True)

    if len(stored.eval_X) == 0:
        raise ConfigError("no evaluation inputs to explain")
    indices = [i for i in args.input_index]
    for i in indices:
        if not 0 <= i < len(stored.eval_X):
            raise ConfigError(f"input index {i} out of range "
                              f"[0, {len(stored.eval_X)})")

    rng = np.random.default_rng(config.seed)
    names = stored.schema.bit_feature_names()
    written = []

    if kind == "tm":
        matrix = explain.clause_inclusion_matrix(model, args.class_id)
        explain.write_json(
            {"class_id": matrix.class_id, "pairs": matrix.to_pairs()},
            exp_dir / f"clause_matrix_class{args.class_id}.json",
        )
        written.append(f"clause_matrix_class{args.class_id}.json")
        stats = explain.inclusion_stats(model)
        explain.write_json(stats.to_json(), exp_dir / "inclusion_stats.json")
        written.append("inclusion_stats.json")
        for i in indices:
            result = explain.explain_prediction(
                model, stored.eval_X[i], feature_names=names,
                counterfactual_budget=min(64, model.config.num_features),
            )
            explain.write_json(
                {
                    "input_index": i,
                    "predicted_class": result.predicted_class,
                    "predicted_item": stored.universe[result.predicted_class],
                    "ranked": list(result.ranked),
                    "contributions": {
                        str(c): [vars(contrib) for contrib in contribs]
                        for c, contribs in result.contributions.items()
                    },
                    "counterfactuals": [vars(n) for n in result.counterfactuals],
                },
                exp_dir / f"prediction_{i}.json",
            )
            written.append(f"prediction_{i}.json")

    if kind == "popularity":
        raise ConfigError("the popularity ranker has nothing to explain")

    # model-agnostic attributions for every requested input
    pick = rng.choice(len(stored.X_train),
                      size=min(args.background, len(stored.X_train)),
                      replace=False)
    reports = []
    for i in indices:
        if kind == "tm":
            x = stored.eval_X[i]
            background = stored.X_train[pick]
            class_id = int(model.predict(x))
            scorer = _tm_scorer(model, class_id)
        else:
            x = stored.eval_reals[i]
            background = stored.reals_train[pick]
            class_id = int(model.predict(x))
            scorer = lambda rows, c=class_id: model.forward(rows)[:, c]
        report = explain.shapley_attribute(
            scorer, background, x, n_permutations=args.permutations,
            seed=config.seed, class_id=None,
        )
        reports.append(report)
        doc = report.to_json()
        doc["input_index"] = i
        doc["class_id"] = class_id
        explain.write_json(doc, exp_dir / f"shapley_{kind}_{i}.json")
        written.append(f"shapley_{kind}_{i}.json")

    rows = explain.beeswarm_export(reports, args.top_m)
    explain.write_beeswarm_csv(rows, exp_dir / "beeswarm.csv")
    written.append("beeswarm.csv")
    for name in written:
        print(f"wrote {exp_dir / name}")
    return 0


def _cmd_bench(args) -> int:
    config = _load_config(args)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    if args.backends:
        report = bench.compare_backends(seed=config.seed)
        bench.write_report_json(report, outdir / "backend_report.json")
        text = report.render()
        (outdir / "backend_report.txt").write_text(text + "\n")
        print(text)
        return 0
    log = pipeline.load_log(config)
    kind = config.model_kind if config.model_kind != "popularity" else "tm"
    report = bench.run_scaling_suite(kind, log, args.items,
                                     epochs=args.epochs, config=config)
    bench.write_report_json(report, outdir / "scaling_report.json")
    text = report.render()
    (outdir / "scaling_report.txt").write_text(text + "\n")
    print(text)
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "prepare": _cmd_prepare,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "explain": _cmd_explain,
    "bench": _cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits; surface the code instead
        return exc.code if isinstance(exc.code, int) else USAGE_EXIT
    try:
        return _COMMANDS[args.command](args)
    except (ArtifactError, FormatError) as exc:
        print(f"tmrec {args.command}: {exc}", file=sys.stderr)
        return ARTIFACT_EXIT
    except (TmrecError, OSError) as exc:
        print(f"tmrec {args.command}: {exc}", file=sys.stderr)
        return DATA_EXIT


if __name__ == "__main__":
    sys.exit(main())
