"""Command-line entry point wiring the pipeline stages together.

Subcommands: synth, derive, segment, train, eval, run.  Exit codes:
0 success, 2 schema/config error, 3 data error, 4 internal error.  The
CHURNSEG_THREADS environment variable caps worker parallelism; the current
implementation evaluates sequentially, which trivially respects any cap.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from datetime import date
from pathlib import Path

import numpy as np
import pandas as pd
from sklearn.base import clone

from . import __version__
from .bayes import NaiveBayesClassifier
from .evaluation import (
    EmptyEvaluationError,
    FoldTooSmallError,
    LengthMismatchError,
    ProtocolConfig,
    cross_validation_protocol,
    format_report,
    full_trainingset_protocol,
    percentage_split_protocol,
    prc_curve_points,
    report_to_dict,
    roc_curve_points,
)
from .features import NegativeServiceError, derive_frame, profile_row, derive_profile
from .ingest import (
    SchemaError,
    errors_to_json,
    parse_csv,
    raw_billing_schema,
    record_to_row,
    window_months,
    write_csv,
)
from .modelio import load_model, save_model
from .rules import ACCOUNT_CLASS_ORDER, segment_frame
from .synth import (
    GeneratorConfig,
    InfeasibleConfigError,
    config_from_json,
    generate,
    load_config,
    write_truth,
)
from .tabular import DegenerateDataError
from .tree import DecisionTreeClassifier

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4

_CONFIG_ERRORS = (SchemaError, InfeasibleConfigError)
_DATA_ERRORS = (
    DegenerateDataError,
    EmptyEvaluationError,
    FoldTooSmallError,
    LengthMismatchError,
    NegativeServiceError,
    FileNotFoundError,
)


def _max_threads() -> int:
    raw = os.environ.get("CHURNSEG_THREADS")
    if raw is None:
        return 0
    try:
        value = int(raw)
    except ValueError:
        raise SchemaError(f"CHURNSEG_THREADS must be an integer, got {raw!r}") from None
    if value < 1:
        raise SchemaError(f"CHURNSEG_THREADS must be >= 1, got {value}")
    return value


def _parse_seeds(text: str) -> tuple[int, ...]:
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(int(p) for p in text.split(",") if p.strip())


def _read_table(path: str) -> pd.DataFrame:
    if not Path(path).exists():
        raise FileNotFoundError(f"input file not found: {path}")
    # Only empty cells are missing; tokens like "#N/A" are real categories.
    return pd.read_csv(
        path, dtype={"account_id": str}, keep_default_na=False, na_values=[""]
    )


def _feature_matrix(frame: pd.DataFrame, class_column: str, exclude: list[str]):
    if class_column not in frame.columns:
        raise SchemaError(f"class column {class_column!r} not found in input")
    drop = set(exclude) | {class_column}
    drop.add("account_id")
    missing = [c for c in exclude if c not in frame.columns]
    if missing:
        raise SchemaError(f"--exclude names unknown columns: {missing}")
    labelled = frame[~pd.isna(frame[class_column])]
    n_dropped = len(frame) - len(labelled)
    if n_dropped:
        print(f"note: skipped {n_dropped} rows without a class label", file=sys.stderr)
    X = labelled[[c for c in labelled.columns if c not in drop]]
    y = labelled[class_column].astype(str).to_numpy()
    return X, y


def _report_classes(y) -> tuple[str, ...] | None:
    present = set(map(str, y))
    canonical = tuple(c.value for c in ACCOUNT_CLASS_ORDER)
    if present == set(canonical):
        return canonical
    return None


# -- subcommand handlers -------------------------------------------------------


def _cmd_synth(args) -> int:
    if args.config:
        config = load_config(
            args.config, n_rows=args.rows, seed=args.seed, label_noise=args.noise
        )
    else:
        config = GeneratorConfig(n_rows=args.rows, seed=args.seed, label_noise=args.noise)
    records, truth = generate(config)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        write_csv(records, fh, config.months)
    if args.truth:
        with open(args.truth, "w", encoding="utf-8", newline="") as fh:
            write_truth(truth, records, fh)
    print(json.dumps({"rows": len(records), "seed": config.seed, "out": args.out}))
    return EXIT_OK


def _load_records(path: str, errors_out: str | None):
    if not Path(path).exists():
        raise FileNotFoundError(f"input file not found: {path}")
    with open(path, "r", encoding="utf-8", newline="") as fh:
        header = fh.readline().strip("\n\r")
        months = sum(1 for c in header.split(",") if c.startswith("inv_"))
        fh.seek(0)
        schema = raw_billing_schema(months if months else 1)
        records, errors = parse_csv(fh, schema)
    if errors_out:
        Path(errors_out).write_text(errors_to_json(errors), encoding="utf-8")
    if errors:
        print(f"note: {len(errors)} rows failed to parse", file=sys.stderr)
    return records, months


def _cmd_derive(args) -> int:
    records, months = _load_records(getattr(args, "in"), args.errors_out)
    today = date.fromisoformat(args.today)
    schema = raw_billing_schema(months)
    profile_cols = list(derive_frame([], today).columns)[1:]
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(schema.column_names) + profile_cols)
        for record in records:
            row = record_to_row(record, months)
            profile = profile_row(derive_profile(record, today))
            for col in profile_cols:
                v = profile[col]
                if col == "avg_invoice":
                    row.append(f"{v:.6f}")
                elif col == "total_invoice_excl_bf":
                    row.append(f"{v:.2f}")
                else:
                    row.append(str(v))
            writer.writerow(row)
    print(json.dumps({"rows": len(records), "out": args.out}))
    return EXIT_OK


def _cmd_segment(args) -> int:
    frame = _read_table(getattr(args, "in"))
    try:
        out, summary = segment_frame(frame)
    except KeyError as exc:
        raise SchemaError(str(exc)) from None
    out.to_csv(args.out, index=False, lineterminator="\n", float_format="%.6f")
    print(json.dumps(summary))
    return EXIT_OK


def _build_learner(kind: str, args):
    if kind == "c45":
        return DecisionTreeClassifier(
            min_leaf_instances=args.min_leaf,
            pruning_confidence=args.confidence,
            use_pruning=not args.no_prune,
        )
    if kind == "nb":
        return NaiveBayesClassifier()
    raise SchemaError(f"unknown model kind: {kind!r}")


def _cmd_train(args) -> int:
    frame = _read_table(getattr(args, "in"))
    exclude = [c for c in (args.exclude.split(",") if args.exclude else []) if c]
    X, y = _feature_matrix(frame, getattr(args, "class"), exclude)
    learner = _build_learner(args.model, args)
    learner.fit(X, y)
    save_model(learner, args.out)
    print(json.dumps({"model": args.model, "rows": len(X), "out": args.out}))
    return EXIT_OK


def _cmd_eval(args) -> int:
    frame = _read_table(getattr(args, "in"))
    exclude = [c for c in (args.exclude.split(",") if args.exclude else []) if c]
    X, y = _feature_matrix(frame, getattr(args, "class"), exclude)
    learner = _build_learner(args.model_type, args)
    classes = _report_classes(y)
    seeds = _parse_seeds(args.seeds)

    curves_rows = []
    if args.mode == "split":
        config = ProtocolConfig(
            mode="percentage_split", split_fraction=args.split, seeds=seeds
        )
        result = percentage_split_protocol(X, y, learner, config, classes=classes)
        text_blocks = [
            format_report(r, include_timing=args.timings) for r in result.reports
        ]
        text_blocks.append(
            f"Sample mean of correctly classified %:  {result.accuracy_mean:.4f}\n"
            f"Sample std dev of correctly classified %: {result.accuracy_std:.4f}\n"
        )
        text = "\n".join(text_blocks)
        payload = {
            "mode": "split",
            "reports": [report_to_dict(r, args.timings) for r in result.reports],
            "accuracy_mean_pct": result.accuracy_mean,
            "accuracy_std_pct": result.accuracy_std,
        }
        final_report = result.reports[-1]
    elif args.mode == "cv":
        config = ProtocolConfig(
            mode="cross_validation", folds=args.folds, seeds=seeds
        )
        result = cross_validation_protocol(X, y, learner, config, classes=classes)
        text = format_report(result.pooled_report, include_timing=args.timings)
        payload = {
            "mode": "cv",
            "folds": [report_to_dict(r, args.timings) for r in result.fold_reports],
            "pooled": report_to_dict(result.pooled_report, args.timings),
        }
        final_report = result.pooled_report
    elif args.mode == "full":
        report = full_trainingset_protocol(X, y, learner, classes=classes)
        text = format_report(report, include_timing=args.timings)
        payload = {"mode": "full", "report": report_to_dict(report, args.timings)}
        final_report = report
    else:
        raise SchemaError(f"unknown eval mode: {args.mode!r}")

    if args.report:
        Path(args.report).write_text(text, encoding="utf-8")
    if args.json:
        Path(args.json).write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    if args.curves_out:
        _emit_curves(args.curves_out, X, y, learner, final_report, args, seeds)
    print(
        json.dumps(
            {
                "mode": args.mode,
                "model": args.model_type,
                "accuracy_pct": final_report.correct_pct,
            }
        )
    )
    return EXIT_OK


def _emit_curves(path, X, y, learner, report, args, seeds) -> None:
    """ROC/PRC coordinates per class, long CSV format (for external plots).

    Computed from a single seeded holdout so the coordinates correspond to
    one concrete model rather than pooled folds.
    """
    classes = tuple(sorted(set(map(str, y))))
    rng = np.random.default_rng(seeds[0])
    perm = rng.permutation(len(y))
    n_train = max(1, min(int(round(args.split * len(y))), len(y) - 1))
    train_idx, test_idx = perm[:n_train], perm[n_train:]
    y = np.asarray([str(v) for v in y], dtype=object)
    model = clone(learner)
    model.fit(X.iloc[train_idx], y[train_idx])
    proba = model.predict_proba(X.iloc[test_idx])
    model_classes = [str(c) for c in model.classes_]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("class,curve,x,y\n")
        for cls in classes:
            if cls not in model_classes:
                continue
            scores = proba[:, model_classes.index(cls)]
            positives = y[test_idx] == cls
            for x_val, y_val in roc_curve_points(positives, scores):
                fh.write(f"{cls},roc,{x_val:.6f},{y_val:.6f}\n")
            for x_val, y_val in prc_curve_points(positives, scores):
                fh.write(f"{cls},prc,{x_val:.6f},{y_val:.6f}\n")


# -- pipeline manifests --------------------------------------------------------

_STEP_OUTPUT_FLAGS = {
    "synth": ("out", "truth"),
    "derive": ("out", "errors-out"),
    "segment": ("out",),
    "train": ("out",),
    "eval": ("report", "json", "curves-out"),
}


def _sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _step_to_argv(step: dict) -> list[str]:
    argv = [step["name"]]
    for key, value in step.get("args", {}).items():
        flag = f"--{key}"
        if isinstance(value, bool):
            if value:
                argv.append(flag)
        else:
            argv.extend([flag, str(value)])
    return argv


def run_pipeline(manifest: dict, manifest_path: Path) -> int:
    """Execute manifest steps in order; record output hashes next to it."""
    if not isinstance(manifest, dict) or "steps" not in manifest:
        raise SchemaError("manifest must be a JSON object with a 'steps' list")
    steps = manifest["steps"]
    if not isinstance(steps, list):
        raise SchemaError("manifest 'steps' must be a list")
    completed = []
    parser = build_parser()
    for i, step in enumerate(steps):
        name = step.get("name")
        if name not in _STEP_OUTPUT_FLAGS:
            raise SchemaError(f"step {i}: unknown step name {name!r}")
        argv = _step_to_argv(step)
        args = parser.parse_args(argv)
        status = args.handler(args)
        if status != EXIT_OK:
            return status
        outputs = {}
        for flag in _STEP_OUTPUT_FLAGS[name]:
            value = step.get("args", {}).get(flag)
            if value and Path(value).exists():
                outputs[value] = _sha256(value)
        completed.append(
            {
                "name": name,
                "args": step.get("args", {}),
                "config_hash": hashlib.sha256(
                    json.dumps(step.get("args", {}), sort_keys=True).encode()
                ).hexdigest(),
                "outputs": outputs,
            }
        )
    result = {"tool_version": __version__, "steps": completed}
    out_path = manifest_path.with_suffix(".completed.json")
    out_path.write_text(json.dumps(result, indent=2, sort_keys=True) + "\n", "utf-8")
    print(json.dumps({"steps": len(completed), "completed": str(out_path)}))
    return EXIT_OK


def _cmd_run(args) -> int:
    path = Path(args.manifest)
    if not path.exists():
        raise FileNotFoundError(f"manifest not found: {path}")
    manifest = json.loads(path.read_text(encoding="utf-8"))
    return run_pipeline(manifest, path)


# -- parser --------------------------------------------------------------------


def _add_tree_flags(sub) -> None:
    sub.add_argument("--min-leaf", type=int, default=2,
                     help="minimum training instances per branch (default 2)")
    sub.add_argument("--confidence", type=float, default=0.25,
                     help="pruning confidence level (default 0.25)")
    sub.add_argument("--no-prune", action="store_true", help="disable pruning")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="churnseg",
        description="Customer segmentation and churn profiling toolkit",
    )
    parser.add_argument("--version", action="version", version=f"churnseg {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic raw billing dataset")
    p.add_argument("--rows", type=int, required=True, help="number of accounts to generate")
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--noise", type=float, default=0.0,
                   help="label noise fraction in [0,1) (default 0)")
    p.add_argument("--out", required=True, help="output CSV path for raw records")
    p.add_argument("--truth", help="output CSV path for intended labels")
    p.add_argument("--config", help="JSON file with generator config overrides")
    p.set_defaults(handler=_cmd_synth)

    p = sub.add_parser("derive", help="compute derived attributes from a raw CSV")
    p.add_argument("--in", required=True, help="raw billing CSV input")
    p.add_argument("--out", required=True, help="output CSV with profile columns appended")
    p.add_argument("--today", required=True,
                   help="reference date YYYY-MM-DD for length-of-service")
    p.add_argument("--errors-out", help="write row errors to this JSON file")
    p.set_defaults(handler=_cmd_derive)

    p = sub.add_parser("segment", help="apply the spender/account rules to a derived CSV")
    p.add_argument("--in", required=True, help="derived CSV input")
    p.add_argument("--out", required=True,
                   help="output CSV with spender_status and account_class appended")
    p.set_defaults(handler=_cmd_segment)

    p = sub.add_parser("train", help="train a classifier on a segmented CSV")
    p.add_argument("--model", required=True, choices=("c45", "nb"), help="model kind")
    p.add_argument("--in", required=True, help="training CSV")
    p.add_argument("--class", required=True, help="class column name")
    p.add_argument("--exclude", default="", help="comma-separated columns to drop")
    p.add_argument("--out", required=True, help="output model JSON path")
    _add_tree_flags(p)
    p.set_defaults(handler=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a classifier with a chosen protocol")
    p.add_argument("--model-type", required=True, choices=("c45", "nb"), help="model kind")
    p.add_argument("--mode", required=True, choices=("split", "cv", "full"),
                   help="evaluation protocol")
    p.add_argument("--seeds", default="1..10",
                   help="seed list, e.g. 1..10 or 3,5,9 (default 1..10)")
    p.add_argument("--split", type=float, default=0.66,
                   help="train fraction for split mode (default 0.66)")
    p.add_argument("--folds", type=int, default=10,
                   help="fold count for cv mode (default 10)")
    p.add_argument("--in", required=True, help="segmented CSV input")
    p.add_argument("--class", required=True, help="class column name")
    p.add_argument("--exclude", default="", help="comma-separated columns to drop")
    p.add_argument("--report", help="write the text report here")
    p.add_argument("--json", help="write the JSON report here")
    p.add_argument("--curves-out", help="write ROC/PRC coordinates CSV here")
    p.add_argument("--timings", action="store_true",
                   help="include wall-clock timings in reports")
    _add_tree_flags(p)
    p.set_defaults(handler=_cmd_eval)

    p = sub.add_parser("run", help="execute a pipeline manifest")
    p.add_argument("--manifest", required=True, help="pipeline manifest JSON")
    p.set_defaults(handler=_cmd_run)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _max_threads()
        return args.handler(args)
    except _CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
