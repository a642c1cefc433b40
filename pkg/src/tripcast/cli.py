"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 model/schema mismatch.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import pipeline
from .config import ConfigError, PipelineConfig
from .features import (DatasetFormatError, build_snapshot_dataset, read_dataset,
                       write_dataset)
from .io import CorpusFormatError, emit_predictions, ingest_corpus, read_predictions, write_corpus
from .models import SchemaMismatchError, load_model, save_model
from .synthetic import synthetic_corpus

log = logging.getLogger("tripcast")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_SCHEMA = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _config(args) -> PipelineConfig:
    cfg = PipelineConfig.from_file(args.config) if args.config else PipelineConfig()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    return cfg


def _task(name: str) -> str:
    return pipeline.TASK_ALIASES[name]


def cmd_ingest(args):
    trips, report = ingest_corpus(args.corpus)
    out = json.dumps(report.as_dict(), indent=2, sort_keys=True)
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(out + "\n")
    print(out)
    if report.errors:
        for e in report.errors:
            log.warning("%s", e)


def cmd_synthesize(args):
    cfg = _config(args)
    trips = synthetic_corpus(args.trips, cfg.cutoff_ts(), ongoing_frac=args.ongoing_frac,
                             seed=cfg.seed)
    write_corpus(trips, args.out)
    print(f"wrote {len(trips)} trips to {args.out}")


def cmd_snapshot(args):
    cfg = _config(args)
    task = _task(args.task)
    trips, report = ingest_corpus(args.corpus)
    matcher = pipeline.make_matcher(trips, cfg)
    ds = build_snapshot_dataset(trips, cfg.cutoff_ts(), task, cfg.feature_config(), matcher)
    write_dataset(ds, args.out)
    print(f"{len(ds)} rows ({ds.n_skipped} ongoing trips skipped with < 2 points), "
          f"schema {ds.schema.schema_id} -> {args.out}")


def cmd_train(args):
    cfg = _config(args)
    task = _task(args.task)
    ds = read_dataset(args.dataset)
    if ds.task != task:
        raise SchemaMismatchError(f"dataset holds {ds.task!r} rows, not {task!r}")
    if ds.schema.schema_id != pipeline.expected_schema_id(task, cfg):
        raise SchemaMismatchError("dataset schema does not match the feature configuration")
    if args.no_validation:
        model, val = pipeline.fit_task_model(ds, cfg), np.zeros(len(ds), dtype=bool)
    else:
        model, val = pipeline.train(ds, cfg)
    validation_rows = [r for r, v in zip(ds.row_ids, val) if v]
    extra = {"config": cfg.as_dict(), "validation_rows": validation_rows}
    if task == "travel_time":
        extra["local_test_report"] = model.local_test_report_
    else:
        extra["outliers_removed"] = model.n_removed_
    save_model(args.out, model, ds.schema.schema_id, task, ds.schema.names, extra)
    print(f"trained {type(model).__name__} on {len(ds) - len(validation_rows)} rows "
          f"({len(validation_rows)} held out) -> {args.out}")


def cmd_predict(args):
    model, header = load_model(args.model)
    task = header["task"]
    cfg = PipelineConfig.from_dict(header["extra"]["config"])
    if args.dataset:
        ds = read_dataset(args.dataset)
        if ds.schema.schema_id != header["schema_id"]:
            raise SchemaMismatchError(
                f"dataset schema {ds.schema.schema_id!r} != model schema {header['schema_id']!r}")
        if args.rows == "validation":
            wanted = set(header["extra"]["validation_rows"])
            mask = np.array([r in wanted for r in ds.row_ids], dtype=bool)
        else:
            mask = None
        records = pipeline.predict_dataset(model, ds, mask)
    else:
        if not (args.corpus and args.trips):
            raise UsageError("predict needs --dataset, or both --corpus and --trips")
        if pipeline.expected_schema_id(task, cfg) != header["schema_id"]:
            raise SchemaMismatchError("model schema does not match its stored configuration")
        corpus, _ = ingest_corpus(args.corpus)
        trips, _ = ingest_corpus(args.trips)
        records = pipeline.predict_trips(model, task, corpus, trips, cfg)
    if not records:
        raise CorpusFormatError("nothing to predict")
    emit_predictions(records, task, args.out)
    print(f"{len(records)} predictions -> {args.out}")


def cmd_evaluate(args):
    task, preds = read_predictions(args.predictions)
    expected = "destination" if args.metric == "mhd" else "travel_time"
    if task != expected:
        raise UsageError(f"--metric {args.metric} needs {expected} predictions, got {task}")
    try:
        truth_task, truth = read_predictions(args.truth)
    except CorpusFormatError:
        ds = read_dataset(args.truth)
        truth_task, truth = ds.task, pipeline.dataset_truth(ds)
    if truth_task != task:
        raise UsageError(f"ground truth is for {truth_task}, predictions for {task}")
    value = pipeline.score(task, preds, truth)
    print(f"{args.metric.upper()} {value:.6f} over {len(preds)} trips")


def cmd_report_importance(args):
    model, header = load_model(args.model)
    names = header["feature_names"]
    imp = np.asarray(model.feature_importances_)
    order = np.argsort(-imp, kind="stable")[: args.top]
    for i in order:
        print(f"{names[i]:<45s} {imp[i]:.6f}")


def build_parser():
    p = _Parser(prog="tripcast", description="Taxi destination and travel-time prediction.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("ingest", help="parse a corpus CSV and print a data-quality report")
    s.add_argument("corpus")
    s.add_argument("--report", help="also write the report as JSON")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("synthesize", help="write a synthetic corpus CSV")
    s.add_argument("--out", required=True)
    s.add_argument("--trips", type=int, default=2000)
    s.add_argument("--ongoing-frac", type=float, default=0.25)
    s.add_argument("--config")
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_synthesize)

    s = sub.add_parser("snapshot", help="build a snapshot feature dataset")
    s.add_argument("--corpus", required=True)
    s.add_argument("--task", choices=sorted(pipeline.TASK_ALIASES), required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--config")
    s.set_defaults(func=cmd_snapshot)

    s = sub.add_parser("train", help="train a model on a snapshot dataset")
    s.add_argument("--task", choices=sorted(pipeline.TASK_ALIASES), required=True)
    s.add_argument("--dataset", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--config")
    s.add_argument("--seed", type=int)
    s.add_argument("--no-validation", action="store_true",
                   help="train on every row instead of holding out a validation split")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("predict", help="predict dataset rows or raw partial trips")
    s.add_argument("--model", required=True)
    s.add_argument("--dataset")
    s.add_argument("--rows", choices=["validation", "all"], default="validation")
    s.add_argument("--corpus")
    s.add_argument("--trips")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("evaluate", help="score predictions against ground truth")
    s.add_argument("--metric", choices=["mhd", "rmsle"], required=True)
    s.add_argument("--predictions", required=True)
    s.add_argument("--truth", required=True, help="snapshot dataset or prediction-format CSV")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("report-importance", help="list feature importances of a model")
    s.add_argument("--model", required=True)
    s.add_argument("--top", type=int, default=30)
    s.set_defaults(func=cmd_report_importance)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"tripcast: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SchemaMismatchError as exc:
        print(f"tripcast: schema mismatch: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (CorpusFormatError, DatasetFormatError, OSError, ValueError, KeyError) as exc:
        print(f"tripcast: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
