"""Command-line entry point: ``vrurqa <subcommand> [options]``.

Every subcommand accepts ``--config`` (a JSON file whose keys are the
``PipelineConfig`` fields); explicit flags override the file. Exit codes:
0 success, 1 a stage failed, 2 bad usage, 3 an input path does not exist.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .embed import calibrate, format_calibration_report
from .errors import VruError
from .forest import cross_validate, dumps_model, get_scheme, relabel, train
from .ingest import format_labels, format_log
from .pipeline import (PipelineConfig, StageError, accuracy_curve, build_feature_table,
                       calibration_windows, format_confusion, format_curves, format_sweep,
                       format_table, load_config, load_inputs, parse_table, rank_for,
                       resolve_params, run, threshold_sweep)
from .selection import format_ranking, parse_ranking
from .synth import generate_suite

EXIT_STAGE = 1
EXIT_MISSING = 3


class MissingPath(Exception):
    def __init__(self, path):
        self.path = str(path)
        super().__init__(self.path)


def _emit(text: str, out: str | None):
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _read(path: str) -> str:
    if not Path(path).exists():
        raise MissingPath(path)
    return Path(path).read_text()


def _config(args, require_seed=False) -> PipelineConfig:
    overrides = {
        "seed": args.seed,
        "log_path": getattr(args, "log", None),
        "labels_path": getattr(args, "labels", None),
        "feature_set": getattr(args, "feature_set", None),
        "n_trees": getattr(args, "n_trees", None),
        "n_jobs": getattr(args, "n_jobs", None),
        "folds": getattr(args, "folds", None),
    }
    if args.config:
        if not Path(args.config).exists():
            raise MissingPath(args.config)
        return _staged("config", load_config, args.config, **overrides)
    if require_seed and args.seed is None:
        raise StageError("config", ValueError("a seed is required"))
    overrides = {k: v for k, v in overrides.items() if v is not None}
    overrides.setdefault("seed", 0)
    return _staged("config", PipelineConfig, **overrides)


def _inputs(cfg: PipelineConfig):
    for p in (cfg.log_path, cfg.labels_path):
        if p is not None and not Path(p).exists():
            raise MissingPath(p)
    return load_inputs(cfg)


def _staged(stage, fn, *a, **kw):
    try:
        return fn(*a, **kw)
    except (VruError, ValueError, KeyError, TypeError, OSError) as exc:
        if isinstance(exc, StageError):
            raise
        raise StageError(stage, exc) from exc


# -- subcommands -----------------------------------------------------------------

def cmd_synth(args):
    suite = _staged("synth", generate_suite, args.epochs_per_mode, args.trip_seconds,
                    args.seed if args.seed is not None else 0)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "log.csv").write_text(format_log(suite.samples))
    (out / "labels.csv").write_text(format_labels(suite.labels))
    print(f"wrote {len(suite.labels)} labelled epochs to {out}")


def cmd_calibrate(args):
    cfg = _config(args)
    data, _ = _staged("ingest", _inputs, cfg)
    windows = calibration_windows(data, cfg.calib_windows, cfg.seed)
    calib = _staged("calibrate", calibrate, windows, cfg.calib_max_lag, cfg.calib_max_dim)
    _emit(format_calibration_report(calib), args.out)


def cmd_features(args):
    cfg = _config(args)
    data, labels = _staged("ingest", _inputs, cfg)
    params, _ = _staged("calibrate", resolve_params, cfg, data)
    table = _staged("features", build_feature_table, data, labels, params, cfg.feature_set,
                    cfg.lmin, cfg.vmin, cfg.relative_threshold)
    _emit(format_table(table), args.out)


def cmd_rank(args):
    table = _staged("rank", parse_table, _read(args.features))
    ranking = _staged("rank", rank_for, table, args.scheme, args.bins)
    _emit(format_ranking(ranking, table.names), args.out)


def cmd_evaluate(args):
    cfg = _config(args)
    table = _staged("evaluate", parse_table, _read(args.features))
    forest = cfg.forest()
    if args.ranking:
        ranking = _staged("evaluate", parse_ranking, _read(args.ranking), table.names)
        grid = [int(k) for k in args.k_grid.split(",")] if args.k_grid else cfg.k_grid
        curve = _staged("evaluate", accuracy_curve, table, ranking, args.scheme, forest,
                        cfg.folds, grid)
        _emit(format_curves({args.scheme: curve}), args.out)
    else:
        res = _staged("evaluate", cross_validate, table, forest, cfg.folds, args.scheme)
        text = f"# mean_accuracy,{res.mean_accuracy:.6f}\n"
        text += format_confusion(res.confusion, res.classes)
        _emit(text, args.out)
    if args.model_out:
        scheme = get_scheme(args.scheme)
        labelled = relabel(table, scheme) if table.classes != scheme.classes else table
        Path(args.model_out).write_text(dumps_model(_staged("evaluate", train, labelled, forest)))


def cmd_sweep(args):
    cfg = _config(args)
    data, labels = _staged("ingest", _inputs, cfg)
    params, _ = _staged("calibrate", resolve_params, cfg, data)
    sweep = _staged("sweep-threshold", threshold_sweep, data, labels, params,
                    cfg.threshold_grid, cfg.forest(), cfg.folds, "five_class", cfg.lmin,
                    cfg.vmin, cfg.relative_threshold)
    _emit(format_sweep(sweep), args.out)


def cmd_run_all(args):
    cfg = _config(args, require_seed=True)
    if args.out:
        cfg.output_dir = args.out
    for p in (cfg.log_path, cfg.labels_path):
        if p is not None and not Path(p).exists():
            raise MissingPath(p)
    summary = run(cfg)
    print(json.dumps({k: v for k, v in summary.items() if k != "curves"}, sort_keys=True))


# -- parser ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output file (directory for synth and run-all)")
    common.add_argument("-v", "--verbose", action="store_true")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--log", help="sensor log (channel,timestamp_ms,value)")
    data.add_argument("--labels", help="label sidecar (epoch_index,mode)")
    data.add_argument("--feature-set", choices=["pooled", "time", "rqa"])

    forest = argparse.ArgumentParser(add_help=False)
    forest.add_argument("--n-trees", type=int)
    forest.add_argument("--folds", type=int)
    forest.add_argument("--n-jobs", type=int)

    p = argparse.ArgumentParser(prog="vrurqa", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", parents=[common], help="write a synthetic log and labels")
    s.add_argument("--epochs-per-mode", type=int, default=1000)
    s.add_argument("--trip-seconds", type=int, default=50)
    s.set_defaults(func=cmd_synth, out_required=True)

    s = sub.add_parser("calibrate", parents=[common, data], help="AMI delay and FNN dimension")
    s.set_defaults(func=cmd_calibrate)

    s = sub.add_parser("features", parents=[common, data], help="build the feature table")
    s.set_defaults(func=cmd_features)

    s = sub.add_parser("rank", parents=[common], help="mRMR ranking of a feature table")
    s.add_argument("--features", required=True)
    s.add_argument("--scheme", default="five_class")
    s.add_argument("--bins", type=int, default=8)
    s.set_defaults(func=cmd_rank)

    s = sub.add_parser("evaluate", parents=[common, forest],
                       help="cross-validate a feature table, optionally along a ranking")
    s.add_argument("--features", required=True)
    s.add_argument("--ranking")
    s.add_argument("--scheme", default="five_class")
    s.add_argument("--k-grid", help="comma-separated feature counts")
    s.add_argument("--model-out", help="also train on all rows and save the forest here")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("sweep-threshold", parents=[common, data, forest],
                       help="pick the RQA threshold per channel by CV accuracy")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("run-all", parents=[common, data, forest], help="every stage end to end")
    s.set_defaults(func=cmd_run_all)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "run-all" and args.seed is None:
        parser.error("run-all requires --seed")
    if getattr(args, "out_required", False) and not args.out:
        parser.error(f"{args.command} requires --out")
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except MissingPath as exc:
        print(f"vrurqa: input path does not exist: {exc.path}", file=sys.stderr)
        return EXIT_MISSING
    except StageError as exc:
        print(f"vrurqa: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except VruError as exc:
        print(f"vrurqa: [config] {exc}", file=sys.stderr)
        return EXIT_STAGE
    return 0


if __name__ == "__main__":
    sys.exit(main())
