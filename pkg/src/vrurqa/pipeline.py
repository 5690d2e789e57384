"""
End-to-end orchestration: windows -> time/RQA feature table -> mRMR ranking ->
cross-validated accuracy curves for the three label schemes.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import platform
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import __version__
from .embed import (EmbeddingParams, calibrate, default_params, format_calibration_report)
from .errors import AlignmentError, InvalidInputError, VruError
from .forest import (ForestConfig, cross_validate, get_scheme, relabel)
from .ingest import (CHANNELS, DEFAULT_RATE_HZ, DEFAULT_WINDOW_SECONDS, MODES, Channel,
                     TimeSeries, cut_windows, load_streams, parse_labels, window_length)
from .rqa import LMIN, RQA_FEATURE_NAMES, VMIN, rqa_matrix
from .selection import MRMR_BINS, FeatureTable, MrmrRanking, format_ranking, mrmr_rank
from .timefeat import TIME_FEATURE_NAMES, time_feature_matrix

log = logging.getLogger(__name__)

FEATURE_SETS = {"pooled": 180, "time": 126, "rqa": 54}

# candidate thresholds per sensor, in the sensor's own units
DEFAULT_THRESHOLD_GRID = {
    "accelerometer": (0.3, 0.6, 0.9, 1.2, 1.5),
    "gyroscope": (0.1, 0.3, 0.6, 0.9, 1.2),
    "rotation_vector": (0.003, 0.005, 0.01, 0.02, 0.04),
}


@dataclass
class PipelineConfig:
    seed: int
    log_path: str | None = None
    labels_path: str | None = None
    output_dir: str = "vrurqa-out"
    rate_hz: float = DEFAULT_RATE_HZ
    window_seconds: float = DEFAULT_WINDOW_SECONDS
    # "default" (shipped values), "calibrate", or {channel: [delay, dimension, threshold]}
    embedding: str | dict = "default"
    relative_threshold: bool = False
    lmin: int = LMIN
    vmin: int = VMIN
    sweep_thresholds: bool = False
    threshold_grid: dict = field(default_factory=lambda: {k: list(v) for k, v in
                                                          DEFAULT_THRESHOLD_GRID.items()})
    calib_max_lag: int = 50
    calib_max_dim: int = 8
    calib_windows: int = 200
    feature_set: str = "pooled"
    mrmr_bins: int = MRMR_BINS
    k_grid: list | None = None
    n_trees: int = 100
    n_features_per_split: int | None = None
    min_leaf: int = 1
    folds: int = 5
    n_jobs: int = 1
    schemes: list = field(default_factory=lambda: ["binary", "four_class", "five_class"])

    def __post_init__(self):
        if self.seed is None:
            raise InvalidInputError("seed is mandatory")
        if self.feature_set not in FEATURE_SETS:
            raise InvalidInputError(f"feature_set must be one of {sorted(FEATURE_SETS)}")
        for s in self.schemes:
            get_scheme(s)

    def forest(self) -> ForestConfig:
        return ForestConfig(self.n_trees, self.n_features_per_split, self.min_leaf, self.seed,
                            self.n_jobs)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def load_config(path: str | Path, **overrides) -> PipelineConfig:
    """Read a JSON config; keys are the :class:`PipelineConfig` field names."""
    with open(path) as fh:
        doc = json.load(fh)
    known = {f.name for f in dataclasses.fields(PipelineConfig)}
    unknown = set(doc) - known
    if unknown:
        raise InvalidInputError(f"unknown config keys: {sorted(unknown)}")
    doc.update({k: v for k, v in overrides.items() if v is not None})
    if "seed" not in doc:
        raise InvalidInputError("config needs a seed")
    return PipelineConfig(**doc)


# -- epochs --------------------------------------------------------------------

@dataclass
class EpochData:
    """Windows of all nine channels for the epochs present in every channel."""

    epochs: np.ndarray
    windows: dict[Channel, np.ndarray]  # channel -> (n_epochs, L)
    rate_hz: float
    dropped: int = 0
    last_epoch: int = -1  # latest epoch any channel covers


def epoch_windows(streams: Mapping[Channel, TimeSeries],
                  window_seconds: float = DEFAULT_WINDOW_SECONDS) -> EpochData:
    """Cut every channel and keep epochs that all nine channels cover.

    Epochs present in some channels but not all are dropped, not imputed.
    """
    missing = [ch for ch in CHANNELS if ch not in streams]
    per_channel = {}
    for ch, ts in streams.items():
        per_channel[ch] = {w.epoch_index: w.samples for w in cut_windows(ts, window_seconds)}
    all_epochs = set().union(*(set(w) for w in per_channel.values())) if per_channel else set()
    if missing:
        common = set()
    else:
        common = set.intersection(*(set(per_channel[ch]) for ch in CHANNELS))
    epochs = np.array(sorted(common), dtype=np.int64)
    rate = next(iter(streams.values())).rate_hz if streams else DEFAULT_RATE_HZ
    L = window_length(rate, window_seconds)
    windows = {
        ch: (np.stack([per_channel[ch][e] for e in epochs]) if epochs.size
             else np.empty((0, L)))
        for ch in CHANNELS
    }
    dropped = len(all_epochs) - len(common)
    if dropped:
        log.info("dropped %d epochs with missing channels", dropped)
    return EpochData(epochs, windows, rate, dropped, max(all_epochs, default=-1))


def feature_names(feature_set: str) -> tuple[str, ...]:
    return {"pooled": TIME_FEATURE_NAMES + RQA_FEATURE_NAMES, "time": TIME_FEATURE_NAMES,
            "rqa": RQA_FEATURE_NAMES}[feature_set]


def rqa_columns(data: EpochData, params: Mapping[Channel, EmbeddingParams], lmin: int = LMIN,
                vmin: int = VMIN, relative: bool = False) -> np.ndarray:
    return np.concatenate([rqa_matrix(data.windows[ch], params[ch], lmin, vmin, relative)
                           for ch in CHANNELS], axis=1)


def build_feature_table(data: EpochData, labels: Mapping[int, str],
                        params: Mapping[Channel, EmbeddingParams] | None = None,
                        feature_set: str = "pooled", lmin: int = LMIN, vmin: int = VMIN,
                        relative: bool = False) -> FeatureTable:
    """Five-class feature table over the labelled epochs.

    Columns are the 126 time features, the 54 RQA features, or both, in
    registry order. Unlabelled epochs (e.g. gaps between trips) are skipped.
    """
    if feature_set not in FEATURE_SETS:
        raise InvalidInputError(f"unknown feature set {feature_set!r}")
    if not labels:
        raise AlignmentError("no labels")
    if max(labels) > max(data.last_epoch, int(data.epochs.max(initial=-1))):
        raise AlignmentError("labels reference epochs beyond the end of the streams")
    for e, mode in labels.items():
        if mode not in MODES:
            raise AlignmentError(f"epoch {e} has unknown mode {mode!r}")
    keep = np.array([e in labels for e in data.epochs.tolist()])
    if not keep.any():
        raise AlignmentError("no labelled epoch is covered by all channels")
    n_lost = sum(1 for e in labels if e not in set(data.epochs.tolist()))
    if n_lost:
        log.info("%d labelled epochs lack one or more channels and were dropped", n_lost)
    sub = EpochData(data.epochs[keep], {ch: w[keep] for ch, w in data.windows.items()},
                    data.rate_hz)
    blocks = []
    if feature_set in ("pooled", "time"):
        blocks.append(np.concatenate([time_feature_matrix(sub.windows[ch], sub.rate_hz)
                                      for ch in CHANNELS], axis=1))
    if feature_set in ("pooled", "rqa"):
        params = default_params() if params is None else params
        blocks.append(rqa_columns(sub, params, lmin, vmin, relative))
    y = np.array([MODES.index(labels[e]) for e in sub.epochs.tolist()])
    return FeatureTable(feature_names(feature_set), np.concatenate(blocks, axis=1), y, MODES,
                        sub.epochs)


# -- parameter selection -------------------------------------------------------

def calibration_windows(data: EpochData, max_windows: int, seed: int) -> dict[Channel, np.ndarray]:
    """An evenly spread, seed-independent subset of windows per channel."""
    n = data.epochs.size
    pick = np.unique(np.linspace(0, n - 1, min(max_windows, n)).round().astype(int))
    return {ch: data.windows[ch][pick] for ch in CHANNELS}


def resolve_params(config: PipelineConfig, data: EpochData | None = None):
    """Embedding parameters per channel, plus the calibration record if one was run."""
    if config.embedding == "default":
        return default_params(), None
    if config.embedding == "calibrate":
        if data is None:
            raise InvalidInputError("calibration needs data")
        calib = calibrate(calibration_windows(data, config.calib_windows, config.seed),
                          config.calib_max_lag, config.calib_max_dim)
        base = default_params()
        return {ch: c.params(base[ch].threshold) for ch, c in calib.items()}, calib
    if isinstance(config.embedding, dict):
        out = default_params()
        for name, triple in config.embedding.items():
            ch = Channel[name]
            out[ch] = EmbeddingParams(int(triple[0]), int(triple[1]), float(triple[2]))
        return out, None
    raise InvalidInputError(f"bad embedding setting {config.embedding!r}")


@dataclass
class SweepResult:
    best: dict[Channel, float]
    accuracy: dict[Channel, list[tuple[float, float]]]


def threshold_sweep(data: EpochData, labels: Mapping[int, str],
                    params: Mapping[Channel, EmbeddingParams],
                    grid: Mapping[str, Sequence[float]] | Sequence[float],
                    forest: ForestConfig = ForestConfig(), folds: int = 5,
                    scheme: str = "five_class", lmin: int = LMIN, vmin: int = VMIN,
                    relative: bool = False,
                    channels: Sequence[Channel] = CHANNELS) -> SweepResult:
    """Per channel, the threshold whose six RQA features cross-validate best.

    ``grid`` is either one list for every channel or a mapping keyed by sensor
    name. Ties go to the smaller threshold.
    """
    keep = np.array([e in labels for e in data.epochs.tolist()])
    epochs = data.epochs[keep]
    y = np.array([MODES.index(labels[e]) for e in epochs.tolist()])
    best, acc = {}, {}
    for ch in channels:
        values = grid.get(ch.sensor, ()) if isinstance(grid, Mapping) else grid
        if not values:
            raise InvalidInputError(f"empty threshold grid for {ch}")
        windows = data.windows[ch][keep]
        curve = []
        for t in sorted(values):
            p = dataclasses.replace(params[ch], threshold=float(t))
            X = rqa_matrix(windows, p, lmin, vmin, relative)
            names = tuple(f"{ch.name}.{m}" for m in ("rr", "det", "lmax", "ent", "lam", "tt"))
            table = FeatureTable(names, X, y, MODES)
            curve.append((float(t), cross_validate(table, forest, folds, scheme).mean_accuracy))
        top = max(a for _, a in curve)
        best[ch] = next(t for t, a in curve if a == top)
        acc[ch] = curve
    return SweepResult(best, acc)


def default_k_grid(p: int, step: int = 10) -> list[int]:
    grid = list(range(step, p + 1, step))
    if not grid or grid[-1] != p:
        grid.append(p)
    return grid


def accuracy_curve(table: FeatureTable, ranking: MrmrRanking, scheme: str,
                   forest: ForestConfig = ForestConfig(), folds: int = 5,
                   k_grid: Sequence[int] | None = None) -> list[tuple[int, float]]:
    """Cross-validated accuracy using the top-k ranked features for each k.

    The chosen columns keep their table order, so ``k = p`` reproduces the
    full-table cross-validation exactly.
    """
    k_grid = default_k_grid(table.n_features) if k_grid is None else list(k_grid)
    if max(k_grid) > len(ranking):
        raise InvalidInputError("k exceeds the ranking length")
    labelled = relabel(table, scheme) if table.classes != get_scheme(scheme).classes else table
    out = []
    for k in k_grid:
        sub = labelled.columns(sorted(ranking.top(k)))
        out.append((k, cross_validate(sub, forest, folds).mean_accuracy))
    return out


def rank_for(table: FeatureTable, scheme: str, bins: int = MRMR_BINS) -> MrmrRanking:
    labelled = relabel(table, scheme) if table.classes != get_scheme(scheme).classes else table
    return mrmr_rank(labelled, None, bins)


# -- reports -------------------------------------------------------------------

def format_curves(curves: Mapping[str, Sequence[tuple[int, float]]]) -> str:
    lines = ["scheme,n_features,accuracy"]
    for scheme, curve in curves.items():
        lines += [f"{scheme},{k},{a:.6f}" for k, a in curve]
    return "\n".join(lines) + "\n"


def format_confusion(confusion: np.ndarray, classes: Sequence[str]) -> str:
    lines = ["true\\predicted," + ",".join(classes)]
    for c, row in zip(classes, confusion):
        lines.append(c + "," + ",".join(str(int(v)) for v in row))
    return "\n".join(lines) + "\n"


def format_table(table: FeatureTable) -> str:
    head = "epoch,label," + ",".join(table.names)
    rows = [head]
    epochs = table.epochs if table.epochs is not None else np.arange(table.n_rows)
    for e, lab, row in zip(epochs, table.label_names(), table.values):
        rows.append(f"{int(e)},{lab}," + ",".join(repr(float(v)) for v in row))
    return "\n".join(rows) + "\n"


def parse_table(text: str) -> FeatureTable:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    head = lines[0].split(",")
    if head[:2] != ["epoch", "label"]:
        raise InvalidInputError("feature table must start with epoch,label columns")
    epochs, labels, rows = [], [], []
    for ln in lines[1:]:
        parts = ln.split(",")
        epochs.append(int(parts[0]))
        labels.append(MODES.index(parts[1]))
        rows.append([float(v) for v in parts[2:]])
    return FeatureTable(tuple(head[2:]), np.array(rows).reshape(len(rows), len(head) - 2),
                        np.array(labels, dtype=np.int64), MODES, np.array(epochs))


def format_params(params: Mapping[Channel, EmbeddingParams]) -> str:
    lines = ["channel,delay,dimension,threshold"]
    lines += [f"{ch.name},{p.delay},{p.dimension},{p.threshold!r}" for ch, p in params.items()]
    return "\n".join(lines) + "\n"


def format_sweep(sweep: SweepResult) -> str:
    lines = ["channel,threshold,accuracy,selected"]
    for ch, curve in sweep.accuracy.items():
        lines += [f"{ch.name},{t!r},{a:.6f},{int(t == sweep.best[ch])}" for t, a in curve]
    return "\n".join(lines) + "\n"


def manifest(config: PipelineConfig) -> dict:
    import numba
    return {
        "config": config.to_dict(),
        "seed": config.seed,
        "versions": {"vrurqa": __version__, "numpy": np.__version__, "numba": numba.__version__,
                     "python": platform.python_version()},
    }


def load_inputs(config: PipelineConfig) -> tuple[EpochData, dict[int, str]]:
    for key in ("log_path", "labels_path"):
        path = getattr(config, key)
        if path is None:
            raise InvalidInputError(f"config needs {key}")
        if not Path(path).exists():
            raise FileNotFoundError(path)
    with open(config.log_path) as fh:
        streams = load_streams(fh, config.rate_hz)
    with open(config.labels_path) as fh:
        labels = parse_labels(fh)
    return epoch_windows(streams, config.window_seconds), labels


class StageError(VruError):
    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")


def run(config: PipelineConfig) -> dict:
    """Run every stage and write the report bundle into ``config.output_dir``.

    Returns a summary dict; raises :class:`StageError` naming the failed stage.
    """
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    stage = "ingest"
    try:
        data, labels = load_inputs(config)
        stage = "calibrate"
        params, calib = resolve_params(config, data)
        if calib is not None:
            (out / "calibration.csv").write_text(format_calibration_report(calib))
        if config.sweep_thresholds and config.feature_set != "time":
            stage = "sweep-threshold"
            sweep = threshold_sweep(data, labels, params, config.threshold_grid,
                                    config.forest(), config.folds, "five_class",
                                    config.lmin, config.vmin, config.relative_threshold)
            params = {ch: dataclasses.replace(params[ch], threshold=sweep.best[ch])
                      for ch in CHANNELS}
            (out / "threshold_sweep.csv").write_text(format_sweep(sweep))
        (out / "params.csv").write_text(format_params(params))
        stage = "features"
        table = build_feature_table(data, labels, params, config.feature_set, config.lmin,
                                    config.vmin, config.relative_threshold)
        (out / "features.csv").write_text(format_table(table))
        curves, summary = {}, {"n_epochs": table.n_rows, "n_features": table.n_features}
        for scheme in config.schemes:
            stage = "rank"
            ranking = rank_for(table, scheme, config.mrmr_bins)
            (out / f"ranking_{scheme}.csv").write_text(format_ranking(ranking, table.names))
            stage = "evaluate"
            curves[scheme] = accuracy_curve(table, ranking, scheme, config.forest(),
                                            config.folds, config.k_grid)
            full = cross_validate(table, config.forest(), config.folds, scheme)
            (out / f"confusion_{scheme}.csv").write_text(
                format_confusion(full.confusion, full.classes))
            summary[scheme] = full.mean_accuracy
        (out / "accuracy_curves.csv").write_text(format_curves(curves))
        stage = "manifest"
        (out / "manifest.json").write_text(json.dumps(manifest(config), indent=2, sort_keys=True)
                                           + "\n")
    except (VruError, OSError, ValueError, KeyError) as exc:
        if isinstance(exc, StageError):
            raise
        raise StageError(stage, exc) from exc
    summary["curves"] = curves
    return summary
