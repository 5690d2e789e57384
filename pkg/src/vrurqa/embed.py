"""
Phase-space reconstruction: delay from the average mutual information (AMI)
curve, embedding dimension from the false-nearest-neighbour (FNN) test, and
time-delay embedding.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import DegenerateInputError, InsufficientDataError, InvalidInputError
from .ingest import CHANNELS, Channel, Window

AMI_BINS = 16
FNN_RTOL = 10.0
FNN_ATOL = 2.0
FNN_ACCEPT = 0.05
# distances at or below this (in z-scored units) count as coincident points
ZERO_DISTANCE = 1e-12


class UnconvergedDimensionWarning(UserWarning):
    """The FNN fraction never dropped below the acceptance level."""


@dataclass(frozen=True)
class EmbeddingParams:
    delay: int
    dimension: int
    threshold: float = 1.0

    def __post_init__(self):
        if self.delay < 1 or self.dimension < 1:
            raise InvalidInputError("delay and dimension must be positive")
        if not self.threshold > 0:
            raise InvalidInputError("threshold must be positive")

    @property
    def span(self) -> int:
        return (self.dimension - 1) * self.delay

    def trajectory_length(self, n: int) -> int:
        return n - self.span

    def check(self, n: int):
        if self.trajectory_length(n) < 2:
            raise InsufficientDataError(
                f"series of length {n} too short for dimension={self.dimension}, delay={self.delay}")


# delay, dimension, threshold per sensor as used on the original recordings
SHIPPED_PARAMS = {
    "accelerometer": EmbeddingParams(10, 4, 0.9),
    "gyroscope": EmbeddingParams(10, 4, 0.9),
    "rotation_vector": EmbeddingParams(30, 3, 0.01),
}


def default_params() -> dict[Channel, EmbeddingParams]:
    return {ch: SHIPPED_PARAMS[ch.sensor] for ch in CHANNELS}


@dataclass(frozen=True)
class EmbeddedTrajectory:
    points: np.ndarray  # (n_points, dimension)
    source_len: int

    def __len__(self):
        return self.points.shape[0]

    @property
    def dimension(self) -> int:
        return self.points.shape[1]


def embed(series, params: EmbeddingParams) -> EmbeddedTrajectory:
    """Delay vectors ``(x[k], x[k+delay], ..., x[k+(m-1)delay])``."""
    x = np.asarray(series, dtype=float)
    params.check(x.size)
    n = params.trajectory_length(x.size)
    cols = [x[j * params.delay: j * params.delay + n] for j in range(params.dimension)]
    return EmbeddedTrajectory(np.stack(cols, axis=1), x.size)


# -- average mutual information ---------------------------------------------

def _entropy_bits(counts: np.ndarray, n: int) -> float:
    p = counts[counts > 0] / n
    return -math.fsum((p * np.log2(p)).tolist())


def _bin_index(x: np.ndarray, bins: int) -> np.ndarray:
    lo, hi = x.min(), x.max()
    if not hi > lo:
        raise DegenerateInputError("constant series: entropy undefined under equal-width binning")
    idx = np.floor((x - lo) / (hi - lo) * bins).astype(np.intp)
    return np.minimum(idx, bins - 1)


def _binned_mi(bx: np.ndarray, by: np.ndarray, bins: int) -> float:
    n = bx.size
    joint = np.bincount(bx * bins + by, minlength=bins * bins).reshape(bins, bins)
    return (_entropy_bits(joint.sum(axis=1), n) + _entropy_bits(joint.sum(axis=0), n)
            - _entropy_bits(joint.ravel(), n))


def ami(series, lag: int, bins: int = AMI_BINS) -> float:
    """Histogram estimate of I(x_t; x_{t+lag}) in bits.

    Both axes share ``bins`` equal-width bins spanning the whole series'
    range, so lag 0 gives exactly the entropy of the binned marginal.
    """
    x = np.asarray(series, dtype=float)
    if lag < 0 or lag >= x.size - 1:
        raise InvalidInputError(f"lag {lag} out of range for length {x.size}")
    b = _bin_index(x, bins)
    return _binned_mi(b[: b.size - lag], b[lag:], bins)


def ami_curve(series, max_lag: int, bins: int = AMI_BINS) -> np.ndarray:
    """AMI for lags ``1..max_lag`` (element ``i`` is lag ``i + 1``)."""
    x = np.asarray(series, dtype=float)
    if max_lag >= x.size - 1:
        raise InvalidInputError(f"max_lag {max_lag} out of range for length {x.size}")
    b = _bin_index(x, bins)
    return np.array([_binned_mi(b[: b.size - lag], b[lag:], bins) for lag in range(1, max_lag + 1)])


def select_delay(curve: Sequence[float]) -> int:
    """Lag of the first strict local minimum, else of the global minimum.

    ``curve[0]`` corresponds to lag 1. Ties in the fallback go to the smaller lag.
    """
    c = np.asarray(curve, dtype=float)
    if c.size == 0:
        raise InvalidInputError("empty AMI curve")
    for i in range(1, c.size - 1):
        if c[i] < c[i - 1] and c[i] < c[i + 1]:
            return i + 1
    return int(np.argmin(c)) + 1


# -- false nearest neighbours -----------------------------------------------

def _zscore(x: np.ndarray) -> np.ndarray:
    sd = x.std()
    if not sd > 0:
        raise DegenerateInputError("constant series")
    return (x - x.mean()) / sd


def _fnn_counts(segments: Sequence[np.ndarray], dimension: int, delay: int,
                rtol: float, atol: float) -> tuple[int, int]:
    """(false, valid) neighbour counts pooled over z-scored segments.

    Delay vectors never straddle two segments; nearest neighbours are searched
    across the pooled set.
    """
    span = dimension * delay
    pts, ext = [], []
    for seg in segments:
        n = seg.size - span
        if n < 1:
            continue
        pts.append(np.stack([seg[j * delay: j * delay + n] for j in range(dimension)], axis=1))
        ext.append(seg[span: span + n])
    if sum(p.shape[0] for p in pts) < 2:
        raise InsufficientDataError("FNN test needs at least 2 points at dimension + 1")
    pts = np.concatenate(pts)
    ext = np.concatenate(ext)
    dist, idx = cKDTree(pts).query(pts, k=2)
    # column 0 may be a coincident twin rather than self; either way distance is 0
    nn = np.where(idx[:, 0] == np.arange(pts.shape[0]), idx[:, 1], idx[:, 0])
    d_m = np.where(idx[:, 0] == np.arange(pts.shape[0]), dist[:, 1], dist[:, 0])
    valid = d_m > ZERO_DISTANCE
    if not np.any(valid):
        raise DegenerateInputError("all nearest-neighbour pairs have zero distance")
    grow = np.abs(ext - ext[nn])[valid]
    d_m = d_m[valid]
    d_next = np.sqrt(d_m ** 2 + grow ** 2)
    # segments are z-scored, so the attractor size is 1
    false = (grow / d_m > rtol) | (d_next > atol)
    return int(false.sum()), int(valid.sum())


def fnn_fraction(series, dimension: int, delay: int,
                 rtol: float = FNN_RTOL, atol: float = FNN_ATOL) -> float:
    """Fraction of false nearest neighbours when going from ``dimension`` to ``dimension + 1``."""
    if dimension < 1 or delay < 1:
        raise InvalidInputError("dimension and delay must be positive")
    x = _zscore(np.asarray(series, dtype=float))
    false, valid = _fnn_counts([x], dimension, delay, rtol, atol)
    return false / valid


def fnn_table(segments, delay: int, max_dim: int,
              rtol: float = FNN_RTOL, atol: float = FNN_ATOL) -> np.ndarray:
    """FNN fraction for dimensions ``1..max_dim`` over z-scored segments."""
    segs = [_zscore(np.asarray(s, dtype=float)) for s in segments]
    out = []
    for m in range(1, max_dim + 1):
        false, valid = _fnn_counts(segs, m, delay, rtol, atol)
        out.append(false / valid)
    return np.array(out)


def _first_accepted(fractions: np.ndarray, accept: float) -> int | None:
    hits = np.flatnonzero(fractions < accept)
    return int(hits[0]) + 1 if hits.size else None


def select_dimension(series, delay: int, max_dim: int = 10, accept: float = FNN_ACCEPT,
                     rtol: float = FNN_RTOL, atol: float = FNN_ATOL) -> int:
    """Smallest dimension whose FNN fraction is below ``accept``.

    Falls back to ``max_dim`` with an :class:`UnconvergedDimensionWarning`.
    """
    if max_dim < 1:
        raise InvalidInputError("max_dim must be at least 1")
    x = _zscore(np.asarray(series, dtype=float))
    for m in range(1, max_dim + 1):
        false, valid = _fnn_counts([x], m, delay, rtol, atol)
        if false / valid < accept:
            return m
    warnings.warn(f"FNN fraction stayed above {accept} up to dimension {max_dim}",
                  UnconvergedDimensionWarning, stacklevel=2)
    return max_dim


# -- calibration --------------------------------------------------------------

@dataclass
class ChannelCalibration:
    delay: int
    dimension: int
    converged: bool
    ami_curve: np.ndarray = field(repr=False)
    fnn_fractions: np.ndarray = field(repr=False)
    n_windows: int = 0

    def params(self, threshold: float) -> EmbeddingParams:
        return EmbeddingParams(self.delay, self.dimension, threshold)


def _window_arrays(windows) -> list[np.ndarray]:
    return [np.asarray(w.samples if isinstance(w, Window) else w, dtype=float) for w in windows]


def calibrate_channel(windows, max_lag: int = 50, max_dim: int = 10, bins: int = AMI_BINS,
                      accept: float = FNN_ACCEPT, rtol: float = FNN_RTOL,
                      atol: float = FNN_ATOL) -> ChannelCalibration:
    arrays = [a for a in _window_arrays(windows) if a.max() > a.min()]
    if not arrays:
        raise DegenerateInputError("no non-constant windows to calibrate on")
    curve = np.mean([ami_curve(a, max_lag, bins) for a in arrays], axis=0)
    # a repeated window would pair every delay vector with its exact twin
    seen, unique = set(), []
    for a in arrays:
        key = (a.size, a.tobytes())
        if key not in seen:
            seen.add(key)
            unique.append(a)
    delay = select_delay(curve)
    # the largest dimension whose extension still fits in a window bounds the table
    longest = max(a.size for a in unique)
    usable = min(max_dim, (longest - 2) // delay)
    if usable < 1:
        raise InsufficientDataError(f"windows too short for delay {delay}")
    fractions = fnn_table(unique, delay, usable, rtol, atol)
    dim = _first_accepted(fractions, accept)
    converged = dim is not None
    if not converged:
        warnings.warn(f"FNN fraction stayed above {accept} up to dimension {usable}",
                      UnconvergedDimensionWarning, stacklevel=2)
        dim = usable
    return ChannelCalibration(delay, dim, converged, curve, fractions, len(arrays))


def calibrate(dataset: Mapping[Channel, Sequence], max_lag: int = 50, max_dim: int = 10,
              bins: int = AMI_BINS, **kw) -> dict[Channel, ChannelCalibration]:
    """Per-channel delay (averaged AMI curve) and dimension (pooled FNN test).

    ``dataset`` maps each channel to its calibration windows, drawn from all
    participants and modes.
    """
    out = {}
    for ch, windows in dataset.items():
        if len(windows) == 0:
            raise InsufficientDataError(f"no calibration windows for {ch}")
        out[ch] = calibrate_channel(windows, max_lag, max_dim, bins, **kw)
    return out


def format_calibration_report(calib: Mapping[Channel, ChannelCalibration]) -> str:
    """Delimited text with a summary table, the averaged AMI curves and FNN tables."""
    lines = ["# section,channel,key,value", "# summary: delay,dimension,converged,n_windows"]
    for ch, c in calib.items():
        lines.append(f"summary,{ch.name},delay,{c.delay}")
        lines.append(f"summary,{ch.name},dimension,{c.dimension}")
        lines.append(f"summary,{ch.name},converged,{int(c.converged)}")
        lines.append(f"summary,{ch.name},n_windows,{c.n_windows}")
    for ch, c in calib.items():
        for lag, v in enumerate(c.ami_curve, start=1):
            lines.append(f"ami,{ch.name},{lag},{v:.12g}")
    for ch, c in calib.items():
        for m, v in enumerate(c.fnn_fractions, start=1):
            lines.append(f"fnn,{ch.name},{m},{v:.12g}")
    return "\n".join(lines) + "\n"
