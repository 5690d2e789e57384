"""Time-domain window statistics: 7 measures of the samples plus 7 of their derivative."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import InsufficientDataError, InvalidInputError, MissingChannelError
from .ingest import CHANNELS, Channel, Window

MEASURES = ("mean", "max", "min", "var", "std", "range", "iqr")
TIME_MEASURES = MEASURES + tuple(f"d_{m}" for m in MEASURES)
N_TIME_FEATURES = len(TIME_MEASURES)  # 14 per channel
TIME_FEATURE_NAMES = tuple(f"{ch.name}.{m}" for ch in CHANNELS for m in TIME_MEASURES)


@dataclass(frozen=True)
class TimeFeatureVector:
    channel: Channel
    epoch_index: int
    values: np.ndarray

    def as_dict(self) -> dict[str, float]:
        return dict(zip(TIME_MEASURES, self.values.tolist()))


def _samples(window) -> np.ndarray:
    return np.asarray(window.samples if isinstance(window, Window) else window, dtype=float)


def derivative(window, rate_hz: float) -> np.ndarray:
    """Forward difference scaled by the sampling rate (length N - 1)."""
    x = _samples(window)
    if x.size < 2:
        raise InsufficientDataError("derivative needs at least 2 samples")
    return np.diff(x) * rate_hz


def _measures(x: np.ndarray) -> np.ndarray:
    """Seven measures along the last axis; variance uses N - 1."""
    mx = x.max(axis=-1)
    mn = x.min(axis=-1)
    var = x.var(axis=-1, ddof=1)
    q1, q3 = np.percentile(x, [25.0, 75.0], axis=-1)
    return np.stack([x.mean(axis=-1), mx, mn, var, np.sqrt(var), mx - mn, q3 - q1], axis=-1)


def time_feature_matrix(samples: np.ndarray, rate_hz: float) -> np.ndarray:
    """Vectorised :func:`time_features` over a ``(n_windows, N)`` array."""
    x = np.asarray(samples, dtype=float)
    if x.ndim != 2:
        raise InvalidInputError("expected a 2-D (n_windows, n_samples) array")
    if x.shape[1] < 4:
        raise InsufficientDataError("time features need windows of at least 4 samples")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("window contains non-finite samples")
    return np.concatenate([_measures(x), _measures(np.diff(x, axis=1) * rate_hz)], axis=1)


def time_features(window: Window, rate_hz: float) -> TimeFeatureVector:
    x = _samples(window)
    values = time_feature_matrix(x[None, :], rate_hz)[0]
    channel = window.channel if isinstance(window, Window) else None
    epoch = window.epoch_index if isinstance(window, Window) else -1
    return TimeFeatureVector(channel, epoch, values)


def assemble_time_block(windows: Mapping[Channel, Window], rate_hz: float) -> np.ndarray:
    """126-vector for one epoch, channel-major in registry order."""
    blocks = []
    for ch in CHANNELS:
        if ch not in windows:
            raise MissingChannelError(ch)
        blocks.append(time_features(windows[ch], rate_hz).values)
    return np.concatenate(blocks)
