"""
Sensor log ingestion: parsing, linear-interpolation resampling and windowing.

Log rows are ``<channel>,<timestamp_ms>,<value>`` with ``channel`` one of
``acc_x ... rot_z``; lines starting with ``#`` are comments. The label sidecar
holds ``<epoch_index>,<mode>`` rows.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, TextIO

import numpy as np

from .errors import InsufficientDataError, InvalidInputError, ParseError

DEFAULT_RATE_HZ = 100.0
DEFAULT_WINDOW_SECONDS = 1.0

MODES = ("bike", "walk", "run", "bus", "car")


class Channel(enum.Enum):
    """One of the nine sensor/axis combinations, in registry order."""

    acc_x = ("accelerometer", "x")
    acc_y = ("accelerometer", "y")
    acc_z = ("accelerometer", "z")
    gyr_x = ("gyroscope", "x")
    gyr_y = ("gyroscope", "y")
    gyr_z = ("gyroscope", "z")
    rot_x = ("rotation_vector", "x")
    rot_y = ("rotation_vector", "y")
    rot_z = ("rotation_vector", "z")

    @property
    def sensor(self) -> str:
        return self.value[0]

    @property
    def axis(self) -> str:
        return self.value[1]

    def __str__(self):
        return self.name


CHANNELS = tuple(Channel)


class RawSample(NamedTuple):
    timestamp: int  # ms since stream start
    value: float


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled signal for one channel.

    ``start_index`` is the grid index of ``values[0]``, i.e. the first value sits
    at ``start_index / rate_hz`` seconds since stream start. Epoch boundaries are
    measured on this absolute grid so that channels stay aligned.
    """

    channel: Channel
    rate_hz: float
    values: np.ndarray
    start_index: int = 0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if not self.rate_hz > 0:
            raise InvalidInputError(f"rate_hz must be positive, got {self.rate_hz}")
        if values.ndim != 1 or values.size < 2:
            raise InsufficientDataError("a time series needs at least 2 values")
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("time series contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class Window:
    channel: Channel
    epoch_index: int
    samples: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.samples)


def channel_from_name(name: str) -> Channel:
    try:
        return Channel[name]
    except KeyError:
        raise InvalidInputError(f"unknown channel name {name!r}") from None


def _lines(text_stream) -> Iterable[str]:
    if isinstance(text_stream, str):
        return text_stream.splitlines()
    return text_stream


def parse_log(text_stream: TextIO | Iterable[str] | str) -> dict[Channel, list[RawSample]]:
    """Parse a delimited sensor log into per-channel sample lists.

    Samples are sorted by timestamp; when a timestamp repeats the value that
    appears last in the stream wins.
    """
    raw: dict[Channel, dict[int, float]] = {}
    for lineno, line in enumerate(_lines(text_stream), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 3:
            raise ParseError(f"expected 3 fields, got {len(parts)}", lineno)
        name, ts, val = parts
        if name not in Channel.__members__:
            raise ParseError(f"unknown channel {name!r}", lineno)
        try:
            timestamp = int(ts)
        except ValueError:
            raise ParseError(f"bad timestamp {ts!r}", lineno) from None
        if timestamp < 0:
            raise ParseError(f"negative timestamp {timestamp}", lineno)
        try:
            value = float(val)
        except ValueError:
            raise ParseError(f"bad value {val!r}", lineno) from None
        if not math.isfinite(value):
            raise ParseError(f"non-finite value {val!r}", lineno)
        raw.setdefault(Channel[name], {})[timestamp] = value
    return {
        ch: [RawSample(t, v) for t, v in sorted(samples.items())]
        for ch, samples in raw.items()
    }


def parse_labels(text_stream: TextIO | Iterable[str] | str) -> dict[int, str]:
    """Parse the ``<epoch_index>,<mode>`` label sidecar."""
    labels = {}
    for lineno, line in enumerate(_lines(text_stream), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 2:
            raise ParseError(f"expected 2 fields, got {len(parts)}", lineno)
        try:
            epoch = int(parts[0])
        except ValueError:
            raise ParseError(f"bad epoch index {parts[0]!r}", lineno) from None
        if epoch < 0:
            raise ParseError(f"negative epoch index {epoch}", lineno)
        if parts[1] not in MODES:
            raise ParseError(f"unknown mode {parts[1]!r}", lineno)
        labels[epoch] = parts[1]
    return labels


def format_log(samples: Mapping[Channel, Iterable[RawSample]]) -> str:
    rows = []
    for ch in CHANNELS:
        for t, v in samples.get(ch, ()):
            rows.append(f"{ch.name},{int(t)},{float(v)!r}")
    return "\n".join(rows) + ("\n" if rows else "")


def format_labels(labels: Mapping[int, str]) -> str:
    return "".join(f"{e},{labels[e]}\n" for e in sorted(labels))


def resample_linear(samples: list[RawSample], rate_hz: float = DEFAULT_RATE_HZ,
                    channel: Channel = Channel.acc_x) -> TimeSeries:
    """Linearly interpolate irregular samples onto the grid ``k / rate_hz``.

    The grid is anchored at t = 0 and covers only ``[t_first, t_last]``; no
    value is extrapolated. Grid points coinciding with an input timestamp
    reproduce the input value exactly.
    """
    if len(samples) < 2:
        raise InsufficientDataError("resampling needs at least 2 samples")
    if not rate_hz > 0:
        raise InvalidInputError(f"rate_hz must be positive, got {rate_hz}")
    t = np.array([s.timestamp for s in samples], dtype=float)
    v = np.array([s.value for s in samples], dtype=float)
    if np.any(np.diff(t) <= 0):
        raise InvalidInputError("timestamps must be strictly increasing")
    first = math.ceil(t[0] * rate_hz / 1000.0 - 1e-9)
    last = math.floor(t[-1] * rate_hz / 1000.0 + 1e-9)
    if last - first < 1:
        raise InsufficientDataError("sample span is shorter than one output period")
    grid_ms = np.arange(first, last + 1) * 1000.0 / rate_hz
    # guard against the 1e-9 slack pushing a grid point outside the span
    grid_ms = np.clip(grid_ms, t[0], t[-1])
    return TimeSeries(channel, float(rate_hz), np.interp(grid_ms, t, v), start_index=first)


def window_length(rate_hz: float, window_seconds: float) -> int:
    if not window_seconds > 0:
        raise InvalidInputError(f"window_seconds must be positive, got {window_seconds}")
    return int(round(rate_hz * window_seconds))


def cut_windows(series: TimeSeries, window_seconds: float = DEFAULT_WINDOW_SECONDS) -> list[Window]:
    """Cut non-overlapping windows aligned to absolute epoch boundaries.

    Epoch ``e`` spans grid indices ``[e*L, (e+1)*L)``. Only complete epochs are
    returned; a partial leading or trailing epoch is discarded.
    """
    L = window_length(series.rate_hz, window_seconds)
    if L < 1:
        raise InvalidInputError("window shorter than one sample")
    start = series.start_index
    first_epoch = -(-start // L)
    offset = first_epoch * L - start
    n_full = (len(series) - offset) // L if len(series) > offset else 0
    values = series.values
    return [
        Window(series.channel, first_epoch + e, values[offset + e * L: offset + (e + 1) * L])
        for e in range(n_full)
    ]


def load_streams(log_text, rate_hz: float = DEFAULT_RATE_HZ) -> dict[Channel, TimeSeries]:
    """Parse a log and resample every channel that has enough samples."""
    parsed = parse_log(log_text)
    return {ch: resample_linear(s, rate_hz, channel=ch) for ch, s in parsed.items()}
