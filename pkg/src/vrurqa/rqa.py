"""
Recurrence plots and recurrence quantification analysis (RQA).

Six measures per plot: recurrence rate (RR), determinism (DET), longest
diagonal line (Lmax), diagonal-length entropy (ENT, bits), laminarity (LAM)
and trapping time (TT). The line of identity (LOI) is left out of the
diagonal statistics but counted in RR and in vertical runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numba
import numpy as np

from .embed import EmbeddedTrajectory, EmbeddingParams, embed
from .errors import InvalidInputError, MissingChannelError
from .ingest import CHANNELS, Channel, Window

RQA_MEASURES = ("rr", "det", "lmax", "ent", "lam", "tt")
N_RQA_FEATURES = len(RQA_MEASURES)
RQA_FEATURE_NAMES = tuple(f"{ch.name}.{m}" for ch in CHANNELS for m in RQA_MEASURES)
LMIN = 2
VMIN = 2


@dataclass(frozen=True)
class RecurrencePlot:
    matrix: np.ndarray  # (N, N) bool

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=bool)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvalidInputError("recurrence matrix must be square")
        object.__setattr__(self, "matrix", m)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class RqaFeatureVector:
    rr: float
    det: float
    lmax: float
    ent: float
    lam: float
    tt: float

    def as_array(self) -> np.ndarray:
        return np.array([self.rr, self.det, self.lmax, self.ent, self.lam, self.tt])


# -- kernels -----------------------------------------------------------------

@numba.njit(cache=True, nogil=True)
def _recurrence_matrix(points, threshold):
    n, m = points.shape
    out = np.zeros((n, n), dtype=np.bool_)
    for i in range(n):
        out[i, i] = True
        for j in range(i + 1, n):
            s = 0.0
            for k in range(m):
                d = points[i, k] - points[j, k]
                s += d * d
            if math.sqrt(s) <= threshold:
                out[i, j] = True
                out[j, i] = True
    return out


@numba.njit(cache=True, nogil=True)
def _max_distance(points):
    n, m = points.shape
    best = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            s = 0.0
            for k in range(m):
                d = points[i, k] - points[j, k]
                s += d * d
            s = math.sqrt(s)
            if s > best:
                best = s
    return best


@numba.njit(cache=True, nogil=True)
def _diagonal_counts(rp):
    """counts[L] = number of maximal diagonal runs of length L, both triangles, LOI excluded."""
    n = rp.shape[0]
    counts = np.zeros(n + 1, dtype=np.int64)
    for k in range(1, n):
        run = 0
        for i in range(n - k):
            if rp[i, i + k]:
                run += 1
            elif run:
                counts[run] += 1
                run = 0
        if run:
            counts[run] += 1
        run = 0
        for i in range(n - k):
            if rp[i + k, i]:
                run += 1
            elif run:
                counts[run] += 1
                run = 0
        if run:
            counts[run] += 1
    return counts


@numba.njit(cache=True, nogil=True)
def _vertical_counts(rp):
    n = rp.shape[0]
    counts = np.zeros(n + 1, dtype=np.int64)
    for j in range(n):
        run = 0
        for i in range(n):
            if rp[i, j]:
                run += 1
            elif run:
                counts[run] += 1
                run = 0
        if run:
            counts[run] += 1
    return counts


@numba.njit(cache=True, nogil=True)
def _measures_from_counts(n_true, n, diag, vert, lmin, vmin):
    out = np.zeros(6)
    out[0] = n_true / (n * n)
    off_loi = n_true - n
    det_pts = 0
    n_lines = 0
    lmax = 0
    for L in range(max(lmin, 1), diag.size):
        c = diag[L]
        if c:
            det_pts += L * c
            n_lines += c
            lmax = L
    out[1] = det_pts / off_loi if off_loi > 0 else 0.0
    out[2] = lmax
    ent = 0.0
    if n_lines:
        for L in range(max(lmin, 1), diag.size):
            c = diag[L]
            if c:
                p = c / n_lines
                ent -= p * math.log2(p)
    out[3] = ent
    lam_pts = 0
    n_vert = 0
    for L in range(max(vmin, 1), vert.size):
        c = vert[L]
        if c:
            lam_pts += L * c
            n_vert += c
    out[4] = lam_pts / n_true if n_true > 0 else 0.0
    out[5] = lam_pts / n_vert if n_vert else 0.0
    return out


@numba.njit(cache=True, nogil=True)
def _rqa_kernel(rp, lmin, vmin):
    n = rp.shape[0]
    n_true = 0
    for i in range(n):
        for j in range(n):
            if rp[i, j]:
                n_true += 1
    return _measures_from_counts(n_true, n, _diagonal_counts(rp), _vertical_counts(rp), lmin, vmin)


@numba.njit(cache=True, nogil=True)
def _rqa_batch(samples, delay, dim, threshold, relative, lmin, vmin):
    """RQA measures for each row of ``samples`` (n_windows, N)."""
    n_win, N = samples.shape
    n_pts = N - (dim - 1) * delay
    out = np.empty((n_win, 6))
    pts = np.empty((n_pts, dim))
    for w in range(n_win):
        for i in range(n_pts):
            for k in range(dim):
                pts[i, k] = samples[w, i + k * delay]
        t = threshold * _max_distance(pts) if relative else threshold
        out[w] = _rqa_kernel(_recurrence_matrix(pts, t), lmin, vmin)
    return out


# -- public API ----------------------------------------------------------------

def recurrence_plot(traj: EmbeddedTrajectory | np.ndarray, threshold: float,
                    relative: bool = False) -> RecurrencePlot:
    """Threshold the pairwise Euclidean distances: cell (i, j) is set iff ``d_ij <= threshold``.

    With ``relative=True`` the threshold is a fraction of the largest pairwise distance.
    """
    pts = np.ascontiguousarray(traj.points if isinstance(traj, EmbeddedTrajectory) else traj,
                               dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.shape[0] < 2:
        raise InvalidInputError("recurrence plot needs at least 2 points")
    if not threshold > 0:
        raise InvalidInputError("threshold must be positive")
    if not np.all(np.isfinite(pts)):
        raise InvalidInputError("trajectory contains non-finite coordinates")
    if relative:
        threshold = threshold * _max_distance(pts)
    return RecurrencePlot(_recurrence_matrix(pts, float(threshold)))


def _as_histogram(counts: np.ndarray, lmin: int) -> dict[int, int]:
    return {L: int(c) for L, c in enumerate(counts) if L >= max(lmin, 1) and c}


def diagonal_lines(rp: RecurrencePlot, lmin: int = LMIN) -> dict[int, int]:
    """Histogram ``{length: count}`` of diagonal runs off the LOI, mirror runs included."""
    return _as_histogram(_diagonal_counts(rp.matrix), lmin)


def vertical_lines(rp: RecurrencePlot, vmin: int = VMIN) -> dict[int, int]:
    """Histogram ``{length: count}`` of vertical runs, LOI cells included."""
    return _as_histogram(_vertical_counts(rp.matrix), vmin)


def rqa_features(rp: RecurrencePlot, lmin: int = LMIN, vmin: int = VMIN) -> RqaFeatureVector:
    return RqaFeatureVector(*_rqa_kernel(rp.matrix, lmin, vmin).tolist())


def rqa_matrix(samples: np.ndarray, params: EmbeddingParams, lmin: int = LMIN, vmin: int = VMIN,
               relative: bool = False) -> np.ndarray:
    """RQA measures for every window row of ``samples``; returns ``(n_windows, 6)``."""
    x = np.ascontiguousarray(samples, dtype=float)
    if x.ndim != 2:
        raise InvalidInputError("expected a 2-D (n_windows, n_samples) array")
    params.check(x.shape[1])
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("window contains non-finite samples")
    return _rqa_batch(x, params.delay, params.dimension, float(params.threshold),
                      relative, lmin, vmin)


def window_rqa(window: Window | np.ndarray, params: EmbeddingParams, lmin: int = LMIN,
               vmin: int = VMIN, relative: bool = False) -> RqaFeatureVector:
    x = window.samples if isinstance(window, Window) else window
    rp = recurrence_plot(embed(x, params), params.threshold, relative=relative)
    return rqa_features(rp, lmin, vmin)


def rqa_block(windows: Mapping[Channel, Window], params: Mapping[Channel, EmbeddingParams],
              lmin: int = LMIN, vmin: int = VMIN, relative: bool = False) -> np.ndarray:
    """54-vector for one epoch, channel-major in registry order."""
    blocks = []
    for ch in CHANNELS:
        if ch not in windows:
            raise MissingChannelError(ch)
        blocks.append(window_rqa(windows[ch], params[ch], lmin, vmin, relative).as_array())
    return np.concatenate(blocks)


def format_rp(rp: RecurrencePlot) -> str:
    """N lines of N ``0``/``1`` characters."""
    return "".join("".join("1" if v else "0" for v in row) + "\n" for row in rp.matrix)


def parse_rp(text: str) -> RecurrencePlot:
    rows = [line.strip() for line in text.splitlines() if line.strip()]
    if any(set(r) - {"0", "1"} for r in rows):
        raise InvalidInputError("recurrence plot dump must contain only 0 and 1")
    return RecurrencePlot(np.array([[c == "1" for c in r] for r in rows], dtype=bool))
