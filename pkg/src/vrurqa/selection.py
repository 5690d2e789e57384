"""Feature tables and minimum-redundancy maximum-relevance (mRMR) ranking."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateLabelsError, InvalidInputError

MRMR_BINS = 8


@dataclass(frozen=True)
class FeatureTable:
    """Per-epoch feature rows with a name registry and integer class labels.

    ``labels[i]`` indexes into ``classes``.
    """

    names: tuple[str, ...]
    values: np.ndarray
    labels: np.ndarray
    classes: tuple[str, ...]
    epochs: np.ndarray | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        labels = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "classes", tuple(self.classes))
        if values.ndim != 2 or values.shape[1] != len(self.names):
            raise InvalidInputError("feature rows must match the name registry")
        if labels.shape != (values.shape[0],):
            raise InvalidInputError("one label per row required")
        if labels.size and (labels.min() < 0 or labels.max() >= len(self.classes)):
            raise InvalidInputError("label outside the class list")
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("feature table contains non-finite entries")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)
        if self.epochs is not None:
            object.__setattr__(self, "epochs", np.asarray(self.epochs, dtype=np.int64))

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    def columns(self, indices: Sequence[int]) -> "FeatureTable":
        idx = list(indices)
        return FeatureTable(tuple(self.names[i] for i in idx), self.values[:, idx],
                            self.labels, self.classes, self.epochs)

    def rows(self, indices) -> "FeatureTable":
        return FeatureTable(self.names, self.values[indices], self.labels[indices],
                            self.classes, None if self.epochs is None else self.epochs[indices])

    def label_names(self) -> list[str]:
        return [self.classes[i] for i in self.labels]


@dataclass(frozen=True)
class MrmrRanking:
    ordered_indices: tuple[int, ...]
    scores: tuple[float, ...]

    def __len__(self):
        return len(self.ordered_indices)

    def top(self, k: int) -> list[int]:
        return list(self.ordered_indices[:k])


def discretize(column, bins: int = MRMR_BINS) -> np.ndarray:
    """Equal-frequency binning.

    Each value goes to bucket ``floor(r * bins / n)`` where ``r`` is the rank of
    its first occurrence in sorted order, so tied values share a bucket and a
    constant column maps entirely to bucket 0.
    """
    if bins < 2:
        raise InvalidInputError("bins must be at least 2")
    x = np.asarray(column, dtype=float)
    n = x.size
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    rank = np.searchsorted(np.sort(x, kind="stable"), x, side="left")
    return (rank * bins) // n


def _entropy(counts: np.ndarray, n: int) -> float:
    p = counts[counts > 0] / n
    return -math.fsum((p * np.log2(p)).tolist())


def mutual_information(a, b) -> float:
    """Plug-in mutual information (bits) between two integer sequences."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise InvalidInputError("sequences must be 1-D and of equal length")
    if a.size == 0:
        raise InvalidInputError("sequences must be non-empty")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    nb = int(bi.max()) + 1
    joint = np.bincount(ai * nb + bi)
    n = a.size
    mi = (_entropy(np.bincount(ai), n) + _entropy(np.bincount(bi), n) - _entropy(joint, n))
    return max(mi, 0.0)


def _coded_mi(a: np.ndarray, b: np.ndarray, nb: int, ha: float, hb: float) -> float:
    """MI of non-negative codes with precomputed marginal entropies."""
    mi = ha + hb - _entropy(np.bincount(a * nb + b), a.size)
    return max(mi, 0.0)


def mrmr_rank(table: FeatureTable, k: int | None = None, bins: int = MRMR_BINS) -> MrmrRanking:
    """Greedy mRMR ranking with the difference (MID) criterion.

    Step 1 takes the feature with the largest relevance ``I(f; class)``; each
    later step takes the remaining feature maximising relevance minus its mean
    mutual information with the already selected set. Ties go to the lower index.
    """
    p = table.n_features
    k = p if k is None else k
    if not 1 <= k <= p:
        raise InvalidInputError(f"k must be in [1, {p}], got {k}")
    if np.unique(table.labels).size < 2:
        raise DegenerateLabelsError("mRMR needs at least two classes")
    disc = np.stack([discretize(table.values[:, j], bins) for j in range(p)], axis=1)
    n = table.n_rows
    h = [_entropy(np.bincount(disc[:, j]), n) for j in range(p)]
    n_cls = len(table.classes)
    h_cls = _entropy(np.bincount(table.labels), n)
    relevance = np.array([_coded_mi(disc[:, j], table.labels, n_cls, h[j], h_cls)
                          for j in range(p)])
    redundancy = np.zeros(p)
    remaining = np.ones(p, dtype=bool)
    chosen, scores = [], []
    for step in range(k):
        score = relevance - redundancy / step if step else relevance.copy()
        score[~remaining] = -np.inf
        j = int(np.argmax(score))
        chosen.append(j)
        scores.append(float(score[j]))
        remaining[j] = False
        if step + 1 < k:
            for f in np.flatnonzero(remaining):
                redundancy[f] += _coded_mi(disc[:, f], disc[:, j], bins, h[f], h[j])
    return MrmrRanking(tuple(chosen), tuple(scores))


def format_ranking(ranking: MrmrRanking, names: Sequence[str]) -> str:
    lines = ["rank,feature_name,score"]
    for r, (j, s) in enumerate(zip(ranking.ordered_indices, ranking.scores), start=1):
        lines.append(f"{r},{names[j]},{s:.12g}")
    return "\n".join(lines) + "\n"


def parse_ranking(text: str, names: Sequence[str]) -> MrmrRanking:
    """Read a ranking report back, mapping feature names to column indices of ``names``."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].strip() != "rank,feature_name,score":
        raise InvalidInputError("ranking report must start with rank,feature_name,score")
    where = {n: i for i, n in enumerate(names)}
    idx, scores = [], []
    for ln in lines[1:]:
        _, name, score = ln.split(",")
        if name not in where:
            raise InvalidInputError(f"ranked feature {name!r} is not in the table")
        idx.append(where[name])
        scores.append(float(score))
    return MrmrRanking(tuple(idx), tuple(scores))
