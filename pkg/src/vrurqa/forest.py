"""
Random forest classifier: bootstrap-bagged CART trees grown on random feature
subsets with the Gini criterion, combined by majority vote.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numba
import numpy as np

from .errors import (DegenerateLabelsError, InvalidInputError, InvalidLabelError,
                     StratificationError)
from .selection import FeatureTable

MODEL_FORMAT = "vrurqa-forest"
MODEL_VERSION = 1


# -- label schemes -------------------------------------------------------------

@dataclass(frozen=True)
class LabelScheme:
    name: str
    classes: tuple[str, ...]


FIVE_CLASS = LabelScheme("five_class", ("bike", "walk", "run", "bus", "car"))
FOUR_CLASS = LabelScheme("four_class", ("bike", "walk", "run", "non_vru"))
BINARY = LabelScheme("binary", ("vru", "non_vru"))
SCHEMES = {s.name: s for s in (FIVE_CLASS, FOUR_CLASS, BINARY)}

_NON_VRU = {"bus", "car"}


def get_scheme(scheme: LabelScheme | str) -> LabelScheme:
    if isinstance(scheme, LabelScheme):
        return scheme
    try:
        return SCHEMES[scheme]
    except KeyError:
        raise InvalidInputError(f"unknown label scheme {scheme!r}") from None


def map_labels(label: str, scheme: LabelScheme | str) -> str:
    """Map a five-class mode to its class under ``scheme``."""
    scheme = get_scheme(scheme)
    if label not in FIVE_CLASS.classes:
        raise InvalidLabelError(f"unknown mode {label!r}")
    if scheme is FIVE_CLASS:
        return label
    if scheme is FOUR_CLASS:
        return "non_vru" if label in _NON_VRU else label
    return "non_vru" if label in _NON_VRU else "vru"


def relabel(table: FeatureTable, scheme: LabelScheme | str) -> FeatureTable:
    """Re-express a five-class table under another scheme."""
    scheme = get_scheme(scheme)
    if table.classes != FIVE_CLASS.classes:
        raise InvalidLabelError("relabelling needs a five-class table")
    lookup = np.array([scheme.classes.index(map_labels(c, scheme)) for c in FIVE_CLASS.classes])
    return FeatureTable(table.names, table.values, lookup[table.labels], scheme.classes,
                        table.epochs)


# -- kernels -------------------------------------------------------------------

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


@numba.njit(cache=True, nogil=True)
def _splitmix_next(state):
    """Advance a one-element uint64 state array and return the next output."""
    state[0] += _GOLDEN
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


@numba.njit(cache=True, nogil=True)
def _randbelow(state, k):
    return int((_splitmix_next(state) >> np.uint64(11)) * (1.0 / 9007199254740992.0) * k)


@numba.njit(cache=True, nogil=True)
def _gini_sum(counts, total):
    s = 0.0
    for c in counts:
        s += c * c
    return total - s / total


@numba.njit(cache=True, nogil=True)
def _sort_keys(keys, m, tmp, count, n_bits):
    """Sort ``keys[:m]`` in place (LSD radix, 8-bit digits; insertion sort when short)."""
    if m <= 48:
        for i in range(1, m):
            v = keys[i]
            j = i - 1
            while j >= 0 and keys[j] > v:
                keys[j + 1] = keys[j]
                j -= 1
            keys[j + 1] = v
        return
    src = keys
    dst = tmp
    shift = 0
    n_pass = 0
    while shift < n_bits:
        count[:] = 0
        for i in range(m):
            count[(src[i] >> shift) & 255] += 1
        total = 0
        for d in range(256):
            c = count[d]
            count[d] = total
            total += c
        for i in range(m):
            d = (src[i] >> shift) & 255
            dst[count[d]] = src[i]
            count[d] += 1
        src, dst = dst, src
        shift += 8
        n_pass += 1
    if n_pass % 2 == 1:
        for i in range(m):
            keys[i] = tmp[i]


@numba.njit(cache=True, nogil=True)
def _grow_tree(ranks, uniq, offsets, y, sample, n_classes, mtry, min_leaf, state):
    """Grow one tree on the rows listed in ``sample`` (bootstrap with repeats).

    ``ranks[f, i]`` is the position of row ``i``'s value of feature ``f`` among
    that feature's sorted unique training values ``uniq[offsets[f]:offsets[f+1]]``.
    Returns node arrays (feature, threshold, left, right, counts, decrease).
    Leaves have feature == -1; ``decrease`` is each split's weighted Gini
    decrease normalised by the root sample count.
    """
    n = sample.size
    p = ranks.shape[0]
    cap = 2 * n + 1
    feature = np.full(cap, -1, dtype=np.int64)
    split_rank = np.zeros(cap, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    counts = np.zeros((cap, n_classes), dtype=np.int64)
    decrease = np.zeros(cap)

    cbits = 1
    while (1 << cbits) < n_classes:
        cbits += 1
    cmask = (1 << cbits) - 1

    idx = sample.copy()
    buf = np.empty(n, dtype=np.int64)
    keys = np.empty(n, dtype=np.int64)
    tmp = np.empty(n, dtype=np.int64)
    radix_count = np.empty(256, dtype=np.int64)
    perm = np.arange(p)
    cl = np.empty(n_classes, dtype=np.int64)
    cr = np.empty(n_classes, dtype=np.int64)

    stack_node = np.empty(cap, dtype=np.int64)
    stack_lo = np.empty(cap, dtype=np.int64)
    stack_hi = np.empty(cap, dtype=np.int64)
    stack_node[0] = 0
    stack_lo[0] = 0
    stack_hi[0] = n
    top = 1
    n_nodes = 1

    while top > 0:
        top -= 1
        node = stack_node[top]
        lo = stack_lo[top]
        hi = stack_hi[top]
        m = hi - lo
        for i in range(lo, hi):
            counts[node, y[idx[i]]] += 1
        n_present = 0
        for c in range(n_classes):
            if counts[node, c] > 0:
                n_present += 1
        if n_present < 2 or m < 2 * min_leaf:
            continue
        parent_g = _gini_sum(counts[node], m)

        # maximise sum(cl^2)/nl + sum(cr^2)/nr, equivalent to minimising weighted Gini
        best_q = -1.0
        best_f = -1
        best_r = -1
        evaluated = 0
        drawn = 0
        while evaluated < mtry and drawn < p:
            r = drawn + _randbelow(state, p - drawn)
            f = perm[r]
            perm[r] = perm[drawn]
            perm[drawn] = f
            drawn += 1
            n_uniq = offsets[f + 1] - offsets[f]
            for i in range(m):
                row = idx[lo + i]
                keys[i] = (ranks[f, row] << cbits) | y[row]
            n_bits = cbits + 1
            while (1 << n_bits) < (n_uniq << cbits):
                n_bits += 1
            _sort_keys(keys, m, tmp, radix_count, n_bits)
            if (keys[0] >> cbits) == (keys[m - 1] >> cbits):
                continue
            evaluated += 1
            sq_l = 0
            sq_r = 0
            for c in range(n_classes):
                cl[c] = 0
                cr[c] = counts[node, c]
                sq_r += cr[c] * cr[c]
            for i in range(m - 1):
                c = keys[i] & cmask
                sq_l += 2 * cl[c] + 1
                sq_r -= 2 * cr[c] - 1
                cl[c] += 1
                cr[c] -= 1
                ra = keys[i] >> cbits
                if ra == (keys[i + 1] >> cbits):
                    continue
                nl = i + 1
                nr = m - nl
                if nl < min_leaf or nr < min_leaf:
                    continue
                q = sq_l / nl + sq_r / nr
                # ranks order like values, so (f, rank) orders like (f, threshold)
                if q > best_q or (q == best_q and (f < best_f or (f == best_f and ra < best_r))):
                    best_q = q
                    best_f = f
                    best_r = ra
                    split_rank[node] = keys[i + 1] >> cbits
        if best_f < 0:
            continue

        # stable partition of idx[lo:hi]: rank <= best_r goes left
        nl = 0
        for i in range(lo, hi):
            if ranks[best_f, idx[i]] <= best_r:
                buf[nl] = idx[i]
                nl += 1
        k = nl
        for i in range(lo, hi):
            if ranks[best_f, idx[i]] > best_r:
                buf[k] = idx[i]
                k += 1
        for i in range(m):
            idx[lo + i] = buf[i]

        a = uniq[offsets[best_f] + best_r]
        b = uniq[offsets[best_f] + split_rank[node]]
        t = 0.5 * (a + b)
        if t >= b or t < a:
            t = a
        feature[node] = best_f
        threshold[node] = t
        decrease[node] = (parent_g - (m - best_q)) / n
        lnode = n_nodes
        rnode = n_nodes + 1
        n_nodes += 2
        left[node] = lnode
        right[node] = rnode
        # push right first so the left subtree is numbered depth-first
        stack_node[top] = rnode
        stack_lo[top] = lo + nl
        stack_hi[top] = hi
        top += 1
        stack_node[top] = lnode
        stack_lo[top] = lo
        stack_hi[top] = lo + nl
        top += 1

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), counts[:n_nodes].copy(), decrease[:n_nodes].copy())


@numba.njit(cache=True, nogil=True)
def _apply_tree(X, feature, threshold, left, right):
    out = np.empty(X.shape[0], dtype=np.int64)
    for r in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[r, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[r] = node
    return out


# -- model types ---------------------------------------------------------------

@dataclass
class DecisionTree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray  # (n_nodes, n_classes) training class counts per node
    decrease: np.ndarray = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    @property
    def leaf_class(self) -> np.ndarray:
        # ties go to the earlier class
        return np.argmax(self.counts, axis=1)

    def apply(self, X: np.ndarray) -> np.ndarray:
        return _apply_tree(np.ascontiguousarray(X, dtype=float), self.feature, self.threshold,
                           self.left, self.right)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.leaf_class[self.apply(X)]


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    n_features_per_split: int | None = None  # None: floor(sqrt(p))
    min_leaf: int = 1
    seed: int = 0
    n_jobs: int = 1

    def mtry(self, p: int) -> int:
        if self.n_features_per_split is None:
            return max(1, math.isqrt(p))
        return int(min(max(self.n_features_per_split, 1), p))


@dataclass
class ForestModel:
    trees: list[DecisionTree]
    n_features_per_split: int
    seed: int
    classes: tuple[str, ...]
    n_features: int
    feature_names: tuple[str, ...] = ()

    @property
    def n_trees(self) -> int:
        return len(self.trees)


def _tree_streams(seed: int, n_trees: int):
    for child in np.random.SeedSequence(seed).spawn(n_trees):
        boot_seed, split_seed = child.generate_state(2, dtype=np.uint64)
        yield np.random.Generator(np.random.PCG64(int(boot_seed))), np.array([split_seed],
                                                                             dtype=np.uint64)


def _rank_encode(values: np.ndarray):
    """Feature-major rank matrix plus the concatenated sorted unique values."""
    n, p = values.shape
    ranks = np.empty((p, n), dtype=np.int64)
    uniq, offsets = [], [0]
    for f in range(p):
        u, inv = np.unique(values[:, f], return_inverse=True)
        ranks[f] = inv.ravel()
        uniq.append(u)
        offsets.append(offsets[-1] + u.size)
    return ranks, np.concatenate(uniq).astype(float), np.array(offsets, dtype=np.int64)


def train(table: FeatureTable, config: ForestConfig = ForestConfig()) -> ForestModel:
    """Fit a forest; (data, config) fully determine the result."""
    if table.n_rows < 2:
        raise DegenerateLabelsError("training needs at least 2 rows")
    if np.unique(table.labels).size < 2:
        raise DegenerateLabelsError("training needs at least 2 classes")
    if config.n_trees < 1 or config.min_leaf < 1:
        raise InvalidInputError("n_trees and min_leaf must be positive")
    ranks, uniq, offsets = _rank_encode(table.values)
    y = np.ascontiguousarray(table.labels, dtype=np.int64)
    n, p = table.values.shape
    mtry = config.mtry(p)
    n_classes = len(table.classes)
    jobs = []
    for gen, state in _tree_streams(config.seed, config.n_trees):
        jobs.append((gen.integers(0, n, size=n).astype(np.int64), state))

    def grow(job):
        sample, state = job
        return DecisionTree(*_grow_tree(ranks, uniq, offsets, y, sample, n_classes, mtry,
                                        config.min_leaf, state))

    if config.n_jobs > 1:
        with ThreadPoolExecutor(config.n_jobs) as pool:
            trees = list(pool.map(grow, jobs))
    else:
        trees = [grow(j) for j in jobs]
    return ForestModel(trees, mtry, config.seed, table.classes, p, table.names)


def votes(model: ForestModel, X) -> np.ndarray:
    """Per-row vote counts ``(n_rows, n_classes)``; rows sum to ``n_trees``."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.n_features:
        raise InvalidInputError(f"expected {model.n_features} features, got {X.shape[1]}")
    out = np.zeros((X.shape[0], len(model.classes)), dtype=np.int64)
    rows = np.arange(X.shape[0])
    Xc = np.ascontiguousarray(X)
    for tree in model.trees:
        np.add.at(out, (rows, tree.predict(Xc)), 1)
    return out


def predict_many(model: ForestModel, X) -> np.ndarray:
    """Class indices by majority vote; ties go to the earlier class in the scheme."""
    return np.argmax(votes(model, X), axis=1)


def predict(model: ForestModel, row) -> str:
    row = np.asarray(row, dtype=float)
    if row.ndim != 1:
        raise InvalidInputError("predict takes a single feature row")
    return model.classes[int(predict_many(model, row[None, :])[0])]


def feature_importance(model: ForestModel) -> np.ndarray:
    """Mean (over trees) Gini decrease attributed to each feature."""
    imp = np.zeros(model.n_features)
    for tree in model.trees:
        split = tree.feature >= 0
        np.add.at(imp, tree.feature[split], tree.decrease[split])
    return imp / model.n_trees


def total_impurity_decrease(model: ForestModel) -> float:
    return float(sum(t.decrease.sum() for t in model.trees) / model.n_trees)


# -- cross-validation ----------------------------------------------------------

@dataclass
class CVResult:
    mean_accuracy: float
    fold_accuracies: list[float]
    confusion: np.ndarray  # rows: true class, columns: predicted
    classes: tuple[str, ...]


def stratified_folds(labels: np.ndarray, folds: int, seed: int) -> np.ndarray:
    """Fold id per row; each class is shuffled and dealt round-robin."""
    if folds < 2:
        raise InvalidInputError("folds must be at least 2")
    labels = np.asarray(labels)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0x5F01D])))
    assign = np.empty(labels.size, dtype=np.int64)
    for c in np.unique(labels):
        rows = np.flatnonzero(labels == c)
        if rows.size < folds:
            raise StratificationError(f"class {c} has {rows.size} rows, fewer than {folds} folds")
        rows = rows[rng.permutation(rows.size)]
        assign[rows] = np.arange(rows.size) % folds
    return assign


def cross_validate(table: FeatureTable, config: ForestConfig = ForestConfig(),
                   folds: int = 5, scheme: LabelScheme | str | None = None) -> CVResult:
    """Stratified k-fold accuracy and pooled confusion matrix."""
    if scheme is not None:
        scheme = get_scheme(scheme)
        if table.classes != scheme.classes:
            table = relabel(table, scheme)
    fold_of = stratified_folds(table.labels, folds, config.seed)
    n_cls = len(table.classes)
    confusion = np.zeros((n_cls, n_cls), dtype=np.int64)
    accs = []
    for k in range(folds):
        test = fold_of == k
        model = train(table.rows(np.flatnonzero(~test)), config)
        pred = predict_many(model, table.values[test])
        truth = table.labels[test]
        np.add.at(confusion, (truth, pred), 1)
        accs.append(float(np.mean(pred == truth)))
    return CVResult(float(np.mean(accs)), accs, confusion, table.classes)


# -- serialisation -------------------------------------------------------------

def dumps_model(model: ForestModel) -> str:
    """JSON text, schema ``{format, version, classes, n_features, ...trees}``.

    Each tree stores parallel node arrays; leaves have ``feature == -1``.
    Floats are written with ``repr`` precision so reloaded models predict
    bit-identically.
    """
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "classes": list(model.classes),
        "n_features": model.n_features,
        "feature_names": list(model.feature_names),
        "n_features_per_split": model.n_features_per_split,
        "seed": model.seed,
        "trees": [
            {
                "feature": t.feature.tolist(),
                "threshold": t.threshold.tolist(),
                "left": t.left.tolist(),
                "right": t.right.tolist(),
                "counts": t.counts.tolist(),
                "decrease": t.decrease.tolist(),
            }
            for t in model.trees
        ],
    }
    return json.dumps(doc)


def loads_model(text: str) -> ForestModel:
    doc = json.loads(text)
    if doc.get("format") != MODEL_FORMAT:
        raise InvalidInputError("not a serialised forest")
    if doc.get("version") != MODEL_VERSION:
        raise InvalidInputError(f"unsupported model version {doc.get('version')}")
    n_cls = len(doc["classes"])
    trees = [
        DecisionTree(
            np.array(t["feature"], dtype=np.int64),
            np.array(t["threshold"], dtype=float),
            np.array(t["left"], dtype=np.int64),
            np.array(t["right"], dtype=np.int64),
            np.array(t["counts"], dtype=np.int64).reshape(-1, n_cls),
            np.array(t["decrease"], dtype=float),
        )
        for t in doc["trees"]
    ]
    return ForestModel(trees, doc["n_features_per_split"], doc["seed"], tuple(doc["classes"]),
                       doc["n_features"], tuple(doc.get("feature_names", ())))
