"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line."""

import math
import time
from pathlib import Path

import numpy as np
import pytest
from test_embed import PERIOD, QUARTER, histogram_mi
from test_forest import blobs, table
from test_rqa import oracle_features, random_rp

from vrurqa.embed import EmbeddingParams, ami, default_params, embed, fnn_fraction
from vrurqa.forest import (SCHEMES, ForestConfig, cross_validate, dumps_model, map_labels,
                           predict_many, train)
from vrurqa.ingest import CHANNELS, MODES, format_log, load_streams
from vrurqa.pipeline import (FEATURE_SETS, accuracy_curve, build_feature_table, epoch_windows,
                             feature_names, rank_for)
from vrurqa.rqa import RQA_FEATURE_NAMES, rqa_features
from vrurqa.selection import FeatureTable, mrmr_rank
from vrurqa.synth import generate_suite
from vrurqa.timefeat import N_TIME_FEATURES, TIME_FEATURE_NAMES, time_feature_matrix

README = Path(__file__).resolve().parents[1] / "README.md"


def test_criterion_01_defaults_are_configuration(record):
    d = default_params()
    shipped = all(d[ch] == EmbeddingParams(10, 4, 0.9) for ch in CHANNELS
                  if ch.sensor in ("accelerometer", "gyroscope"))
    shipped &= all(d[ch] == EmbeddingParams(30, 3, 0.01) for ch in CHANNELS
                   if ch.sensor == "rotation_vector")
    text = README.read_text().lower() if README.exists() else ""
    stated = "not reproducible" in text and "private" in text
    ok = record(1, shipped and stated,
                "defaults (10,4,0.9)/(30,3,0.01) shipped; README states the reported "
                "accuracies are not reproducible")
    assert ok


def test_criterion_02_rqa_oracle(record):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        rp = random_rp(rng, int(rng.integers(1, 16)), rng.uniform(0, 1))
        got = rqa_features(rp).as_array()
        worst = max(worst, float(np.max(np.abs(got - oracle_features(rp.matrix.tolist())))))
    elapsed = time.perf_counter() - t0
    ok = record(2, worst <= 1e-12 and elapsed < 10,
                f"200 plots, max deviation {worst:.1e}, {elapsed:.2f} s")
    assert ok


def test_criterion_03_embedding(record):
    rng = np.random.default_rng(3)
    ok = True
    for _ in range(50):
        m, tau = int(rng.integers(1, 7)), int(rng.integers(1, 15))
        n = int(rng.integers((m - 1) * tau + 2, 300))
        x = rng.normal(size=n)
        pts = embed(x, EmbeddingParams(tau, m)).points
        expected = [[x[k + j * tau] for j in range(m)] for k in range(n - (m - 1) * tau)]
        ok &= pts.shape[0] == n - (m - 1) * tau and pts.tolist() == expected
    record(3, ok, "50 random (series, m, tau) triples match index arithmetic exactly")
    assert ok


def test_criterion_04_ami(record):
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(20):
        x = rng.normal(size=int(rng.integers(100, 600)))
        lag = int(rng.integers(1, 20))
        worst = max(worst, abs(ami(x, lag) - histogram_mi(x.tolist(), lag)))
    x = rng.normal(size=500)
    b = np.minimum(((x - x.min()) / (x.max() - x.min()) * 16).astype(int), 15)
    p = np.bincount(b) / x.size
    p = p[p > 0]
    h = -math.fsum(p * np.log2(p))
    noise = ami(rng.uniform(size=10_000), 5)
    ok = record(4, worst <= 1e-9 and ami(x, 0) == h and noise < 0.1,
                f"oracle deviation {worst:.1e}, lag-0 entropy exact, noise AMI {noise:.4f} bits")
    assert ok


@pytest.mark.xfail(strict=True, reason="white-noise FNN dips below 0.2 near dimension 4 with "
                                       "R_tol=10, A_tol=2; see the decisions ledger")
def test_criterion_05_fnn(record):
    x = np.sin(2 * np.pi * np.arange(1000) / PERIOD)
    sin2 = fnn_fraction(x, 2, QUARTER)
    lows = []
    for seed in range(5):
        z = np.random.default_rng(seed).normal(size=1000)
        lows.append(min(fnn_fraction(z, m, 1) for m in range(1, 6)))
    ok = record(5, sin2 < 0.05 and min(lows) > 0.2,
                f"sinusoid dim-2 fraction {sin2:.3f}; white-noise minimum over dims 1-5 "
                f"per seed {[round(v, 3) for v in lows]} (needs > 0.2)")
    assert ok


def test_criterion_06_time_features(record):
    rng = np.random.default_rng(6)
    X = rng.normal(size=(100, 100)) * rng.uniform(0.1, 10, (100, 1))
    base = time_feature_matrix(X, 100.0)
    ok = True
    for a, c in ((3.5, 0.0), (1.0, -7.25), (0.2, 4.0)):
        F = time_feature_matrix(a * X + c, 100.0)
        expect = base.copy()
        expect[:, 0:3] = a * base[:, 0:3] + c                  # mean, max, min
        expect[:, 3] = a * a * base[:, 3]                      # variance
        expect[:, [4, 5, 6]] = a * base[:, [4, 5, 6]]          # std, range, iqr
        expect[:, 7:10] = a * base[:, 7:10]                    # derivative location
        expect[:, 10] = a * a * base[:, 10]
        expect[:, 11:14] = a * base[:, 11:14]
        ok &= np.allclose(F, expect, rtol=1e-10, atol=1e-10)
    counts = (N_TIME_FEATURES == 14 and len(TIME_FEATURE_NAMES) == 126
              and len(RQA_FEATURE_NAMES) == 54 and len(feature_names("pooled")) == 180
              and FEATURE_SETS == {"pooled": 180, "time": 126, "rqa": 54})
    ok = record(6, ok and counts, "scale/shift equivariance over 100 windows; 14/126/54/180")
    assert ok


def _mrmr_table(X, y):
    return FeatureTable([f"f{i}" for i in range(X.shape[1])], X, y, ("a", "b", "c"))


def test_criterion_07_mrmr(record):
    rng = np.random.default_rng(7)
    y = rng.integers(0, 3, 300)
    X = rng.normal(size=(300, 5))
    X[:, 2] = y
    planted = mrmr_rank(_mrmr_table(X, y)).ordered_indices[0] == 2
    strong = y + rng.normal(0, 0.4, 300)
    weak = (y == 1) + rng.normal(0, 0.8, 300)
    dup = mrmr_rank(_mrmr_table(np.stack([strong, strong, weak], 1), y)).ordered_indices
    no_dup_second = dup[0] in (0, 1) and dup[1] == 2
    prefix = True
    for _ in range(20):
        p = int(rng.integers(3, 12))
        y = rng.integers(0, 3, 120)
        X = rng.normal(size=(120, p)) + rng.uniform(0, 1, p) * y[:, None]
        t = _mrmr_table(X, y)
        full = mrmr_rank(t).ordered_indices
        prefix &= all(mrmr_rank(t, k).ordered_indices == full[:k] for k in range(1, p + 1))
    ok = record(7, planted and no_dup_second and prefix,
                "planted label first; duplicate not second; prefix consistency on 20 tables")
    assert ok


def test_criterion_08_forest(record):
    rng = np.random.default_rng(8)
    Xtr, ytr = blobs(200, rng)
    Xte, yte = blobs(200, rng)
    model = train(table(Xtr, ytr), ForestConfig(seed=0))
    acc = float(np.mean(predict_many(model, Xte) == yte))
    n, k = 600, 3
    Xn = rng.normal(size=(n, 6))
    yn = rng.permutation(np.arange(n) % k)
    null = cross_validate(table(Xn, yn, ("a", "b", "c")), ForestConfig(n_trees=50, seed=1))
    sd = math.sqrt((1 / k) * (1 - 1 / k) / n)
    again = train(table(Xtr, ytr), ForestConfig(seed=0))
    same = (dumps_model(model) == dumps_model(again)
            and predict_many(model, Xte).tobytes() == predict_many(again, Xte).tobytes())
    ok = record(8, acc >= 0.99 and abs(null.mean_accuracy - 1 / k) < 3 * sd and same,
                f"blob accuracy {acc:.3f}; null accuracy {null.mean_accuracy:.3f} "
                f"(chance {1 / k:.3f} +/- {3 * sd:.3f}); reruns identical: {same}")
    assert ok


def _features_needed(curve, margin=0.01):
    plateau = max(a for _, a in curve)
    return next(k for k, a in curve if a >= plateau - margin)


@pytest.mark.slow
def test_criterion_09_curve_shape(record):
    t0 = time.perf_counter()
    suite = generate_suite(epochs_per_mode=1000, trip_seconds=50, seed=1)
    data = epoch_windows(load_streams(format_log(suite.samples)))
    tab = build_feature_table(data, suite.labels)
    forest = ForestConfig(n_trees=100, seed=0)
    curves = {s: accuracy_curve(tab, rank_for(tab, s), s, forest, 5)
              for s in ("binary", "four_class", "five_class")}
    elapsed = time.perf_counter() - t0
    b, f4, f5 = (np.array([a for _, a in curves[s]])
                 for s in ("binary", "four_class", "five_class"))
    ordered = bool(np.all(b >= f4 - 0.02) and np.all(f4 >= f5 - 0.02))
    kb, k5 = _features_needed(curves["binary"]), _features_needed(curves["five_class"])
    ok = record(9, tab.n_rows == 5000 and ordered and 3 * kb <= k5 and elapsed < 300,
                f"ordering within 2 points: {ordered}; binary plateau at k={kb}, five-class at "
                f"k={k5}; binary {b.max():.4f}, four {f4.max():.4f}, five {f5.max():.4f}; "
                f"{elapsed:.0f} s")
    assert ok


def test_criterion_10_label_mapping(record):
    expected = {
        "five_class": {m: m for m in MODES},
        "four_class": {"bike": "bike", "walk": "walk", "run": "run", "bus": "non_vru",
                       "car": "non_vru"},
        "binary": {"bike": "vru", "walk": "vru", "run": "vru", "bus": "non_vru",
                   "car": "non_vru"},
    }
    got = {s: {m: map_labels(m, s) for m in MODES} for s in SCHEMES}
    ok = record(10, got == expected, "all 5 labels x 3 schemes match the mapping table")
    assert ok
