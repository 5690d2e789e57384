import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vrurqa.embed import (SHIPPED_PARAMS, EmbeddingParams, UnconvergedDimensionWarning, ami,
                          ami_curve, calibrate, calibrate_channel, default_params, embed,
                          fnn_fraction, format_calibration_report, select_delay,
                          select_dimension)
from vrurqa.errors import DegenerateInputError, InsufficientDataError, InvalidInputError
from vrurqa.ingest import CHANNELS, Channel

# an irrational period keeps the sampled sinusoid from repeating exactly
PERIOD = 8 * math.pi
QUARTER = 6


def sinusoid(n=1000):
    return np.sin(2 * np.pi * np.arange(n) / PERIOD)


def histogram_mi(x, lag, bins=16):
    """Mutual information by explicit loops over a dictionary histogram."""
    lo, hi = min(x), max(x)
    width = (hi - lo) / bins

    def b(v):
        return min(int((v - lo) / width), bins - 1)

    pairs = [(b(x[i]), b(x[i + lag])) for i in range(len(x) - lag)]
    n = len(pairs)
    joint, px, py = {}, {}, {}
    for a, c in pairs:
        joint[(a, c)] = joint.get((a, c), 0) + 1
        px[a] = px.get(a, 0) + 1
        py[c] = py.get(c, 0) + 1
    total = 0.0
    for (a, c), k in joint.items():
        total += k / n * math.log2(k * n / (px[a] * py[c]))
    return total


def brute_force_fnn(x, dim, delay, rtol=10.0, atol=2.0):
    """All-pairs nearest neighbours on the z-scored series."""
    x = (np.asarray(x, float) - np.mean(x)) / np.std(x)
    n = len(x) - dim * delay
    pts = [[x[i + j * delay] for j in range(dim)] for i in range(n)]
    false = valid = 0
    for i in range(n):
        best, arg = math.inf, -1
        for k in range(n):
            if k != i:
                d = math.dist(pts[i], pts[k])
                if d < best:
                    best, arg = d, k
        if best <= 1e-12:
            continue
        valid += 1
        grow = abs(x[i + dim * delay] - x[arg + dim * delay])
        if grow / best > rtol or math.hypot(best, grow) > atol:
            false += 1
    return false / valid


# -- embedding -----------------------------------------------------------------

def test_embed_examples():
    t = embed([1, 2, 3, 4, 5], EmbeddingParams(1, 2))
    np.testing.assert_array_equal(t.points, [[1, 2], [2, 3], [3, 4], [4, 5]])
    x = np.arange(1.0, 11.0)
    t = embed(x, EmbeddingParams(2, 3))
    assert len(t) == 6 and tuple(t.points[0]) == (1, 3, 5)
    np.testing.assert_array_equal(embed(x, EmbeddingParams(7, 1)).points[:, 0], x)


@given(st.integers(2, 200), st.integers(1, 12), st.integers(1, 6))
@settings(max_examples=100, deadline=None)
def test_embed_point_count(n, delay, dim):
    params = EmbeddingParams(delay, dim)
    x = np.arange(float(n))
    if n - (dim - 1) * delay < 2:
        with pytest.raises(InsufficientDataError):
            embed(x, params)
    else:
        t = embed(x, params)
        assert len(t) == n - (dim - 1) * delay
        np.testing.assert_array_equal(t.points[:, -1] - t.points[:, 0], (dim - 1) * delay)


def test_params_validation():
    with pytest.raises(InvalidInputError):
        EmbeddingParams(0, 3)
    with pytest.raises(InvalidInputError):
        EmbeddingParams(1, 3, threshold=0.0)


def test_shipped_defaults():
    d = default_params()
    assert d[Channel.acc_y] == EmbeddingParams(10, 4, 0.9)
    assert d[Channel.gyr_z] == EmbeddingParams(10, 4, 0.9)
    assert d[Channel.rot_x] == EmbeddingParams(30, 3, 0.01)
    assert set(SHIPPED_PARAMS) == {"accelerometer", "gyroscope", "rotation_vector"}


# -- AMI -------------------------------------------------------------------------

def test_ami_matches_loop_oracle():
    rng = np.random.default_rng(0)
    for i in range(20):
        x = np.cumsum(rng.normal(size=300)) if i % 2 else rng.normal(size=300)
        for lag in (1, 3, 17):
            assert ami(x, lag) == pytest.approx(histogram_mi(x.tolist(), lag), abs=1e-9)


def test_ami_lag_zero_is_entropy():
    x = np.random.default_rng(1).normal(size=500)
    lo, hi = x.min(), x.max()
    counts = np.bincount(np.minimum(((x - lo) / (hi - lo) * 16).astype(int), 15))
    p = counts[counts > 0] / x.size
    assert ami(x, 0) == -math.fsum(p * np.log2(p))


def test_ami_noise_near_zero():
    x = np.random.default_rng(2).uniform(size=10_000)
    assert ami(x, 5) < 0.1


def test_ami_symmetry_and_sign():
    rng = np.random.default_rng(3)
    for _ in range(10):
        x = rng.normal(size=200)
        for lag in (1, 4):
            assert ami(x, lag) == ami(x[::-1], lag)
            assert ami(x, lag) >= -1e-12


def test_ami_errors():
    with pytest.raises(DegenerateInputError):
        ami(np.ones(50), 1)
    with pytest.raises(InvalidInputError):
        ami(np.arange(10.0), 9)
    np.testing.assert_array_equal(ami_curve(sinusoid(200), 3),
                                  [ami(sinusoid(200), k) for k in (1, 2, 3)])


# -- delay selection -------------------------------------------------------------

def test_select_delay_examples():
    assert select_delay([3, 2, 1, 2, 3]) == 3
    assert select_delay([5, 4, 3, 2, 1]) == 5
    assert select_delay([5, 2, 2, 4]) == 2


@given(st.lists(st.floats(0, 10), min_size=1, max_size=30), st.floats(0.01, 100), st.floats(-50, 50))
@settings(max_examples=200, deadline=None)
def test_select_delay_affine_invariant(curve, a, b):
    scaled = [a * c + b for c in curve]
    # affine maps can merge values that differed by less than rounding
    if len(set(scaled)) == len(set(curve)):
        assert select_delay(scaled) == select_delay(curve)


def test_sinusoid_delay_near_quarter_period():
    assert select_delay(ami_curve(sinusoid(), 20)) == QUARTER


# -- FNN -------------------------------------------------------------------------

def test_fnn_matches_brute_force():
    rng = np.random.default_rng(5)
    fixtures = [sinusoid(300), rng.normal(size=300), np.cumsum(rng.normal(size=300))]
    for x in fixtures:
        for dim in (1, 2, 3):
            for delay in (1, 4):
                assert fnn_fraction(x, dim, delay) == pytest.approx(
                    brute_force_fnn(x, dim, delay), abs=1e-12)


def test_fnn_sinusoid():
    x = sinusoid()
    assert fnn_fraction(x, 2, QUARTER) < 0.05
    assert fnn_fraction(x, 2, QUARTER) <= fnn_fraction(x, 1, QUARTER)
    assert select_dimension(x, QUARTER) == 2


def test_fnn_ramp_is_unfolded():
    assert select_dimension(np.linspace(0, 1, 300), 1) == 1


def test_fnn_noise_unconverged():
    x = np.random.default_rng(0).normal(size=500)
    with pytest.warns(UnconvergedDimensionWarning):
        assert select_dimension(x, 1, max_dim=6) == 6


def test_fnn_noise_first_dimension_high():
    for seed in range(5):
        x = np.random.default_rng(seed).normal(size=1000)
        assert fnn_fraction(x, 1, 1) > 0.5


def test_fnn_boundary_two_points():
    # both the dimension-m vectors and their extension must fit: N = m*delay + 2
    x = np.array([0.0, 1.0, 3.0, 2.0, 5.0, 4.0, 7.0, 1.5])
    dim, delay = 3, 2
    assert x.size == dim * delay + 2
    assert 0.0 <= fnn_fraction(x, dim, delay) <= 1.0
    with pytest.raises(InsufficientDataError):
        fnn_fraction(x[:-1], dim, delay)


def test_fnn_degenerate():
    with pytest.raises(DegenerateInputError):
        fnn_fraction(np.tile([0.0, 1.0], 20), 2, 2)


# -- calibration -----------------------------------------------------------------

def _windows(n, seed=0):
    rng = np.random.default_rng(seed)
    t = np.arange(100)
    return [np.sin(2 * np.pi * t / PERIOD + rng.uniform(0, 6)) + 0.01 * rng.normal(size=100)
            for _ in range(n)]


def test_calibrate_single_window_equals_direct():
    w = _windows(1)
    c = calibrate_channel(w, max_lag=20, max_dim=5)
    assert c.delay == select_delay(ami_curve(w[0], 20))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UnconvergedDimensionWarning)
        assert c.dimension == select_dimension(w[0], c.delay, max_dim=5)


def test_calibrate_duplicate_windows_idempotent():
    w = _windows(3, seed=4)
    once = calibrate_channel(w, max_lag=20, max_dim=5)
    twice = calibrate_channel(w + w, max_lag=20, max_dim=5)
    assert (once.delay, once.dimension) == (twice.delay, twice.dimension)
    np.testing.assert_allclose(once.ami_curve, twice.ami_curve, rtol=1e-12)
    np.testing.assert_allclose(once.fnn_fractions, twice.fnn_fractions, rtol=1e-12)


def test_calibrate_report():
    data = {ch: _windows(4, seed=i) for i, ch in enumerate(CHANNELS[:2])}
    calib = calibrate(data, max_lag=20, max_dim=5)
    text = format_calibration_report(calib)
    summary = [ln.split(",") for ln in text.splitlines() if ln.startswith("summary")]
    assert ["summary", "acc_x", "delay", str(calib[Channel.acc_x].delay)] in summary
    assert sum(ln.startswith("ami,acc_y,") for ln in text.splitlines()) == 20
    with pytest.raises(InsufficientDataError):
        calibrate({Channel.acc_x: []})
    with pytest.raises(DegenerateInputError):
        calibrate_channel([np.zeros(100)])
