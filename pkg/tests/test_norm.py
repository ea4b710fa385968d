import math
import statistics

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from bitsi.norm import (
    CLAMP_DELTA,
    C_MAD,
    mad_fit,
    rfn_denormalize,
    rfn_fit,
    rfn_normalize,
    std_fit,
)


def oracle_sigma(xs, alpha=0.5, c_mad=C_MAD):
    """Pure-stdlib reference for the blended scale."""
    med = statistics.median(xs)
    mad = statistics.median(abs(x - med) for x in xs)
    return alpha * mad / c_mad + (1 - alpha) * statistics.pstdev(xs), med


def test_constant_series_hits_floor():
    st_ = rfn_fit(np.full(4, 5.0))
    assert st_.mu[0] == 5.0
    assert st_.sigma[0] == pytest.approx(5e-8)


def test_hand_computed_step():
    st_ = rfn_fit(np.array([0, 0, 0, 0, 0, 0, 0, 0, 1, 1], dtype=float))
    assert st_.mu[0] == 0.0
    assert st_.sigma[0] == pytest.approx(0.2, abs=1e-15)


def test_alternating_with_spike_matches_oracle():
    x = np.tile([0.0, 1.0], 120)
    spiked = np.insert(x, 120, 1000.0)
    sigma, mu = oracle_sigma(list(spiked))
    clean_sigma, _ = oracle_sigma(list(x))
    st_ = rfn_fit(spiked)
    assert st_.mu[0] == pytest.approx(mu)
    assert st_.sigma[0] == pytest.approx(sigma, rel=1e-12)
    # The spike inflates the Std half far beyond twice the spike-free scale.
    assert st_.sigma[0] > 2 * clean_sigma


def test_fits_ignore_missing_values():
    x = np.array([[1.0], [2.0], [np.nan], [4.0]])
    a, b = rfn_fit(x), rfn_fit(np.array([1.0, 2.0, 4.0]))
    assert a == b


def test_normalize_known_points():
    st_ = rfn_fit(np.array([-1.0, 0.0, 1.0, 2.0]))
    mu, s, k = st_.mu[0], st_.sigma[0], st_.kappa
    u = rfn_normalize(np.array([mu, mu + k * s, mu + 10 * k * s]), st_)[:, 0]
    assert u[0] == 0.0
    assert u[1] == pytest.approx(math.tanh(1.0))
    assert 0.9999 < u[2] < 1.0


def test_denormalize_clamps_to_finite():
    st_ = rfn_fit(np.array([0.0, 1.0, 2.0]))
    x = rfn_denormalize(np.array([[1.0], [-1.0], [0.0]]), st_)
    assert np.isfinite(x).all()
    k, s = st_.kappa, st_.sigma[0]
    assert x[0, 0] == pytest.approx(k * s * math.atanh(1 - CLAMP_DELTA) + st_.mu[0])
    assert x[2, 0] == st_.mu[0]


def test_step_signal_mad_is_zero():
    x = np.r_[np.zeros(150), np.ones(90)]
    assert mad_fit(x).sigma[0] == pytest.approx(1e-8)


def test_spike_std_scales_like_delta_over_root_t():
    T, delta = 240, 1e6
    x = np.sin(2 * np.pi * np.arange(T) / 24)
    x[100] = delta
    assert std_fit(x).sigma[0] == pytest.approx(delta / math.sqrt(T), rel=0.01)


def test_gaussian_fits_agree():
    x = np.random.default_rng(3).normal(2.0, 1.5, 5000)
    sig = [f(x).sigma[0] for f in (rfn_fit, std_fit, mad_fit)]
    assert max(sig) / min(sig) < 1.3


finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@settings(max_examples=200)
@given(arrays(np.float64, st.integers(2, 60), elements=finite))
def test_inverse_within_three_kappa_sigma(x):
    st_ = rfn_fit(x)
    mu, s, k = st_.mu[0], st_.sigma[0], st_.kappa
    sel = np.abs(x - mu) <= 3 * k * s
    back = rfn_denormalize(rfn_normalize(x, st_), st_)[:, 0]
    scale = np.maximum(np.abs(x), s)
    assert (np.abs(back - x)[sel] <= 1e-9 * scale[sel]).all()


@given(arrays(np.float64, st.integers(1, 60), elements=finite))
def test_normalized_values_bounded(x):
    u = rfn_normalize(x, rfn_fit(x))
    assert (np.abs(u) <= 1.0).all()
