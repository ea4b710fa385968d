"""Robust fidelity normalization and the Std-only / MAD-only reference scalers.

Every fit returns a :class:`~bitsi.core.NormStats`; all three share the same
bounded ``tanh`` map, so comparisons between them isolate the choice of
location and scale estimator.
"""
from __future__ import annotations

import numpy as np

from .core import NormStats, TimeSeries

C_MAD = 0.6745
ALPHA = 0.5
KAPPA = 4.0
CLAMP_DELTA = 1e-6
SIGMA_FLOOR_REL = 1e-8


def _as_matrix(series) -> np.ndarray:
    values = series.values if isinstance(series, TimeSeries) else np.asarray(series, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    return values


def _floor_sigma(sigma: np.ndarray, mu: np.ndarray) -> np.ndarray:
    floor = SIGMA_FLOOR_REL * np.maximum(1.0, np.abs(mu))
    return np.maximum(sigma, floor)


def _check_columns(x: np.ndarray):
    empty = np.isnan(x).all(axis=0)
    if empty.any():
        raise ValueError(f"variables {list(np.flatnonzero(empty) + 1)} have no observed values")


def rfn_fit(series, alpha: float = ALPHA, c_mad: float = C_MAD, kappa: float = KAPPA) -> NormStats:
    """Per-variable median location and blended MAD/Std scale.

    ``sigma = alpha * MAD / c_mad + (1 - alpha) * Std`` where Std is the
    population standard deviation. NaN entries are ignored, which lets the
    codec fit on the visible context only.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if c_mad <= 0 or kappa <= 0:
        raise ValueError("c_mad and kappa must be positive")
    x = _as_matrix(series)
    _check_columns(x)
    mu = np.nanmedian(x, axis=0)
    mad = np.nanmedian(np.abs(x - mu), axis=0)
    std = np.nanstd(x, axis=0)
    sigma = alpha * mad / c_mad + (1.0 - alpha) * std
    return NormStats(mu, _floor_sigma(sigma, mu), alpha, c_mad, kappa)


def std_fit(series, kappa: float = KAPPA) -> NormStats:
    """Mean / population-Std scaler."""
    x = _as_matrix(series)
    _check_columns(x)
    mu = np.nanmean(x, axis=0)
    sigma = np.nanstd(x, axis=0)
    return NormStats(mu, _floor_sigma(sigma, mu), 0.0, C_MAD, kappa)


def mad_fit(series, c_mad: float = C_MAD, kappa: float = KAPPA) -> NormStats:
    """Median / (MAD / c_mad) scaler."""
    x = _as_matrix(series)
    _check_columns(x)
    mu = np.nanmedian(x, axis=0)
    sigma = np.nanmedian(np.abs(x - mu), axis=0) / c_mad
    return NormStats(mu, _floor_sigma(sigma, mu), 1.0, c_mad, kappa)


def rfn_normalize(series, stats: NormStats) -> np.ndarray:
    """Map values into (-1, 1) with ``tanh((x - mu) / (kappa * sigma))``."""
    x = _as_matrix(series)
    if x.shape[1] != stats.num_vars:
        raise ValueError(f"series has {x.shape[1]} variables, stats were fitted for {stats.num_vars}")
    return np.tanh((x - stats.mu) / (stats.kappa * stats.sigma))


def rfn_denormalize(u, stats: NormStats, delta: float = CLAMP_DELTA) -> np.ndarray:
    """Exact inverse of :func:`rfn_normalize` after clamping to ``[-(1-delta), 1-delta]``."""
    u = _as_matrix(u)
    if u.shape[1] != stats.num_vars:
        raise ValueError(f"input has {u.shape[1]} variables, stats were fitted for {stats.num_vars}")
    clamped = np.clip(u, -(1.0 - delta), 1.0 - delta)
    return stats.kappa * stats.sigma * np.arctanh(clamped) + stats.mu
