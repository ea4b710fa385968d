"""MASE / nMASE scoring and reference baselines for forecasting and imputation.

nMASE is the geometric mean over instances of ``mase_model / mase_naive``,
so the naive reference scores exactly 1. Instances whose seasonal in-sample
error vanishes are excluded and counted rather than divided by zero.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .core import BitsiError, DataError, InstanceMeta, TsImage, channel_of_var
from .layout import cycle_x_span, var_y_range

DEGENERATE_SCALE = 1e-12

RATIO_BUCKETS = ((0.1, 0.2, "[0.1,0.2)"), (0.2, 0.3, "[0.2,0.3)"), (0.3, 0.4, "[0.3,0.4)"), (0.4, 0.5, "[0.4,0.5]"))


class LengthMismatch(DataError):
    pass


class EmptyIntersection(BitsiError):
    pass


class AllMissing(DataError):
    pass


class AllMasked(DataError):
    pass


def seasonal_scale(insample, f: int) -> float:
    """Mean |x[t] - x[t-f]| over pairs where both ends are observed; NaN if degenerate."""
    x = np.asarray(insample, dtype=np.float64).ravel()
    if x.size < 2 * f:
        raise DataError(f"in-sample history of {x.size} steps is shorter than two cycles ({2 * f})")
    d = np.abs(x[f:] - x[:-f])
    d = d[~np.isnan(d)]
    if d.size == 0:
        return math.nan
    scale = float(d.mean())
    return scale if scale >= DEGENERATE_SCALE else math.nan


def mase(pred, target, insample, f: int) -> float:
    """Mean absolute error scaled by the seasonal-naive in-sample error.

    Returns NaN when the scale is degenerate (e.g. an exactly periodic
    in-sample window); callers count such instances as excluded.
    """
    pred = np.asarray(pred, dtype=np.float64).ravel()
    target = np.asarray(target, dtype=np.float64).ravel()
    if pred.shape != target.shape:
        raise LengthMismatch(f"prediction has {pred.size} points, target has {target.size}")
    scale = seasonal_scale(insample, f)
    if math.isnan(scale):
        return math.nan
    return float(np.mean(np.abs(pred - target))) / scale


def instance_mase(pred: np.ndarray, target: np.ndarray, insample: np.ndarray, f: int, where: np.ndarray) -> float:
    """Average of per-variable MASE over the positions selected by ``where`` (L x N)."""
    values = []
    for n in range(target.shape[1]):
        sel = where[:, n]
        if not sel.any():
            continue
        m = mase(pred[sel, n], target[sel, n], insample[:, n], f)
        if not math.isnan(m):
            values.append(m)
    return float(np.mean(values)) if values else math.nan


def _ratios(model: Mapping, naive: Mapping) -> tuple[list[float], int]:
    common = sorted(set(model) & set(naive))
    if not common:
        raise EmptyIntersection("model and naive results share no instances")
    ratios, excluded = [], 0
    for k in common:
        m, b = model[k], naive[k]
        if math.isnan(m) or math.isnan(b) or b <= 0:
            excluded += 1
            continue
        ratios.append(m / b)
    if not ratios:
        raise EmptyIntersection("every shared instance is degenerate")
    return ratios, excluded


def _gmean(xs) -> float:
    if any(x == 0 for x in xs):
        return 0.0
    return math.exp(math.fsum(math.log(x) for x in xs) / len(xs))


def nmase(model_results: Mapping, naive_results: Mapping) -> float:
    """Geometric mean of per-instance MASE ratios against the naive baseline."""
    ratios, _ = _ratios(model_results, naive_results)
    return _gmean(ratios)


@dataclass
class EvalResult:
    mase: dict = field(default_factory=dict)
    nmase: float = math.nan
    nmase_arithmetic: float = math.nan
    n_instances: int = 0
    excluded: int = 0
    success_rate: float = 1.0

    def row(self, task: str, bucket: str) -> dict:
        return {
            "task": task,
            "horizon_or_ratio_bucket": bucket,
            "nmase": self.nmase,
            "nmase_arithmetic": self.nmase_arithmetic,
            "n": self.n_instances,
            "excluded": self.excluded,
            "success_rate": self.success_rate,
        }


def summarize(model_results: Mapping, naive_results: Mapping, attempted: int | None = None) -> EvalResult:
    attempted = len(naive_results) if attempted is None else attempted
    ratios, excluded = _ratios(model_results, naive_results)
    return EvalResult(
        mase=dict(model_results),
        nmase=_gmean(ratios),
        nmase_arithmetic=math.fsum(ratios) / len(ratios),
        n_instances=len(ratios),
        excluded=excluded,
        success_rate=len(model_results) / attempted if attempted else 0.0,
    )


def ratio_bucket(ratio: float) -> str:
    for lo, hi, label in RATIO_BUCKETS:
        if lo <= ratio < hi or (hi == 0.5 and ratio == 0.5):
            return label
    return "out_of_range"


# --- baselines ---------------------------------------------------------------

def baseline_naive_forecast(context, f: int, P: int) -> np.ndarray:
    """Repeat the last full cycle of ``context`` for ``P`` steps."""
    x = np.asarray(context, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[:, None]
    if x.shape[0] < f:
        raise DataError(f"context of {x.shape[0]} steps is shorter than one cycle ({f})")
    last = x[-f:]
    out = last[np.arange(P) % f]
    return out[:, 0] if squeeze else out


def _per_column(series, fill_one):
    x = np.asarray(series, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[:, None]
    out = x.copy()
    for n in range(x.shape[1]):
        obs = np.flatnonzero(~np.isnan(x[:, n]))
        if obs.size == 0:
            raise AllMissing(f"variable {n + 1} has no observed values")
        out[:, n] = fill_one(x[:, n], obs)
    return out[:, 0] if squeeze else out


def baseline_nearest_impute(series_with_gaps) -> np.ndarray:
    """Fill each gap with the closest observation in time; ties go to the earlier one."""
    def fill(col, obs):
        t = np.arange(col.size)
        k = np.searchsorted(obs, t)
        left = obs[np.clip(k - 1, 0, obs.size - 1)]
        right = obs[np.clip(k, 0, obs.size - 1)]
        pick = np.where(np.abs(t - left) <= np.abs(right - t), left, right)
        return np.where(np.isnan(col), col[pick], col)

    return _per_column(series_with_gaps, fill)


def baseline_linear_impute(series_with_gaps) -> np.ndarray:
    """Linear interpolation between flanking observations; edges hold the nearest value."""
    def fill(col, obs):
        t = np.arange(col.size)
        return np.where(np.isnan(col), np.interp(t, obs, col[obs]), col)

    return _per_column(series_with_gaps, fill)


def baseline_naive_impute(series_with_gaps, f: int) -> np.ndarray:
    """Seasonal copy: a gap takes the same phase of the nearest earlier observed cycle, else the nearest later one."""
    def fill(col, obs):
        out = col.copy()
        observed = ~np.isnan(col)
        for t in np.flatnonzero(~observed):
            src = next((s for s in range(t - f, -1, -f) if observed[s]), None)
            if src is None:
                src = next((s for s in range(t + f, col.size, f) if observed[s]), None)
            if src is None:
                src = obs[np.argmin(np.abs(obs - t))]
            out[t] = col[src]
        return out

    return _per_column(series_with_gaps, fill)


def baseline_copycycle_inpaint(masked_image: TsImage, meta: InstanceMeta) -> TsImage:
    """Paint each masked cycle with the nearest visible cycle to its left (else right).

    Works on the rendered row profile of the source strip, so strips of
    different pixel width are handled exactly.
    """
    lay = meta.layout
    pixels = np.array(masked_image.pixels_float)
    cm = meta.cycle_mask()
    for n in range(1, lay.num_vars + 1):
        visible = np.flatnonzero(~cm[n - 1]) + 1
        if visible.size == 0:
            raise AllMasked(f"variable {n} has no visible cycle")
        y0, y1 = var_y_range(n, lay.image_height, lay.num_vars)
        ch = channel_of_var(n)
        for j in np.flatnonzero(cm[n - 1]) + 1:
            left = visible[visible < j]
            src = int(left[-1]) if left.size else int(visible[visible > j][0])
            sx1, sx2 = cycle_x_span(src, lay)
            tx1, tx2 = cycle_x_span(int(j), lay)
            profile = np.median(pixels[y0:y1 + 1, sx1:sx2 + 1, ch], axis=1)
            pixels[y0:y1 + 1, tx1:tx2 + 1, ch] = profile[:, None]
    return TsImage(pixels)
