"""TS2I encoder and I2TS decoder.

A series is normalized, folded into an ``f x C`` grid per variable and
rendered with nearest-neighbour block replication into a horizontal band.
Decoding crops each band, averages every cell's pixel block and inverts the
normalization. On the float path the round trip is exact up to float64
rounding; on the 8-bit path the error is bounded by one quantization step.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Union

import numpy as np

from . import norm as _norm
from .core import (
    CapacityViolation,
    DataError,
    InstanceMeta,
    LayoutSpec,
    MaskSpec,
    MetaMismatch,
    NotDivisible,
    PeriodicGrid,
    TimeSeries,
    TsImage,
    channel_of_var,
    truncate_to_period,
)
from .layout import var_y_range

MIN_IMPUTE_RATIO = 0.10
MAX_IMPUTE_RATIO = 0.50


@dataclass(frozen=True)
class CodecConfig:
    height: int = 896
    width: int = 896
    alpha: float = _norm.ALPHA
    c_mad: float = _norm.C_MAD
    kappa: float = _norm.KAPPA


@dataclass(frozen=True)
class CapacityReport:
    ok: bool
    violations: tuple = ()
    min_height: Optional[int] = None
    min_width: Optional[int] = None

    def __bool__(self):
        return self.ok


def fold(x, f: int) -> PeriodicGrid:
    x = np.asarray(x, dtype=np.float64).ravel()
    if f < 1 or x.size % f:
        raise NotDivisible(f"length {x.size} is not a multiple of periodicity {f}")
    return PeriodicGrid(x.reshape(-1, f).T)


def unfold(grid: PeriodicGrid) -> np.ndarray:
    return grid.cells.T.reshape(-1).copy()


def check_capacity(H: int, W: int, N: int, f: int, L: int) -> CapacityReport:
    """Check that every timestep gets at least one pixel row and column."""
    violations = []
    min_height = min_width = None
    if H // N < f:
        min_height = N * f
        violations.append(f"band height floor({H}/{N}) = {H // N} < periodicity {f}; need H >= {min_height}")
    if W * f < L:
        min_width = -(-L // f)
        violations.append(f"width {W} < L/f = {L}/{f}; need W >= {min_width}")
    return CapacityReport(not violations, tuple(violations), min_height, min_width)


def _block_starts(cells: int, pixels: int) -> np.ndarray:
    return (np.arange(cells) * pixels) // cells


def _pixel_to_cell(cells: int, pixels: int) -> np.ndarray:
    starts = _block_starts(cells, pixels)
    return np.searchsorted(starts, np.arange(pixels), side="right") - 1


def render_band(grid: PeriodicGrid, layout: LayoutSpec) -> np.ndarray:
    """Replicate each normalized cell into its pixel block; returns ``h x W`` intensities."""
    f, C = grid.cells.shape
    h, W = layout.band_height, layout.image_width
    report = check_capacity(layout.image_height, W, layout.num_vars, f, C * f)
    if not report.ok:
        raise CapacityViolation(report)
    if C != layout.total_cycles:
        raise MetaMismatch(f"grid has {C} cycles, layout expects {layout.total_cycles}")
    p = (grid.cells + 1.0) / 2.0
    return p[_pixel_to_cell(f, h)][:, _pixel_to_cell(C, W)]


def _band_cell_means(band: np.ndarray, f: int, C: int) -> np.ndarray:
    h, W = band.shape
    rows, cols = _block_starts(f, h), _block_starts(C, W)
    sums = np.add.reduceat(np.add.reduceat(band, rows, axis=0), cols, axis=1)
    counts = np.outer(np.diff(np.append(rows, h)), np.diff(np.append(cols, W)))
    return sums / counts


def validate_mask(mask: MaskSpec, num_vars: int, total_cycles: int) -> np.ndarray:
    cm = mask.cycle_mask(num_vars, total_cycles)
    if mask.kind == "forecast":
        k = int(cm[0].sum())
        expected = np.zeros(total_cycles, dtype=bool)
        expected[total_cycles - k:] = True
        if k == 0 or not (cm == expected).all():
            raise DataError("forecast mask must be the same non-empty right-aligned suffix for every variable")
    if (cm.all(axis=1)).any():
        raise DataError("every variable needs at least one visible cycle")
    if mask.kind == "imputation":
        ratios = cm.mean(axis=1)
        bad = (ratios < MIN_IMPUTE_RATIO - 1e-12) | (ratios > MAX_IMPUTE_RATIO + 1e-12)
        if bad.any():
            raise DataError(
                f"imputation mask ratio must lie in [{MIN_IMPUTE_RATIO}, {MAX_IMPUTE_RATIO}], "
                f"got {ratios[bad].tolist()}"
            )
    return cm


def _render(values: np.ndarray, meta: InstanceMeta, cycle_mask: Optional[np.ndarray]) -> TsImage:
    lay, f = meta.layout, meta.periodicity
    canvas = np.zeros((lay.image_height, lay.image_width, 3))
    u = _norm.rfn_normalize(values, meta.norm)
    for n in range(1, lay.num_vars + 1):
        grid = fold(u[:, n - 1], f)
        cells = grid.cells
        if cycle_mask is not None:
            cells = np.where(cycle_mask[n - 1][None, :], -1.0, cells)
        if np.isnan(cells).any():
            raise DataError(f"variable {n} has missing values in a visible cycle")
        y0, y1 = var_y_range(n, lay.image_height, lay.num_vars)
        canvas[y0:y1 + 1, :, channel_of_var(n)] = render_band(PeriodicGrid(cells), lay)
    return TsImage(canvas)


def _context_length(mask: MaskSpec, cycle_mask: np.ndarray, f: int) -> int:
    C = cycle_mask.shape[1]
    if mask.kind == "forecast":
        return (C - int(cycle_mask[0].sum())) * f
    return C * f


def encode(
    series: TimeSeries,
    mask: Optional[MaskSpec] = None,
    config: Optional[CodecConfig] = None,
    series_id: str = "series",
) -> tuple[TsImage, InstanceMeta]:
    """Render ``series`` into a masked TS-image and the sidecar needed to decode it.

    Normalization statistics are fitted on the visible (unmasked) timesteps
    only, so target values may be NaN when unknown.
    """
    config = config or CodecConfig()
    s = truncate_to_period(series)
    f, N, C = s.periodicity, s.num_vars, s.num_cycles
    report = check_capacity(config.height, config.width, N, f, C * f)
    if not report.ok:
        raise CapacityViolation(report)
    mask = mask if mask is not None else MaskSpec.none(N)
    cm = validate_mask(mask, N, C)
    context = np.where(np.repeat(cm.T, f, axis=0), np.nan, s.values)
    stats = _norm.rfn_fit(context, config.alpha, config.c_mad, config.kappa)
    meta = InstanceMeta(
        layout=LayoutSpec.build(config.height, config.width, N, C),
        norm=stats,
        mask=mask,
        series_id=series_id,
        periodicity=f,
        context_length=_context_length(mask, cm, f),
    )
    return _render(s.values, meta, cm), meta


def render_target(series: TimeSeries, meta: InstanceMeta) -> TsImage:
    """Unmasked image of ``series`` under the statistics recorded in ``meta``."""
    s = truncate_to_period(series)
    if s.length != meta.total_length or s.num_vars != meta.layout.num_vars:
        raise MetaMismatch("series does not match the instance layout")
    return _render(s.values, meta, None)


def encode_pair(series, mask=None, config=None, series_id="series"):
    """Encode and also render the ground-truth (unmasked) image: ``(masked, target, meta)``."""
    masked, meta = encode(series, mask, config, series_id)
    return masked, render_target(series, meta), meta


Region = Union[str, Iterable[int]]


def _region_mask(region: Region, meta: InstanceMeta) -> np.ndarray:
    """Boolean (N, C) selection of cycles to decode."""
    N, C = meta.layout.num_vars, meta.layout.total_cycles
    if isinstance(region, str):
        if region == "all":
            return np.ones((N, C), dtype=bool)
        if region == "masked":
            return meta.cycle_mask()
        raise ValueError(f"unknown region {region!r}")
    out = np.zeros((N, C), dtype=bool)
    for j in region:
        if not 1 <= j <= C:
            raise ValueError(f"cycle {j} outside 1..{C}")
        out[:, j - 1] = True
    return out


def decode_normalized(image: TsImage, meta: InstanceMeta, use_u8: bool = False) -> np.ndarray:
    """Recover the normalized ``(L, N)`` matrix from an image."""
    lay, f = meta.layout, meta.periodicity
    if (image.height, image.width) != (lay.image_height, lay.image_width):
        raise MetaMismatch(
            f"image is {image.height}x{image.width}, meta expects {lay.image_height}x{lay.image_width}"
        )
    pixels = image.pixels_u8 / 255.0 if use_u8 else image.pixels_float
    u = np.empty((meta.total_length, lay.num_vars))
    for n in range(1, lay.num_vars + 1):
        y0, y1 = var_y_range(n, lay.image_height, lay.num_vars)
        band = pixels[y0:y1 + 1, :, channel_of_var(n)]
        p = _band_cell_means(band, f, lay.total_cycles)
        u[:, n - 1] = unfold(PeriodicGrid(2.0 * p - 1.0))
    return u


def decode(image: TsImage, meta: InstanceMeta, region: Region = "all", use_u8: bool = False) -> TimeSeries:
    """Decode ``image`` back to values; timesteps outside ``region`` come back as NaN."""
    x = _norm.rfn_denormalize(decode_normalized(image, meta, use_u8), meta.norm)
    keep = np.repeat(_region_mask(region, meta).T, meta.periodicity, axis=0)
    return TimeSeries(np.where(keep, x, np.nan), meta.periodicity)


FLOAT_REL_TOL = 1e-6
FLOAT_U_LIMIT = 0.99
U8_SIGMA_TOL = 0.1
U8_U_LIMIT = 0.9


def roundtrip_report(series: TimeSeries, config: Optional[CodecConfig] = None, use_u8: bool = False) -> dict:
    """Encode without a mask, decode, and measure reconstruction error.

    The float path is checked by relative error on points whose normalized
    magnitude is at most 0.99; the 8-bit path by absolute error in units of
    each variable's sigma on points with normalized magnitude at most 0.9.
    """
    s = truncate_to_period(series)
    image, meta = encode(s, None, config)
    x = s.values
    x_hat = decode(image, meta, use_u8=use_u8).values
    u = _norm.rfn_normalize(x, meta.norm)
    err = np.abs(x_hat - x)
    if use_u8:
        sel = np.abs(u) <= U8_U_LIMIT
        scaled = err / meta.norm.sigma
        worst = float(scaled[sel].max()) if sel.any() else 0.0
        return {
            "bit_depth": "u8", "checked_points": int(sel.sum()),
            "max_abs_error": float(err.max()), "mean_abs_error": float(err.mean()),
            "max_error_over_sigma": worst, "tolerance": U8_SIGMA_TOL, "passed": worst <= U8_SIGMA_TOL,
        }
    sel = (np.abs(u) <= FLOAT_U_LIMIT) & (x != 0)
    rel = err[sel] / np.abs(x[sel])
    worst = float(rel.max()) if rel.size else 0.0
    return {
        "bit_depth": "float", "checked_points": int(sel.sum()),
        "max_abs_error": float(err.max()), "mean_abs_error": float(err.mean()),
        "max_rel_error": worst, "tolerance": FLOAT_REL_TOL, "passed": worst <= FLOAT_REL_TOL,
    }
