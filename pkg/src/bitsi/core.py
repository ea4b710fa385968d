"""Domain types shared across the codec, QA generators and evaluation harness.

Variable and cycle indices exposed through public functions and JSON are
1-based; array indexing inside the package is 0-based.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

SCHEMA_VERSION = 1

MASK_KINDS = ("none", "forecast", "imputation")


class BitsiError(Exception):
    """Base class for all package errors."""


class DataError(BitsiError, ValueError):
    """Input data cannot be encoded or decoded as given."""


class PeriodTooLong(DataError):
    pass


class NotDivisible(DataError):
    pass


class CapacityViolation(DataError):
    def __init__(self, report):
        self.report = report
        super().__init__("; ".join(report.violations))


class MetaMismatch(DataError):
    pass


class IndexOutOfRange(BitsiError, IndexError):
    pass


class SchemaMismatch(DataError):
    pass


def _frozen_array(values, ndim=None) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True)
    if ndim == 2 and arr.ndim == 1:
        arr = arr[:, None]
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """A T x N matrix of observations with a declared periodicity.

    NaN marks a missing observation (used for masked targets and gapped
    series handed to imputation baselines). Infinite values are rejected.
    """

    values: np.ndarray
    periodicity: int
    frequency_label: Optional[str] = None

    def __post_init__(self):
        arr = _frozen_array(self.values, ndim=2)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DataError(f"expected a non-empty T x N matrix, got shape {arr.shape}")
        if np.isinf(arr).any():
            raise DataError("series contains infinite values")
        if int(self.periodicity) != self.periodicity or self.periodicity < 1:
            raise DataError(f"periodicity must be a positive integer, got {self.periodicity}")
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "periodicity", int(self.periodicity))

    @property
    def length(self) -> int:
        return self.values.shape[0]

    @property
    def num_vars(self) -> int:
        return self.values.shape[1]

    @property
    def num_cycles(self) -> int:
        return self.length // self.periodicity

    def with_values(self, values) -> "TimeSeries":
        return TimeSeries(values, self.periodicity, self.frequency_label)

    def __eq__(self, other):
        if not isinstance(other, TimeSeries):
            return NotImplemented
        return (
            self.periodicity == other.periodicity
            and self.frequency_label == other.frequency_label
            and self.values.shape == other.values.shape
            and np.array_equal(self.values, other.values, equal_nan=True)
        )


def truncate_to_period(series: TimeSeries) -> TimeSeries:
    """Keep the most recent ``floor(T/f) * f`` timesteps."""
    f = series.periodicity
    if series.length < f:
        raise PeriodTooLong(f"series length {series.length} is shorter than periodicity {f}")
    keep = (series.length // f) * f
    if keep == series.length:
        return series
    return series.with_values(series.values[series.length - keep:])


@dataclass(frozen=True, eq=False)
class PeriodicGrid:
    """One variable folded at its periodicity: ``cells[i, j] = x[j*f + i]``."""

    cells: np.ndarray

    def __post_init__(self):
        arr = _frozen_array(self.cells)
        if arr.ndim != 2:
            raise DataError(f"grid must be 2-D, got shape {arr.shape}")
        object.__setattr__(self, "cells", arr)

    @property
    def periodicity(self) -> int:
        return self.cells.shape[0]

    @property
    def num_cycles(self) -> int:
        return self.cells.shape[1]


@dataclass(frozen=True, eq=False)
class NormStats:
    mu: np.ndarray
    sigma: np.ndarray
    alpha: float
    c_mad: float
    kappa: float

    def __post_init__(self):
        mu = _frozen_array(np.atleast_1d(self.mu))
        sigma = _frozen_array(np.atleast_1d(self.sigma))
        if mu.shape != sigma.shape or mu.ndim != 1:
            raise DataError("mu and sigma must be vectors of equal length")
        if not (sigma > 0).all():
            raise DataError("sigma must be strictly positive")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    @property
    def num_vars(self) -> int:
        return self.mu.shape[0]

    def __eq__(self, other):
        if not isinstance(other, NormStats):
            return NotImplemented
        return (
            np.array_equal(self.mu, other.mu)
            and np.array_equal(self.sigma, other.sigma)
            and (self.alpha, self.c_mad, self.kappa) == (other.alpha, other.c_mad, other.kappa)
        )


@dataclass(frozen=True)
class LayoutSpec:
    image_height: int
    image_width: int
    num_vars: int
    band_height: int
    total_cycles: int

    @classmethod
    def build(cls, image_height: int, image_width: int, num_vars: int, total_cycles: int) -> "LayoutSpec":
        from .layout import band_height

        return cls(image_height, image_width, num_vars, band_height(image_height, num_vars), total_cycles)

    @property
    def cycle_width(self) -> float:
        return self.image_width / self.total_cycles


@dataclass(frozen=True)
class MaskSpec:
    """Which cycles are blacked out, per variable (1-based cycle indices).

    ``prediction_length`` is the requested horizon in timesteps for forecast
    masks; the masked suffix is rounded up to whole cycles.
    """

    kind: str = "none"
    masked_cycles: tuple = ()
    prediction_length: Optional[int] = None

    def __post_init__(self):
        if self.kind not in MASK_KINDS:
            raise DataError(f"unknown mask kind {self.kind!r}")
        cycles = tuple(tuple(sorted(int(c) for c in row)) for row in self.masked_cycles)
        object.__setattr__(self, "masked_cycles", cycles)

    @classmethod
    def none(cls, num_vars: int) -> "MaskSpec":
        return cls("none", tuple(() for _ in range(num_vars)))

    @classmethod
    def forecast(cls, num_vars: int, total_cycles: int, prediction_length: int, periodicity: int) -> "MaskSpec":
        pred_cycles = -(-prediction_length // periodicity)
        if not 1 <= pred_cycles < total_cycles:
            raise DataError(
                f"forecast of {prediction_length} steps needs {pred_cycles} cycles "
                f"but only {total_cycles} are available"
            )
        suffix = tuple(range(total_cycles - pred_cycles + 1, total_cycles + 1))
        return cls("forecast", tuple(suffix for _ in range(num_vars)), prediction_length)

    @classmethod
    def imputation(cls, masked_cycles: Sequence[Sequence[int]]) -> "MaskSpec":
        return cls("imputation", tuple(tuple(row) for row in masked_cycles))

    def cycle_mask(self, num_vars: int, total_cycles: int) -> np.ndarray:
        """Boolean (N, C) array, True where a cycle is masked."""
        out = np.zeros((num_vars, total_cycles), dtype=bool)
        if self.kind == "none":
            return out
        if len(self.masked_cycles) != num_vars:
            raise MetaMismatch(f"mask lists {len(self.masked_cycles)} variables, expected {num_vars}")
        for n, row in enumerate(self.masked_cycles):
            for j in row:
                if not 1 <= j <= total_cycles:
                    raise IndexOutOfRange(f"masked cycle {j} outside 1..{total_cycles}")
                out[n, j - 1] = True
        return out

    def timestep_mask(self, num_vars: int, total_cycles: int, periodicity: int) -> np.ndarray:
        """Boolean (L, N) array, True where a timestep is masked."""
        return np.repeat(self.cycle_mask(num_vars, total_cycles).T, periodicity, axis=0)

    def ratio(self, num_vars: int, total_cycles: int) -> float:
        """Masked fraction of all encoded timesteps."""
        return float(self.cycle_mask(num_vars, total_cycles).mean())


CHANNEL_NAMES = ("Red", "Green", "Blue")


def channel_of_var(n: int) -> int:
    """RGB channel (0..2) for 1-based variable ``n``; neighbours never share one."""
    return (n - 1) % 3


@dataclass(frozen=True, eq=False)
class TsImage:
    """H x W x 3 canvas kept in float [0, 1] with its 8-bit export form."""

    pixels_float: np.ndarray
    pixels_u8: np.ndarray = field(default=None)

    def __post_init__(self):
        pf = _frozen_array(self.pixels_float)
        if pf.ndim != 3 or pf.shape[2] != 3:
            raise DataError(f"image must be H x W x 3, got {pf.shape}")
        if self.pixels_u8 is None:
            u8 = np.rint(np.clip(pf, 0.0, 1.0) * 255.0).astype(np.uint8)
        else:
            u8 = np.array(self.pixels_u8, dtype=np.uint8, copy=True)
            if u8.shape != pf.shape:
                raise DataError("float and 8-bit pixel arrays disagree in shape")
        u8.flags.writeable = False
        object.__setattr__(self, "pixels_float", pf)
        object.__setattr__(self, "pixels_u8", u8)

    @classmethod
    def from_u8(cls, pixels) -> "TsImage":
        u8 = np.asarray(pixels, dtype=np.uint8)
        return cls(u8.astype(np.float64) / 255.0, u8)

    @property
    def height(self) -> int:
        return self.pixels_float.shape[0]

    @property
    def width(self) -> int:
        return self.pixels_float.shape[1]

    def channel_of_var(self, n: int) -> int:
        return channel_of_var(n)


@dataclass(frozen=True, eq=False)
class InstanceMeta:
    layout: LayoutSpec
    norm: NormStats
    mask: MaskSpec
    series_id: str
    periodicity: int
    context_length: int

    @property
    def total_length(self) -> int:
        return self.layout.total_cycles * self.periodicity

    def cycle_mask(self) -> np.ndarray:
        return self.mask.cycle_mask(self.layout.num_vars, self.layout.total_cycles)

    def timestep_mask(self) -> np.ndarray:
        return self.mask.timestep_mask(self.layout.num_vars, self.layout.total_cycles, self.periodicity)

    def to_dict(self) -> dict:
        lay = self.layout
        return {
            "schema_version": SCHEMA_VERSION,
            "series_id": self.series_id,
            "image_height": lay.image_height,
            "image_width": lay.image_width,
            "num_vars": lay.num_vars,
            "band_height": lay.band_height,
            "total_cycles": lay.total_cycles,
            "periodicity": self.periodicity,
            "context_length": self.context_length,
            "mu": [float(v) for v in self.norm.mu],
            "sigma": [float(v) for v in self.norm.sigma],
            "alpha": float(self.norm.alpha),
            "c_mad": float(self.norm.c_mad),
            "kappa": float(self.norm.kappa),
            "mask": {
                "kind": self.mask.kind,
                "masked_cycles": [list(row) for row in self.mask.masked_cycles],
                "prediction_length": self.mask.prediction_length,
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "InstanceMeta":
        version = d.get("schema_version")
        if version != SCHEMA_VERSION:
            raise SchemaMismatch(f"unsupported meta schema_version {version!r} (expected {SCHEMA_VERSION})")
        try:
            layout = LayoutSpec(
                int(d["image_height"]), int(d["image_width"]), int(d["num_vars"]),
                int(d["band_height"]), int(d["total_cycles"]),
            )
            norm = NormStats(d["mu"], d["sigma"], d["alpha"], d["c_mad"], d["kappa"])
            m = d["mask"]
            mask = MaskSpec(m["kind"], tuple(tuple(r) for r in m["masked_cycles"]), m.get("prediction_length"))
            meta = cls(layout, norm, mask, str(d["series_id"]), int(d["periodicity"]), int(d["context_length"]))
        except KeyError as exc:
            raise SchemaMismatch(f"meta is missing field {exc.args[0]!r}") from None
        if norm.num_vars != layout.num_vars:
            raise SchemaMismatch("mu/sigma length disagrees with num_vars")
        return meta

    def __eq__(self, other):
        if not isinstance(other, InstanceMeta):
            return NotImplemented
        return self.to_dict() == other.to_dict()
