"""Pixel geometry of a TS-image: bands, cycle strips and their bounding boxes.

All coordinates are inclusive, with y=0 at the top row. Fractional cycle
widths are resolved with integer floor arithmetic so that adjacent strips
tile the canvas exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

from .core import IndexOutOfRange, LayoutSpec


@dataclass(frozen=True)
class BBox:
    x1: int
    y1: int
    x2: int
    y2: int

    def __post_init__(self):
        if self.x1 > self.x2 or self.y1 > self.y2:
            raise ValueError(f"degenerate box {self}")

    @property
    def area(self) -> int:
        return (self.x2 - self.x1 + 1) * (self.y2 - self.y1 + 1)

    def to_json(self) -> list:
        return [[self.x1, self.y1], [self.x2, self.y2]]

    @classmethod
    def from_json(cls, obj) -> "BBox":
        (x1, y1), (x2, y2) = obj
        return cls(int(x1), int(y1), int(x2), int(y2))

    def __str__(self) -> str:
        return f"[({self.x1}, {self.y1}), ({self.x2}, {self.y2})]"


def band_height(H: int, N: int) -> int:
    return max(1, H // max(1, N))


def var_y_range(n: int, H: int, N: int) -> tuple[int, int]:
    if not 1 <= n <= N:
        raise IndexOutOfRange(f"variable {n} outside 1..{N}")
    h = band_height(H, N)
    return (n - 1) * h, n * h - 1


def cycle_x_span(j: int, layout: LayoutSpec) -> tuple[int, int]:
    """Inclusive column span of 1-based cycle ``j``.

    Equivalent to ``[floor((j-1)*w), floor(j*w) - 1]`` with ``w = W / C``,
    computed in integers to avoid float rounding at exact boundaries.
    """
    C = layout.total_cycles
    if not 1 <= j <= C:
        raise IndexOutOfRange(f"cycle {j} outside 1..{C}")
    W = layout.image_width
    return ((j - 1) * W) // C, (j * W) // C - 1


def row_span(i: int, f: int, h: int) -> tuple[int, int]:
    """Inclusive rows covered by intra-period position ``i`` (0-based) in a band of height ``h``."""
    return (i * h) // f, ((i + 1) * h) // f - 1


def cycle_bbox(n: int, j: int, layout: LayoutSpec) -> BBox:
    y1, y2 = var_y_range(n, layout.image_height, layout.num_vars)
    x1, x2 = cycle_x_span(j, layout)
    return BBox(x1, y1, x2, y2)


def cycles_bbox(n: int, j_first: int, j_last: int, layout: LayoutSpec) -> BBox:
    """Box covering the consecutive cycles ``j_first..j_last`` of variable ``n``."""
    y1, y2 = var_y_range(n, layout.image_height, layout.num_vars)
    x1, _ = cycle_x_span(j_first, layout)
    _, x2 = cycle_x_span(j_last, layout)
    return BBox(x1, y1, x2, y2)


def band_bbox(n: int, layout: LayoutSpec) -> BBox:
    """Full-width box of variable ``n``'s band."""
    y1, y2 = var_y_range(n, layout.image_height, layout.num_vars)
    return BBox(0, y1, layout.image_width - 1, y2)


def contiguous_runs(indices) -> list[tuple[int, int]]:
    """Group sorted integers into inclusive ``(first, last)`` runs."""
    runs: list[tuple[int, int]] = []
    for k in sorted(indices):
        if runs and k == runs[-1][1] + 1:
            runs[-1] = (runs[-1][0], k)
        else:
            runs.append((k, k))
    return runs
