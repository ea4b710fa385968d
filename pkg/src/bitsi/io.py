"""Reading and writing series CSVs, images, sidecars and JSONL datasets."""
from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .core import DataError, InstanceMeta, SchemaMismatch, TimeSeries, TsImage

FLOATIMG_MAGIC = b"BTSI"
_FLOATIMG_HEADER = struct.Struct("<4sIII")


class ParseError(DataError):
    def __init__(self, row: int, col: int, text: str = ""):
        self.row, self.col = row, col
        super().__init__(f"cannot parse {text!r} at row {row}, column {col}")


class EmptyFile(DataError):
    pass


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def read_series_csv(path, periodicity: int, frequency_label=None) -> TimeSeries:
    """Read a column-per-variable CSV.

    A first row containing any non-numeric cell is treated as a header.
    Errors report 1-based file line and column numbers. Empty cells and
    non-finite values are rejected.
    """
    with open(path, newline="") as fh:
        rows = [(i, r) for i, r in enumerate(csv.reader(fh), start=1) if r and any(c.strip() for c in r)]
    if rows and not all(_is_number(c) for c in rows[0][1]):
        rows = rows[1:]
    if not rows:
        raise EmptyFile(f"{path} contains no data rows")
    width = len(rows[0][1])
    data = np.empty((len(rows), width))
    for k, (line, cells) in enumerate(rows):
        if len(cells) != width:
            raise ParseError(line, min(len(cells), width) + 1, "<ragged row>")
        for c, text in enumerate(cells):
            try:
                v = float(text)
            except ValueError:
                raise ParseError(line, c + 1, text) from None
            if not np.isfinite(v):
                raise ParseError(line, c + 1, text)
            data[k, c] = v
    return TimeSeries(data, periodicity, frequency_label)


def write_series_csv(path, values, header=None):
    """Write a matrix with full float precision; NaN becomes an empty cell."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header is not None:
            w.writerow(header)
        for row in values:
            w.writerow(["" if np.isnan(v) else repr(float(v)) for v in row])


def read_matrix_csv(path) -> np.ndarray:
    """Inverse of :func:`write_series_csv`; empty cells read back as NaN."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if rows and not all(_is_number(c) or c == "" for c in rows[0]):
        rows = rows[1:]
    return np.array([[float(c) if c != "" else np.nan for c in r] for r in rows], dtype=np.float64)


def write_png(path, image: TsImage):
    Image.fromarray(np.ascontiguousarray(image.pixels_u8)).save(path, format="PNG", compress_level=6)


def read_png(path) -> TsImage:
    with Image.open(path) as im:
        if im.mode != "RGB":
            im = im.convert("RGB")
        return TsImage.from_u8(np.asarray(im))


def write_floatimg(path, image: TsImage):
    """Lossless container: 16-byte header (magic, H, W, channels) then float64 LE, row-major."""
    px = np.ascontiguousarray(image.pixels_float, dtype="<f8")
    H, W, ch = px.shape
    with open(path, "wb") as fh:
        fh.write(_FLOATIMG_HEADER.pack(FLOATIMG_MAGIC, H, W, ch))
        fh.write(px.tobytes())


def read_floatimg(path) -> TsImage:
    raw = Path(path).read_bytes()
    if len(raw) < _FLOATIMG_HEADER.size:
        raise DataError(f"{path}: truncated float image header")
    magic, H, W, ch = _FLOATIMG_HEADER.unpack_from(raw)
    if magic != FLOATIMG_MAGIC:
        raise DataError(f"{path}: bad magic {magic!r}")
    body = raw[_FLOATIMG_HEADER.size:]
    if len(body) != H * W * ch * 8:
        raise DataError(f"{path}: payload size does not match {H}x{W}x{ch}")
    return TsImage(np.frombuffer(body, dtype="<f8").reshape(H, W, ch))


def meta_path_for(image_path) -> Path:
    p = Path(image_path)
    return p.with_name(p.stem + ".meta.json")


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def write_meta(path, meta: InstanceMeta):
    Path(path).write_text(_dump_json(meta.to_dict()))


def read_meta(path) -> InstanceMeta:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(f"{path}: not valid JSON ({exc})") from None
    return InstanceMeta.from_dict(d)


def write_json(path, obj):
    Path(path).write_text(_dump_json(obj))


def write_jsonl(path, records):
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps(r, allow_nan=False) + "\n")


def read_jsonl(path) -> list:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]
