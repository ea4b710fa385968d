import json

import numpy as np
import pytest

from bitsi import codec, io
from bitsi.core import MaskSpec, SchemaMismatch


def _write(path, text):
    path.write_text(text)
    return path


def test_read_series_with_header(tmp_path, geometry_series):
    p = tmp_path / "s.csv"
    io.write_series_csv(p, geometry_series.values, header=["a", "b", "c"])
    s = io.read_series_csv(p, 24)
    assert (s.length, s.num_vars) == (240, 3)
    assert np.array_equal(s.values, geometry_series.values)


def test_parse_error_location(tmp_path):
    lines = ["1,2"] * 10
    lines[6] = "1,abc"
    with pytest.raises(io.ParseError) as exc:
        io.read_series_csv(_write(tmp_path / "bad.csv", "\n".join(lines)), 2)
    assert (exc.value.row, exc.value.col) == (7, 2)


def test_header_only_is_empty(tmp_path):
    with pytest.raises(io.EmptyFile):
        io.read_series_csv(_write(tmp_path / "h.csv", "a,b\n"), 2)


def test_non_finite_rejected(tmp_path):
    with pytest.raises(io.ParseError):
        io.read_series_csv(_write(tmp_path / "n.csv", "1\nnan\n"), 1)


def test_matrix_csv_keeps_nan(tmp_path):
    m = np.array([[1.5, np.nan], [1 / 3, -2e-300]])
    io.write_series_csv(tmp_path / "m.csv", m)
    assert np.array_equal(io.read_matrix_csv(tmp_path / "m.csv"), m, equal_nan=True)


def test_image_and_meta_roundtrip(tmp_path, geometry_series):
    img, meta = codec.encode(geometry_series, MaskSpec.forecast(3, 10, 24, 24))
    io.write_png(tmp_path / "x.png", img)
    io.write_floatimg(tmp_path / "x.floatimg", img)
    io.write_meta(io.meta_path_for(tmp_path / "x.png"), meta)
    assert np.array_equal(io.read_png(tmp_path / "x.png").pixels_u8, img.pixels_u8)
    assert np.array_equal(io.read_floatimg(tmp_path / "x.floatimg").pixels_float, img.pixels_float)
    back = io.read_meta(tmp_path / "x.meta.json")
    assert back == meta
    assert np.array_equal(back.norm.sigma, meta.norm.sigma)


def test_meta_unknown_version(tmp_path, geometry_series):
    _, meta = codec.encode(geometry_series)
    d = meta.to_dict()
    d["schema_version"] = 2
    (tmp_path / "m.json").write_text(json.dumps(d))
    with pytest.raises(SchemaMismatch):
        io.read_meta(tmp_path / "m.json")


def test_floatimg_rejects_garbage(tmp_path):
    (tmp_path / "g.floatimg").write_bytes(b"NOPE" + bytes(12))
    with pytest.raises(ValueError):
        io.read_floatimg(tmp_path / "g.floatimg")


def test_jsonl_roundtrip(tmp_path):
    recs = [{"a": 1}, {"b": [1, 2]}]
    io.write_jsonl(tmp_path / "r.jsonl", recs)
    assert io.read_jsonl(tmp_path / "r.jsonl") == recs
