import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bitsi import codec
from bitsi.core import (
    CapacityViolation,
    DataError,
    LayoutSpec,
    MaskSpec,
    MetaMismatch,
    NotDivisible,
    PeriodicGrid,
    TimeSeries,
    TsImage,
)
from bitsi.layout import cycle_x_span, var_y_range
from bitsi.norm import rfn_normalize

from .conftest import synthetic_series


def test_fold_and_unfold_by_hand():
    g = codec.fold(np.arange(6.0), 3)  # a..g as 0..5
    assert g.cells.tolist() == [[0, 3], [1, 4], [2, 5]]
    assert codec.unfold(g).tolist() == list(range(6))
    assert codec.fold(np.arange(5.0), 5).cells.shape == (5, 1)
    assert codec.fold(np.arange(240.0), 24).cells.shape == (24, 10)
    with pytest.raises(NotDivisible):
        codec.fold(np.arange(7.0), 3)


def test_fold_roundtrip_random_grids():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        f, C = rng.integers(1, 30, size=2)
        cells = rng.standard_normal((f, C))
        assert np.array_equal(codec.fold(codec.unfold(PeriodicGrid(cells)), f).cells, cells)


def test_capacity_examples():
    assert codec.check_capacity(896, 896, 3, 24, 240).ok
    bad = codec.check_capacity(896, 896, 64, 24, 240)
    assert not bad.ok and bad.min_height == 64 * 24
    assert codec.check_capacity(96, 896, 4, 24, 240).ok
    assert not codec.check_capacity(896, 10, 1, 24, 24 * 11).ok


def test_render_band_small_cases():
    lay = LayoutSpec.build(4, 3, 1, 1)
    band = codec.render_band(PeriodicGrid([[0.0]]), LayoutSpec.build(1, 5, 1, 1))
    assert np.all(band == 0.5)
    band = codec.render_band(PeriodicGrid([[-1.0], [1.0]]), lay)
    assert band[:2].tolist() == [[0.0] * 3] * 2 and band[2:].tolist() == [[1.0] * 3] * 2


def test_render_band_is_pure_replication():
    rng = np.random.default_rng(1)
    cells = np.tanh(rng.standard_normal((24, 10)))
    lay = LayoutSpec.build(894, 896, 3, 10)
    band = codec.render_band(PeriodicGrid(cells), lay)
    assert band.shape == (298, 896)
    assert set(np.unique(band)) <= set(np.unique((cells + 1) / 2))


def test_encode_geometry_and_channels(geometry_series):
    img, meta = codec.encode(geometry_series)
    assert (img.height, img.width) == (896, 896)
    assert meta.layout.band_height == 298
    px = img.pixels_float
    for n, (y0, y1) in enumerate([(0, 297), (298, 595), (596, 893)], start=1):
        assert var_y_range(n, 896, 3) == (y0, y1)
        others = [c for c in range(3) if c != n - 1]
        assert np.all(px[y0:y1 + 1, :, others] == 0)
        assert px[y0:y1 + 1, :, n - 1].min() > 0
    assert np.all(px[894:] == 0)


def test_single_variable_uses_full_height():
    s = TimeSeries(np.sin(np.arange(144) / 3), 24)
    img, meta = codec.encode(s)
    assert meta.layout.band_height == 896
    assert img.pixels_float[:, :, 0].min() > 0


def test_masked_cycles_are_black():
    s = synthetic_series(np.random.default_rng(2), 2, 24, 6)
    mask = MaskSpec.imputation([[2, 3], [6]])
    img, meta = codec.encode(s, mask)
    x1, _ = cycle_x_span(2, meta.layout)
    _, x2 = cycle_x_span(3, meta.layout)
    assert (x1, x2) == (149, 447)
    assert np.all(img.pixels_float[0:448, x1:x2 + 1] == 0)
    assert img.pixels_float[0:448, 0:x1, 0].min() > 0


def test_norm_fit_uses_visible_cycles_only():
    x = np.r_[np.sin(np.arange(48) / 2), np.full(24, 1e6)]
    s = TimeSeries(x, 24)
    _, meta = codec.encode(s, MaskSpec.forecast(1, 3, 24, 24))
    _, ref = codec.encode(TimeSeries(x[:48], 24))
    assert meta.norm == ref.norm
    assert meta.context_length == 48


def test_encode_rejects_bad_masks():
    s = synthetic_series(np.random.default_rng(3), 2, 24, 10)
    with pytest.raises(DataError):
        codec.encode(s, MaskSpec.imputation([list(range(1, 7)), [1]]))  # 60 % masked
    with pytest.raises(DataError):
        codec.encode(s, MaskSpec("forecast", ((9, 10), (10,)), 24))
    with pytest.raises(CapacityViolation):
        codec.encode(s, config=codec.CodecConfig(height=40, width=896))


def test_visible_nan_rejected():
    x = np.sin(np.arange(48.0))
    x[3] = np.nan
    with pytest.raises(DataError):
        codec.encode(TimeSeries(x, 24))


def test_decode_mid_gray_is_mu(geometry_series):
    _, meta = codec.encode(geometry_series)
    gray = np.zeros((896, 896, 3))
    gray[:, :, :] = 0.5
    out = codec.decode(TsImage(gray), meta).values
    assert np.allclose(out, meta.norm.mu[None, :], rtol=0, atol=1e-12)


def test_decode_size_mismatch(geometry_series):
    _, meta = codec.encode(geometry_series)
    with pytest.raises(MetaMismatch):
        codec.decode(TsImage(np.zeros((10, 10, 3))), meta)


def test_masked_region_decode_matches_full(geometry_series):
    mask = MaskSpec.imputation([[2], [4, 5], [10]])
    _, target, meta = codec.encode_pair(geometry_series, mask)
    full = codec.decode(target, meta).values
    part = codec.decode(target, meta, region="masked").values
    tm = meta.timestep_mask()
    assert np.array_equal(part[tm], full[tm])
    assert np.isnan(part[~tm]).all()


def test_roundtrip_report_passes_on_worked_instance(geometry_series):
    assert codec.roundtrip_report(geometry_series)["passed"]
    assert codec.roundtrip_report(geometry_series, use_u8=True)["passed"]


def test_encode_is_deterministic(geometry_series):
    a, ma = codec.encode(geometry_series)
    b, mb = codec.encode(geometry_series)
    assert np.array_equal(a.pixels_float, b.pixels_float) and ma == mb


@settings(max_examples=40, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    N=st.integers(1, 6),
    f=st.sampled_from([4, 12, 24, 48]),
    C=st.integers(1, 12),
    H=st.integers(64, 400),
    W=st.integers(16, 400),
)
def test_float_roundtrip_property(seed, N, f, C, H, W):
    if not codec.check_capacity(H, W, N, f, f * C).ok:
        return
    s = synthetic_series(np.random.default_rng(seed), N, f, C)
    cfg = codec.CodecConfig(H, W)
    img, meta = codec.encode(s, config=cfg)
    back = codec.decode(img, meta).values
    u = rfn_normalize(s.values, meta.norm)
    sel = (np.abs(u) <= 0.99) & (s.values != 0)
    assert (np.abs(back - s.values)[sel] <= 1e-6 * np.abs(s.values)[sel]).all()
    others = np.ones((H, W, 3), dtype=bool)
    for n in range(1, N + 1):
        y0, y1 = var_y_range(n, H, N)
        others[y0:y1 + 1, :, (n - 1) % 3] = False
    assert np.all(img.pixels_float[others] == 0)
