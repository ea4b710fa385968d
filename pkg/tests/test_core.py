import numpy as np
import pytest

from bitsi.core import (
    DataError,
    IndexOutOfRange,
    InstanceMeta,
    LayoutSpec,
    MaskSpec,
    MetaMismatch,
    NormStats,
    PeriodTooLong,
    SchemaMismatch,
    TimeSeries,
    TsImage,
    channel_of_var,
    truncate_to_period,
)


def test_timeseries_is_read_only_and_2d():
    s = TimeSeries(np.arange(6.0), 3)
    assert s.values.shape == (6, 1)
    with pytest.raises(ValueError):
        s.values[0, 0] = 1.0


def test_timeseries_rejects_inf_and_bad_period():
    with pytest.raises(DataError):
        TimeSeries([1.0, np.inf], 1)
    with pytest.raises(DataError):
        TimeSeries([1.0, 2.0], 0)


@pytest.mark.parametrize("T, expected", [(240, 240), (250, 240), (24, 24)])
def test_truncate_keeps_whole_cycles(T, expected):
    s = TimeSeries(np.arange(T, dtype=float), 24)
    out = truncate_to_period(s)
    assert out.length == expected
    assert out.values[-1, 0] == T - 1
    if T == 250:
        assert out.values[0, 0] == 10  # first 10 steps dropped


def test_truncate_shorter_than_period():
    with pytest.raises(PeriodTooLong):
        truncate_to_period(TimeSeries(np.ones(5), 24))


def test_norm_stats_sigma_positive():
    with pytest.raises(DataError):
        NormStats([0.0], [0.0], 0.5, 0.6745, 4.0)


def test_forecast_mask_is_right_suffix():
    m = MaskSpec.forecast(2, 5, 30, 24)
    assert m.masked_cycles == ((4, 5), (4, 5))
    cm = m.cycle_mask(2, 5)
    assert cm.tolist() == [[False, False, False, True, True]] * 2
    assert m.ratio(2, 5) == pytest.approx(0.4)
    with pytest.raises(DataError):
        MaskSpec.forecast(1, 2, 48, 24)


def test_mask_index_checks():
    m = MaskSpec.imputation([[1, 7]])
    with pytest.raises(IndexOutOfRange):
        m.cycle_mask(1, 6)
    with pytest.raises(MetaMismatch):
        m.cycle_mask(2, 10)


def test_timestep_mask_expands_cycles():
    tm = MaskSpec.imputation([[2], [1]]).timestep_mask(2, 3, 4)
    assert tm.shape == (12, 2)
    assert tm[:, 0].tolist() == [False] * 4 + [True] * 4 + [False] * 4
    assert tm[:, 1].tolist() == [True] * 4 + [False] * 8


def test_channels_cycle_through_rgb():
    assert [channel_of_var(n) for n in range(1, 8)] == [0, 1, 2, 0, 1, 2, 0]


def test_tsimage_u8_rounding():
    px = np.zeros((1, 2, 3))
    px[0, 0, 0], px[0, 1, 0] = 0.5, 1.0
    img = TsImage(px)
    assert img.pixels_u8[0, 0, 0] == 128
    assert img.pixels_u8[0, 1, 0] == 255
    assert TsImage.from_u8(img.pixels_u8).pixels_u8.tolist() == img.pixels_u8.tolist()


def _meta():
    return InstanceMeta(
        LayoutSpec.build(896, 896, 2, 6),
        NormStats([1.0, 2.0], [0.5, 0.25], 0.5, 0.6745, 4.0),
        MaskSpec.imputation([[2, 3], [5]]),
        "x",
        24,
        144,
    )


def test_meta_dict_roundtrip():
    m = _meta()
    assert InstanceMeta.from_dict(m.to_dict()) == m


def test_meta_schema_checks():
    d = _meta().to_dict()
    d["schema_version"] = 99
    with pytest.raises(SchemaMismatch):
        InstanceMeta.from_dict(d)
    d = _meta().to_dict()
    del d["mu"]
    with pytest.raises(SchemaMismatch):
        InstanceMeta.from_dict(d)
