import numpy as np
import pytest

from bitsi.core import TimeSeries


def synthetic_series(rng: np.random.Generator, num_vars: int, f: int, cycles: int) -> TimeSeries:
    """Sinusoid + linear trend + noise per variable, with random amplitude, phase and offset."""
    t = np.arange(f * cycles)
    cols = []
    for _ in range(num_vars):
        amp = rng.uniform(0.5, 5.0)
        phase = rng.uniform(0, 2 * np.pi)
        slope = rng.uniform(-0.02, 0.02)
        offset = rng.uniform(-10, 10)
        noise = rng.uniform(0.01, 0.3) * amp
        cols.append(offset + amp * np.sin(2 * np.pi * t / f + phase) + slope * t + noise * rng.standard_normal(t.size))
    return TimeSeries(np.stack(cols, axis=1), f)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def geometry_series():
    """The 896x896, N=3, L=240, f=24 worked-example instance."""
    return synthetic_series(np.random.default_rng(7), 3, 24, 10)


def pytest_terminal_summary(terminalreporter):
    try:
        from tests import test_acceptance
    except ImportError:
        try:
            import test_acceptance
        except ImportError:
            return
    lines = test_acceptance.RESULTS
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
