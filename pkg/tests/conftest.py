import os

import pytest

from nldecay import _accel


@pytest.fixture(params=["jit", "fallback"])
def accel_mode(request, monkeypatch):
    """Run a test once through the numba kernels and once through the numpy fallback."""
    if request.param == "jit":
        if not _accel.HAS_NUMBA:
            pytest.skip("numba not installed")
        monkeypatch.delenv(_accel.ENV_FLAG, raising=False)
    else:
        monkeypatch.setenv(_accel.ENV_FLAG, "1")
    return request.param


@pytest.fixture
def piecewise_f():
    from nldecay.catalog import PIECEWISE_F
    from nldecay.funcspace import Expression

    return Expression(PIECEWISE_F)


@pytest.fixture
def tmp_out(tmp_path):
    return os.fspath(tmp_path / "out")


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
