import numpy as np
import pytest

from valetcharge.market import GridSpec, maximize_profit
from valetcharge.params import PAPER_PARAMS, PolicyConfig
from valetcharge.policy import stackelberg_tax, sweep_k


@pytest.fixture(scope="session")
def params():
    return PAPER_PARAMS


@pytest.fixture(scope="session")
def planning(params):
    """Untaxed sweep over K = 20..120 with the default grid."""
    return sweep_k(range(20, 121), params)


@pytest.fixture(scope="session")
def tax_sweep(params):
    """Taxation sweep at r = 25 over p_t = 0, 0.2, ..., 25."""
    pts = np.round(np.arange(0.0, 25.0 + 1e-9, 0.2), 10)
    return stackelberg_tax(pts, params, PolicyConfig(charger_cost=25.0))


@pytest.fixture(scope="session")
def optimum_57(params):
    return maximize_profit(PolicyConfig(k=57), params)


@pytest.fixture(scope="session")
def grid():
    return GridSpec()


# --------------------------------------------------------------------------
# acceptance report: one PASS/FAIL line per criterion, printed after the run

_ACCEPTANCE = {}


@pytest.fixture
def acceptance():
    def record(number, title, ok, detail):
        _ACCEPTANCE[number] = (bool(ok), title, detail)
        return bool(ok)
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        ok, title, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} [{number}] {title}: {detail}")
