import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from pinnbias.jetnet import ParamVector, init_params

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def small_net():
    """Narrow random net with nonzero biases, so even derivatives don't vanish at 0."""
    return init_params(3, (1, 8, 6, 1), "lecun", bias_std=0.5)


def linear_net(w: float, b: float) -> ParamVector:
    return ParamVector([np.array([[w]])], [np.array([b])])


def rel_err(a, b, floor=1e-8):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor))


# ------------------------------------------------------------ acceptance lines

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or not (rep.when == "call" or rep.failed or rep.skipped):
        return
    status = "PASS" if rep.passed else "SKIP" if rep.skipped else "FAIL"
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    if rep.skipped and not detail:
        detail = str(rep.longrepr[-1]) if isinstance(rep.longrepr, tuple) else ""
    _CRITERIA[mark.args[0]] = (mark.args[1], status, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, status, detail = _CRITERIA[n]
        line = f"criterion {n:2d} {status}  {title}"
        terminalreporter.write_line(f"{line}: {detail}" if detail else line)
