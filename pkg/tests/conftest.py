import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from imspe_lab import CovarianceParams, Design  # noqa: E402

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

TWIN_OPT_THETA = (0.128, 0.00016)
TWIN_OPT_OUTER = 0.767117


@pytest.fixture
def twin_opt_params():
    return CovarianceParams(TWIN_OPT_THETA)


@pytest.fixture
def twin_opt_design():
    return Design.with_twins([[-TWIN_OPT_OUTER, 0.0], [TWIN_OPT_OUTER, 0.0]], (0.0, 0.0), (0.0, 1e-6))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(results):
        ok, detail = results[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {key}: {detail}")
