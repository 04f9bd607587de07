import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# acceptance criteria: collect one outcome per ``@pytest.mark.criterion(n)``
# and print a PASS/FAIL line for each at the end of the session
_criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when == "teardown" and rep.passed:
        return
    if rep.when == "setup" and rep.passed:
        return
    n = mark.args[0]
    detail = dict(item.user_properties).get("detail", "")
    if rep.failed and rep.longrepr is not None:
        last = str(rep.longrepr).strip().splitlines()[-1]
        detail = f"{detail} [{last}]" if detail else last
    prev_ok, prev_detail = _criteria.get(n, (True, ""))
    _criteria[n] = (prev_ok and rep.passed, detail or prev_detail)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        ok, detail = _criteria[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
