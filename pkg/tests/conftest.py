import numpy as np
import pytest

from ama.model import RfParams, Scenario, dbm_to_watt

SECTION_V_ENDPOINTS = np.array([[80, 60, 100], [-80, 60, 100], [-80, -60, 100], [80, -60, 100]], float)
SECTION_V_UES = np.array([[40, 30, 0], [-40, 30, 0], [-40, -30, 0], [40, -30, 0]], float)


def make_scenario(ues=((0.0, 0.0, 0.0),), L=1, power_dbm=30.0, **kw) -> Scenario:
    ues = np.asarray(ues, float).reshape(-1, 3)
    return Scenario.create(ues, [dbm_to_watt(power_dbm)] * len(ues), L=L, **kw)


@pytest.fixture
def rf():
    return RfParams.from_db()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance reporting: one line per criterion at the end of the run -------------

_CRITERIA = {}


def pytest_runtest_logreport(report):
    label = dict(report.user_properties).get("criterion")
    if label is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        ok = report.outcome == "passed"
        if label not in _CRITERIA or not ok:
            _CRITERIA[label] = ok


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_CRITERIA, key=lambda s: int(s.split()[0])):
        terminalreporter.write_line(f"criterion {label}: {'PASS' if _CRITERIA[label] else 'FAIL'}")
