import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def unit_cube():
    return np.array([[x, y, z] for x in (0.0, 1.0) for y in (0.0, 1.0) for z in (0.0, 1.0)])


# -- acceptance verdicts ------------------------------------------------------

VERDICTS = {}


class Verdict:
    def __init__(self, number, title):
        self.number, self.title = number, title
        self.checks = []

    def check(self, ok, detail):
        self.checks.append((bool(ok), detail))
        assert ok, detail

    @property
    def passed(self):
        return bool(self.checks) and all(ok for ok, _ in self.checks)


@pytest.fixture
def criterion(request):
    """Record named checks for one acceptance criterion; the terminal summary
    prints one pass/fail line per criterion."""
    made = []

    def open_(number, title):
        v = Verdict(number, title)
        VERDICTS[number] = v
        made.append(v)
        return v

    yield open_
    for v in made:
        if not v.checks:
            v.checks.append((False, "raised before any check"))


def pytest_runtest_makereport(item, call):
    # an exception raised outside check() still marks the criterion failed
    n = getattr(item, "_criterion", None)
    if call.when == "call" and call.excinfo is not None and n in VERDICTS and VERDICTS[n].passed:
        VERDICTS[n].checks.append((False, f"{call.excinfo.typename}: {call.excinfo.value}"))


def pytest_collection_modifyitems(items):
    for item in items:
        marker = item.get_closest_marker("criterion")
        if marker:
            item._criterion = marker.args[0]


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(VERDICTS):
        v = VERDICTS[n]
        status = "PASS" if v.passed else "FAIL"
        last = next((d for ok, d in v.checks if not ok), v.checks[-1][1] if v.checks else "")
        terminalreporter.write_line(f"criterion {n:2d} {status}  {v.title}: {last}")
