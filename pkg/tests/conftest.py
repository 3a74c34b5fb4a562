import os
import sys

from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

# every property test runs at least 100 randomized instances
settings.register_profile(
    "default", max_examples=100, deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.register_profile(
    "thorough", max_examples=500, deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


# acceptance summary: one PASS/FAIL line per criterion --------------------------------

_CRITERIA = {}


def pytest_runtest_logreport(report):
    n = report.user_properties and dict(report.user_properties).get("criterion")
    if not n:
        return
    res = _CRITERIA.setdefault(n, [])
    if report.when == "call" or report.outcome != "passed":
        failed = report.outcome == "failed" or hasattr(report, "wasxfail")
        res.append((report.nodeid.split("::")[-1], not failed))


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m:
            item.user_properties.append(("criterion", m.args[0]))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        res = _CRITERIA[n]
        bad = [name for name, ok in res if not ok]
        line = f"CRITERION {n}: {'FAIL' if bad else 'PASS'} ({len(res) - len(bad)}/{len(res)} checks)"
        if bad:
            line += " failing: " + ", ".join(bad)
        terminalreporter.write_line(line)
