import numpy as np
import pytest

from harcnn.synth import CohortSpec, generate_cohort

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, text): acceptance criterion checked by this test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (report.when != "call" and not report.failed and not report.skipped):
        return
    number, text = marker.args
    if hasattr(report, "wasxfail"):
        status = f"FAIL (expected: {report.wasxfail})"
    elif report.passed:
        status = "PASS"
    elif report.skipped:
        status = "SKIP"
    else:
        status = "FAIL"
    detail = dict(item.user_properties).get("detail", "")
    _criteria.setdefault(number, []).append((text, status, detail))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        cases = _criteria[number]
        passed = sum(status == "PASS" for _, status, _ in cases)
        verdict = "PASS" if passed == len(cases) else "FAIL"
        texts = "; ".join(dict.fromkeys(text for text, _, _ in cases))
        terminalreporter.write_line(f"criterion {number:>2}: {verdict} ({passed}/{len(cases)} cases) {texts}")
        for text, status, detail in cases:
            if status != "PASS" or detail:
                terminalreporter.write_line(f"    {status}: {detail or text}")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_cohort():
    """5 subjects x 16 activities, 10 s each."""
    return generate_cohort(CohortSpec(n_subjects=5, duration_s=10.0, seed=3))
