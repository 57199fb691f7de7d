import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from bhcsum.concepts import ConceptDictionary  # noqa: E402

_CRITERIA: dict[int, list] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion covered by the test")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    mark = getattr(report, "_criterion", None)
    if mark is None:
        return
    n, title = mark
    entry = _CRITERIA.setdefault(n, [title, True])
    entry[1] = entry[1] and report.outcome == "passed"


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        report._criterion = (marker.args[0], marker.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, ok = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}: {title}")


@pytest.fixture(scope="session")
def dictionary():
    return ConceptDictionary.default()


@pytest.fixture
def af_dictionary():
    return ConceptDictionary(
        {
            "atrial fibrillation": ("AF", "T-11"),
            "atrial fibrillation ablation": ("AFA", "T-39"),
            "stroke": ("STR", "T-11"),
            "pneumonia": ("PNA", "T-11"),
            "sepsis": ("SEP", "T-11"),
            "heparin": ("HEP", "T-9"),
            "warfarin": ("WAR", "T-9"),
            "chest x-ray": ("CXR", "T-39"),
        }
    )
