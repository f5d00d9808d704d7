"""Shared pytest wiring: one summary line per acceptance criterion."""

import re

_CRITERION_LABELS = {
    1: "element exactness",
    2: "control-volume conservation",
    3: "slider pressure oracle and convergence order",
    4: "cavitation complementarity and mass balance",
    5: "element-type consistency at low Peclet",
    6: "element-type discrepancy bound at high Peclet",
    7: "texture benchmarks",
    8: "equilibrium search",
    9: "rheology closures",
    10: "determinism and implicit-step stability",
}

_results: dict[int, str] = {}
_PATTERN = re.compile(r"test_acceptance\.py::test_c(\d{2})_")


def pytest_runtest_logreport(report):
    match = _PATTERN.search(report.nodeid)
    if not match:
        return
    number = int(match.group(1))
    if report.when == "call":
        if report.passed and _results.get(number) != "FAIL":
            _results[number] = "PASS"
        elif not report.passed:
            _results[number] = "FAIL"
    elif report.when == "setup" and report.failed:
        _results[number] = "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for number in sorted(_results):
        label = _CRITERION_LABELS.get(number, "")
        terminalreporter.write_line(
            f"CRITERION {number} ({label}): {_results[number]}")
