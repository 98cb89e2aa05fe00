"""Prints one PASS/FAIL line per acceptance criterion after a test run."""

import re

CRITERIA = {
    1: "stage formulas match hand-computed values; capability scaling is exact",
    2: "golden per-stage breakdown for the bundled mist worker within 1e-6",
    3: "greedy invariants hold on 1000 random instances",
    4: "brute-force optimum bounds the greedy plan on 200 small instances",
    5: "simulated greedy beats every single-node and equal-split sweep point",
    6: "slow cloud is excluded from the bundled plan, fast cloud participates",
    7: "greedy beats the equal split on every multi-node subset",
    8: "loopback deploy acks, checksums and conservation; codec fuzz is clean",
    9: "single-worker simulation equals the cost estimate",
}

_NODE_RE = re.compile(r"test_acceptance\.py::test_criterion_(\d+)")
_results: dict[int, bool] = {}


def pytest_runtest_logreport(report):
    match = _NODE_RE.search(report.nodeid)
    if not match:
        return
    number = int(match.group(1))
    if report.when == "call":
        _results[number] = report.passed
    elif report.failed:
        _results[number] = False


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(_results):
        status = "PASS" if _results[number] else "FAIL"
        description = CRITERIA.get(number, "")
        terminalreporter.write_line(f"ACCEPTANCE {number}: {status} - {description}")
