"""Collects acceptance outcomes and prints one line per criterion at the end of the run."""

import pytest

TITLES = {
    1: "piling-up closed form vs convolution",
    2: "cover distribution joint-law identity",
    3: "solver/reduction noise-rate coincidence and order",
    4: "LPN to Hint-LPN transformation law",
    5: "concrete attack conditional rate and random control",
    6: "hybrid embedding matches direct hybrids",
    7: "KAHE end-to-end reliability",
    8: "committee correctness and privacy",
    9: "CRT identity, homomorphism, exact sessions",
    10: "cost formula hand case and measured uplink",
    11: "k > 1e5 anchor in reduction mode",
    12: "decryptor traffic independent of rounds",
    13: "polar code FER and round trip",
}

_results: dict[int, list[bool]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n = mark.args[0]
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _results.setdefault(n, []).append(rep.passed)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(TITLES):
        if n not in _results:
            status = "NOT RUN"
        else:
            status = "PASS" if all(_results[n]) else "FAIL"
        tr.write_line(f"criterion {n:2d}: {status:7s} {TITLES[n]}")
