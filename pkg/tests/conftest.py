import datetime as dt
from pathlib import Path

import pytest

from proverum.scenario.citizens import parse_citizens
from proverum.scenario.process import Simulation
from proverum.scenario.topology import build_topology, default_config

CORPUS = Path(__file__).resolve().parents[1] / "src" / "proverum" / "corpus"
TODAY = dt.date(2020, 9, 27)


@pytest.fixture
def network():
    return build_topology(default_config(), seed=7, today=TODAY)


@pytest.fixture
def small_citizens():
    return parse_citizens((CORPUS / "citizens_small.csv").read_text())


@pytest.fixture
def sim(small_citizens):
    s = Simulation(seed=7)
    s.load_citizens(small_citizens)
    return s


def run_until(sim: Simulation, stage: str, event: str = "E1") -> Simulation:
    if event not in sim.elections:
        sim.open_event(event, TODAY)
    sim.run_remaining(event, until=stage)
    return sim


CRITERIA = {
    1: "topology fidelity",
    2: "exhaustive tamper detection",
    3: "privacy non-leakage",
    4: "eligibility verifiability",
    5: "merkle proof soundness",
    6: "aggregation conservation",
    7: "threat-event suite",
    8: "determinism",
    9: "public sufficiency",
}
_criterion_results: dict[int, list[bool]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _criterion_results.setdefault(marker.args[0], []).append(report.passed)


def pytest_terminal_summary(terminalreporter):
    if not _criterion_results:
        return
    terminalreporter.section("acceptance")
    for n in sorted(_criterion_results):
        results = _criterion_results[n]
        verdict = "PASS" if all(results) else "FAIL"
        terminalreporter.write_line(f"criterion {n} {CRITERIA[n]}: {verdict} ({sum(results)}/{len(results)} tests)")
