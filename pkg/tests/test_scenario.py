import pytest

from proverum.cli import main
from proverum.errors import ParseError, ProverumError, StepPreconditionFailed, UnsupportedContext
from proverum.scenario.citizens import format_citizens, generate_citizens, parse_citizens
from proverum.scenario.process import STAGES, Simulation
from proverum.scenario.report import render_report, report_digest
from proverum.scenario.runner import parse_scenario, run_file, run_scenario
from proverum.scenario.sweep import sweep
from proverum.scenario.threats import MITIGATIONS, inject
from proverum.scenario.topology import parse_topology

from conftest import CORPUS, TODAY

SCENARIOS = sorted(p.stem for p in CORPUS.glob("*.scenario"))


@pytest.mark.parametrize("name", SCENARIOS)
def test_corpus_scenario_meets_its_expectations(name):
    run = run_file(CORPUS / f"{name}.scenario")
    mismatches = [(e.fact, e.expected, e.actual) for e in run.expectations if not e.ok]
    assert run.expectations and not mismatches


@pytest.mark.parametrize("text, line, column", [
    ("frobnicate\n", 1, 1),
    ("event E1\nseed 3\n", 2, 1),
    ("seed x\n", 1, 6),
    ("event E1\nstage vote\n", 2, 7),
    ("event E1\ninject TE99\n", 2, 8),
    ("relocate a b\n", 1, 13),
])
def test_parse_errors_carry_positions(text, line, column):
    with pytest.raises(ParseError) as err:
        parse_scenario(text)
    assert (err.value.line, err.value.column) == (line, column)


def test_comments_and_params():
    steps = parse_scenario("# header\nseed 4\nevent E1 2020-09-27  # trailing\nstage all until=deliver\n")
    assert [s.verb for s in steps] == ["seed", "event", "stage"]
    assert steps[2].params == {"until": "deliver"} and steps[2].line == 4


def test_failed_step_reports_its_index(tmp_path):
    with pytest.raises(StepPreconditionFailed) as err:
        run_scenario("citizens generate 3\nevent E1\ninject TE12 muni=Uster\n", tmp_path)
    assert err.value.step == 3


def test_attempt_records_errors(tmp_path):
    run = run_scenario("citizens generate 3\nevent E1\nattempt stage count\nexpect attempt.error ProverumError\n"
                       "expect stage.next register\n", tmp_path)
    assert run.ok, [(e.fact, e.actual) for e in run.expectations]


def test_stages_must_run_in_order(sim):
    sim.open_event("E1", TODAY)
    with pytest.raises(ProverumError):
        sim.run_stage("E1", "cast")
    sim.run_remaining("E1")
    assert sim.election("E1").done == list(STAGES)


def test_injection_context_is_enforced(sim):
    sim.open_event("E1", TODAY)
    with pytest.raises(UnsupportedContext):
        inject(sim, "E1", "TE12", {})


def test_mitigation_table_is_complete():
    assert sorted(MITIGATIONS, key=lambda t: int(t[2:])) == [f"TE{i}" for i in range(1, 15)]


def test_sweep_clean_on_honest_run(sim):
    sim.open_event("E1", TODAY)
    sim.run_remaining("E1")
    failing = [r.render() for r in sweep(sim) if not r.ok]
    assert failing == []


def test_citizen_csv_roundtrip_and_errors():
    import random

    records = generate_citizens(random.Random(3), ["Uster", "Thun"], 20, TODAY)
    assert len(records) == 40
    assert parse_citizens(format_citizens(records)) == records
    with pytest.raises(ParseError):
        parse_citizens("nope\n")
    header = format_citizens([]).strip()
    with pytest.raises(ParseError) as err:
        parse_citizens(header + "\nX-1,A,B,1990-13-01,CH,Uster,Main,false\n")
    assert err.value.line == 2


def test_topology_parse_error():
    with pytest.raises(ParseError):
        parse_topology("channel c federal CM Confederation\n")


def test_reports_are_byte_identical_for_a_seed():
    a = render_report(run_file(CORPUS / "te05.scenario"))
    b = render_report(run_file(CORPUS / "te05.scenario"))
    assert a == b
    assert len(report_digest(a)) == 64
    c = render_report(run_file(CORPUS / "te05.scenario", seed=999))
    assert report_digest(c) != report_digest(a)


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["run", "uc3"]) == 0
    assert "report-digest\t" in capsys.readouterr().out
    wrong = tmp_path / "wrong.scenario"
    wrong.write_text("citizens generate 3\nevent E1\nstage all\nexpect federal.published false\n")
    assert main(["run", str(wrong)]) == 1
    broken = tmp_path / "broken.scenario"
    broken.write_text("bogus\n")
    assert main(["run", str(broken)]) == 2
    assert main(["run", "no-such-scenario"]) == 2
    assert main(["list"]) == 0
    assert "te14" in capsys.readouterr().out.split()


def test_cli_report_figures_and_dump(tmp_path, capsys):
    report = tmp_path / "out" / "honest.txt"
    dumps = tmp_path / "dumps"
    assert main(["run", "honest_full", "--report", str(report), "--dump-dir", str(dumps)]) == 0
    assert report.read_text().rstrip().splitlines()[-1].startswith("report-digest\t")
    figures = sorted(p.name for p in (tmp_path / "out" / "honest_figures").iterdir())
    assert figures == ["block_heights.png", "envelope_census.png", "results_E1.png"]
    for png in figures:
        assert (tmp_path / "out" / "honest_figures" / png).read_bytes()[:4] == b"\x89PNG"
    dump = dumps / "federal.chain"
    assert main(["run", "--verify-only", str(dump)]) == 0
    data = bytearray(dump.read_bytes())
    data[len(data) // 2] ^= 0x40
    dump.write_bytes(bytes(data))
    assert main(["run", "--verify-only", str(dump)]) == 1


def test_simulation_seed_determinism():
    def heads(seed):
        s = Simulation(seed=seed)
        s.generate_citizens(5)
        s.open_event("E1", TODAY)
        s.run_remaining("E1")
        return {c: ch.head_hash for c, ch in s.network.channels.items()}

    assert heads(3) == heads(3)
    assert heads(3) != heads(4)
