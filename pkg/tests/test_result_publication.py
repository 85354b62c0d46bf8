import dataclasses

import pytest
from hypothesis import given, strategies as st

from proverum.errors import MissingChildResult, PrematureDestruction, UnsignedResult, WrongScope
from proverum.ledger import Chaincode
from proverum.records import ResultRecord, ScopeLevel, normalize_counts
from proverum.result_publication import (
    LOG_MISMATCH,
    NEGATIVE_COUNT,
    TURNOUT_EXCEEDS_ELECTORATE,
    TURNOUT_OUT_OF_RANGE,
    OutOfBandCommand,
    aggregate,
    authorize_destruction,
    committed_results,
    evaluate_plausibility,
    export_tallies,
    process_destruction,
    submit_municipal_result,
    submit_record,
)

from conftest import run_until


def record(yes, no, electorate):
    return ResultRecord(ScopeLevel.MUNICIPALITY, "Uster", "E1", normalize_counts({"yes": yes, "no": no}),
                        electorate, "Uster")


def test_turnout_above_electorate_fails():
    reasons = evaluate_plausibility(record(70, 50, 100), 120)
    assert reasons == (TURNOUT_EXCEEDS_ELECTORATE, TURNOUT_OUT_OF_RANGE)


def test_plausibility_rules():
    assert evaluate_plausibility(record(30, 20, 100), 50) == ()
    assert evaluate_plausibility(record(30, 20, 100), 49) == (LOG_MISMATCH,)
    assert NEGATIVE_COUNT in evaluate_plausibility(record(-1, 5, 100), 4)
    assert evaluate_plausibility(record(0, 0, 0), 0) == ()
    assert TURNOUT_OUT_OF_RANGE in evaluate_plausibility(record(1, 0, 0), 1)


@given(st.integers(0, 300), st.integers(0, 300), st.integers(0, 400), st.integers(0, 600))
def test_plausibility_matches_rule_oracle(yes, no, electorate, logged):
    total = yes + no
    expected = []
    if total > electorate:
        expected.append(TURNOUT_EXCEEDS_ELECTORATE)
    if total != logged:
        expected.append(LOG_MISMATCH)
    if (electorate == 0 and total) or (electorate and total > electorate):
        expected.append(TURNOUT_OUT_OF_RANGE)
    assert sorted(evaluate_plausibility(record(yes, no, electorate), logged)) == sorted(expected)


def test_record_roundtrip(network):
    r = record(3, 4, 10).signed(network.directory.publication_key("Uster"))
    assert ResultRecord.from_bytes(r.to_bytes()) == r


def test_unsigned_and_wrong_scope(network):
    with pytest.raises(UnsignedResult):
        submit_record(network, "canton-zurich", record(1, 1, 5))
    with pytest.raises(WrongScope):
        submit_municipal_result(network, "Zurich", "E1", {"yes": 1}, 5)
    with pytest.raises(WrongScope):
        aggregate(network, "Uster", "E1")


def test_contract_rejects_municipality_writing_another_scope(network):
    forged = dataclasses.replace(record(1, 1, 5), scope="Winterthur", submitter="Uster")
    forged = forged.signed(network.directory.publication_key("Uster"))
    tx_id = submit_record(network, "canton-zurich", forged)
    network.commit()
    entry = network.channel("canton-zurich").find_tx(tx_id)
    assert (entry.valid, entry.reason) == (False, "WrongScope")


def test_aggregate_needs_every_child(network):
    submit_municipal_result(network, "Uster", "E1", {"yes": 1}, 3)
    network.commit()
    with pytest.raises(MissingChildResult):
        aggregate(network, "Confederation", "E1")


def test_full_pipeline_sums_and_signatures(sim):
    run_until(sim, "aggregate")
    election = sim.election("E1")
    federal = sim.federal_result("E1")
    total = {"yes": 0, "no": 0}
    for counts in election.counts.values():
        for c, n in counts.items():
            total[c] += n
    assert federal.counts_dict() == total
    assert federal.electorate_size == 12
    results = committed_results(sim.network, "E1")
    assert [r.level for r, _ in results] == [ScopeLevel.MUNICIPALITY] * 4 + [ScopeLevel.CANTON] * 2 + [
        ScopeLevel.FEDERAL]
    table = export_tallies(results)
    assert table.count("\n") == 8


def test_failed_check_blocks_aggregation(sim):
    run_until(sim, "count")
    election = sim.election("E1")
    election.tally_override["Thun"] = {"yes": 70, "no": 50}
    sim.run_stage("E1", "submit")
    sim.run_stage("E1", "check")
    first, recount = election.checks["Thun"]
    assert not first.passed and TURNOUT_EXCEEDS_ELECTORATE in first.reasons and recount.passed
    assert sim.offices["Thun"].electorate("E1") == 4


def test_destruction_requires_a_federal_result(sim):
    run_until(sim, "count")
    with pytest.raises(PrematureDestruction):
        authorize_destruction(sim.network, "Confederation", "E1")
    sim.run_remaining("E1", "aggregate")
    outcome = process_destruction(sim.network, sim.pipeline, "Uster", "E1", OutOfBandCommand("Zurich", "E1"))
    assert not outcome.acted and "out-of-band" in outcome.reason
    assert not process_destruction(sim.network, sim.pipeline, "Uster", "E1").acted
    sim.run_stage("E1", "destroy")
    outcomes = sim.election("E1").destruction
    assert all(o.acted for o in outcomes.values())
    assert sum(o.destroyed for o in outcomes.values()) == sum(
        sum(c.values()) for c in sim.election("E1").counts.values())


def test_municipality_cannot_order_destruction(sim):
    run_until(sim, "aggregate")
    with pytest.raises(WrongScope):
        authorize_destruction(sim.network, "Uster", "E1")
    tx = sim.network.transact("canton-zurich", "Uster", Chaincode.RP, "rp.destroy", {"event": "E1"})
    sim.commit()
    assert sim.network.channel("canton-zurich").find_tx(tx.tx_id).reason == "NotAuthorizedToDestroy"
