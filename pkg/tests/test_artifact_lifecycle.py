import pytest

from proverum.artifact_lifecycle import EnvelopeStatus, VOTER, check_eligibility_verifiability
from proverum.errors import RegisterDigestMismatch
from proverum.scenario.sweep import reception_rows

from conftest import run_until

ELIGIBLE = {"Uster": 2, "Winterthur": 3, "Bern-city": 3, "Thun": 4}


def test_manufacture_one_envelope_per_commitment(sim):
    run_until(sim, "manufacture")
    for muni, n in ELIGIBLE.items():
        envelopes = sim.envelopes_of("E1", muni)
        assert len(envelopes) == n
        assert {e.commitment for e in envelopes} == set(sim.offices[muni].valid_commitments("E1"))
        assert all(e.status is EnvelopeStatus.MANUFACTURED and e.holder == "ESP1" for e in envelopes)
    assert sim.pipeline.status_census() == {"Manufactured": 12}


def test_altered_export_is_refused(sim):
    run_until(sim, "register")
    lines = sim.export_for("E1", "Uster").splitlines()
    with pytest.raises(RegisterDigestMismatch):
        sim.pipeline.manufacture("\n".join(lines[1:]) + "\n", "E1", "Uster")


def test_route_is_logged_and_audits_clean(sim):
    run_until(sim, "deliver")
    assert all(e.holder == VOTER for e in sim.envelopes_of("E1"))
    assert sim.pipeline.audit_routes("Confederation") == []
    assert all(r.complete for r in sim.election("E1").batch_reports)
    # a silent holder change shows up as a divergence
    victim = sim.envelopes_of("E1", "Thun")[0]
    victim.holder = "Adversary"
    (divergence,) = sim.pipeline.audit_routes("Confederation")
    assert divergence.serial == victim.serial and divergence.logged_holder == VOTER


def test_missing_envelope_triggers_bulk_reissue(sim):
    run_until(sim, "manufacture")
    election = sim.election("E1")
    election.batches["Thun"] = election.batches["Thun"][1:]
    sim.run_stage("E1", "dispatch")
    first, second = [r for r in election.batch_reports if r.municipality == "Thun"]
    assert len(first.missing_commitments) == 1 and second.complete
    assert sim.offices["Thun"].active_register("E1").version == 2
    assert sim.offices["Thun"].one_active_commitment_violations("E1") == []


def test_reception_order_of_checks(sim):
    run_until(sim, "cast")
    pipeline = sim.pipeline
    cast = [e for e in sim.envelopes_of("E1", "Thun") if e.status is EnvelopeStatus.CAST]
    first = pipeline.receive_and_validate("Thun", cast[0])
    assert first.accepted
    forged = pipeline.forge(cast[0].commitment, "E1", "Thun")
    assert pipeline.receive_and_validate("Thun", forged).reason == "DuplicateCast"
    foreign = pipeline.forge(b"\x07" * 32, "E1", "Thun")
    assert pipeline.receive_and_validate("Thun", foreign).reason == "NotInRegister"
    wrong_event = pipeline.forge(cast[0].commitment, "E2", "Thun")
    assert pipeline.receive_and_validate("Thun", wrong_event, "E1").reason == "WrongEvent"
    assert forged.serial.endswith("-F") and not forged.manufactured


def test_blacklisted_envelope_is_rejected(sim):
    run_until(sim, "deliver")
    election = sim.election("E1")
    stolen = sim.envelopes_of("E1", "Uster")[0]
    owner = sim.offices["Uster"].owner_of("E1", stolen.commitment)
    replacement, _, _ = sim.single_reissue(election, "Uster", owner, "TheftVoterLetterbox")
    stolen.status = EnvelopeStatus.CAST
    decision = sim.pipeline.receive_and_validate("Uster", stolen)
    assert (decision.accepted, decision.reason) == (False, "Blacklisted")
    sim.pipeline.cast(replacement, "yes")
    assert sim.pipeline.receive_and_validate("Uster", replacement).accepted


def test_counting_and_public_eligibility(sim):
    run_until(sim, "count")
    election = sim.election("E1")
    for muni, counts in election.counts.items():
        accepted = [d for d in sim.pipeline.decisions("E1", muni) if d.accepted]
        assert sum(counts.values()) == len(accepted)
    exports = [(m, sim.export_for("E1", m)) for m in sim.municipalities]
    rows = reception_rows(sim, "E1")
    assert check_eligibility_verifiability(exports, rows) == []
    # the same commitment accepted twice is caught from public data alone
    accepted = next(r for r in rows if r[3] == "Accepted")
    problems = check_eligibility_verifiability(exports, rows + [(accepted[0], "VE-X", accepted[2], "Accepted", "")])
    assert problems


def test_storage_audit_after_removal(sim):
    run_until(sim, "receive")
    stored = sim.pipeline.storage["Bern-city"]
    taken = stored.pop()
    assert sim.pipeline.audit_storage("Bern-city", "E1") == [taken]


def test_cast_rejects_unknown_choice(sim):
    run_until(sim, "deliver")
    with pytest.raises(ValueError):
        sim.pipeline.cast(sim.envelopes_of("E1")[0], "maybe")
