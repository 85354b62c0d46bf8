"""Whole-system invariants checked after a scenario has run."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from ..artifact_lifecycle import check_eligibility_verifiability, read_reception_log
from ..citizen_registry import single_holder_violations
from ..ledger import Chaincode
from ..pki import Role, publication_key_label, verify
from ..public_env import PublicationKind
from ..records import ResultRecord, ScopeLevel
from ..result_publication import committed_results, recount_from_logs
from .process import Simulation


@dataclass(frozen=True)
class SweepResult:
    name: str
    ok: bool
    evidence: tuple[str, ...] = ()

    def render(self) -> str:
        return f"sweep\t{self.name}\t{'pass' if self.ok else 'fail'}\t{'; '.join(self.evidence)}"


def _result(name: str, problems) -> SweepResult:
    problems = tuple(problems)
    return SweepResult(name, not problems, problems[:5])


def reception_rows(sim: Simulation, event_id: str):
    channel = sim.network.external_channel()
    return read_reception_log(channel.scan_state(Chaincode.CM, f"rxlog/{event_id}/", sim.network.confederation()))


def check_chains(sim: Simulation) -> SweepResult:
    problems = []
    for cid, channel in sorted(sim.network.channels.items()):
        report = channel.verify_chain()
        if not report.ok:
            problems.append(f"{cid}: {report.detail}")
    return _result("chains", problems)


def check_replay(sim: Simulation) -> SweepResult:
    return _result("replay", [cid for cid, c in sorted(sim.network.channels.items()) if not c.replay_sound()])


def check_non_leakage(sim: Simulation) -> SweepResult:
    sim.flush_public()
    surfaces = {"orderer": sim.network.orderer_visible_bytes(), "public": sim.public.snapshot().all_bytes()}
    problems = []
    for name, data in surfaces.items():
        leaked = sorted(v for v in sim.network.pii if v.encode("utf-8") in data)
        if leaked:
            problems.append(f"{name} bytes contain {len(leaked)} personal values")
    return _result("non-leakage", problems)


def check_single_holder(sim: Simulation) -> SweepResult:
    return _result("single-holder", single_holder_violations(sim.registries.values(), sim.live_identities))


def check_one_active_commitment(sim: Simulation, event_id: str) -> SweepResult:
    problems = []
    for muni, office in sorted(sim.offices.items()):
        problems += [f"{muni}: {p}" for p in office.one_active_commitment_violations(event_id)]
    return _result("one-active-commitment", problems)


def check_eligibility(sim: Simulation, event_id: str) -> SweepResult:
    exports = []
    blacklisted = []
    for muni, office in sorted(sim.offices.items()):
        exports += [(muni, r.export()) for r in office.registers(event_id)]
        blacklisted += [e.commitment for e in office.blacklist_entries(event_id)]
    return _result("eligibility", check_eligibility_verifiability(exports, reception_rows(sim, event_id), blacklisted))


def check_envelope_conservation(sim: Simulation, event_id: str) -> SweepResult:
    """Every manufactured envelope was logged exactly once and has a logged status."""
    channel = sim.network.external_channel()
    manufactured = [e.tx.arg("serial") for _, e in channel.entries("ve.manufacture", valid=True)
                    if e.tx.arg("event") == event_id]
    problems = [f"{s} manufactured {n} times" for s, n in Counter(manufactured).items() if n > 1]
    caller = sim.network.confederation()
    unlogged = [s for s in manufactured if sim.pipeline.logged_envelope(s, caller) is None]
    problems += [f"{s} has no logged status" for s in unlogged]
    made = sum(1 for e in sim.pipeline.envelopes.values() if e.manufactured and e.event_id == event_id)
    if made != len(set(manufactured)):
        problems.append(f"{made} envelopes made, {len(set(manufactured))} logged")
    return _result("envelope-conservation", problems)


def _tally(records) -> dict[str, int]:
    acc: dict[str, int] = {}
    for r in records:
        for c, n in r.counts:
            acc[c] = acc.get(c, 0) + n
    return acc


def check_result_conservation(sim: Simulation, event_id: str) -> SweepResult:
    results = [r for r, _ in committed_results(sim.network, event_id)]
    federal = [r for r in results if r.level is ScopeLevel.FEDERAL]
    if not federal:
        return SweepResult("result-conservation", True, ("no federal result",))
    municipal = [r for r in results if r.level is ScopeLevel.MUNICIPALITY]
    cantonal = [r for r in results if r.level is ScopeLevel.CANTON]
    problems = []
    if _tally(municipal) != federal[-1].counts_dict():
        problems.append("federal counts differ from the municipal sum")
    if _tally(cantonal) != federal[-1].counts_dict():
        problems.append("federal counts differ from the cantonal sum")
    return _result("result-conservation", problems)


def federal_matches_recount(sim: Simulation, event_id: str):
    """``None`` without a federal result, else whether it equals an independent recount."""
    federal = sim.federal_result(event_id)
    if federal is None:
        return None
    ballots = {s: e.choice for s, e in sim.pipeline.envelopes.items() if e.choice}
    return recount_from_logs(reception_rows(sim, event_id), ballots) == federal.counts_dict()


def check_federal_recount(sim: Simulation, event_id: str) -> SweepResult:
    matches = federal_matches_recount(sim, event_id)
    if matches is None:
        return SweepResult("federal-vs-recount", True, ("no federal result",))
    return _result("federal-vs-recount", [] if matches else ["federal result differs from the recount"])


def check_rp_isolation(sim: Simulation) -> SweepResult:
    outsiders = {a.name for a in sim.network.directory.authorities.values()
                 if a.role in (Role.ESP, Role.SWISS_POST)}
    problems = []
    for cid, channel in sorted(sim.network.channels.items()):
        if not outsiders & set(channel.members):
            continue
        n = sum(1 for _, e in channel.entries() if e.tx.chaincode is Chaincode.RP)
        if n or Chaincode.RP in channel.chaincodes:
            problems.append(f"{cid} carries results ({n} transactions)")
    return _result("rp-isolation", problems)


def check_result_signatures(sim: Simulation) -> SweepResult:
    certs = sim.network.directory.bundle()
    problems = []
    for cid, channel in sorted(sim.network.channels.items()):
        for _, e in channel.entries(valid=True):
            if e.tx.operation in ("rp.submit", "rp.aggregate"):
                record = ResultRecord.from_bytes(e.tx.arg("record"))
                cert = certs.certificate(publication_key_label(record.submitter))
                if not verify(cert, record.payload(), record.signature):
                    problems.append(f"{cid}: {record.scope} signature does not verify")
    return _result("result-signatures", problems)


def check_audit_completeness(sim: Simulation) -> SweepResult:
    logged = sum(1 for c in sim.network.channels.values() for _, e in c.entries(valid=True)
                 if e.tx.operation.startswith("cr."))
    calls = sum(r.calls for r in sim.registries.values())
    return _result("audit-completeness", [] if logged >= calls else [f"{logged} digests for {calls} registry calls"])


def check_publication_kinds(sim: Simulation, event_id: str) -> SweepResult:
    sim.flush_public()
    snapshot = sim.public.snapshot()
    wanted = {PublicationKind.REGISTER_DIGEST, PublicationKind.MERKLE_ROOT}
    if sim.election(event_id).stage_done("submit"):
        wanted.add(PublicationKind.PRELIMINARY_RESULT)
    if sim.federal_result(event_id) is not None:
        wanted.add(PublicationKind.FEDERAL_RESULT)
    problems = []
    for option in snapshot.options:
        have = {r.kind for r in snapshot.records_for(option) if r.event_id == event_id}
        missing = sorted(k.value for k in wanted - have)
        if missing:
            problems.append(f"option {option} lacks {','.join(missing)}")
    return _result("publication-kinds", problems)


def sweep(sim: Simulation) -> list[SweepResult]:
    results = [check_chains(sim), check_replay(sim), check_non_leakage(sim), check_single_holder(sim),
               check_rp_isolation(sim), check_result_signatures(sim), check_audit_completeness(sim)]
    for event_id in sorted(sim.elections):
        per_event = [check_one_active_commitment(sim, event_id), check_eligibility(sim, event_id),
                     check_envelope_conservation(sim, event_id), check_result_conservation(sim, event_id),
                     check_federal_recount(sim, event_id), check_publication_kinds(sim, event_id)]
        if len(sim.elections) > 1:
            per_event = [SweepResult(f"{r.name}[{event_id}]", r.ok, r.evidence) for r in per_event]
        results += per_event
    return results
