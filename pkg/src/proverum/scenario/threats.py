"""Threat-event injections and tampering of public storage.

Each injection plays the adversary against a running :class:`Simulation`,
then lets the honest parties react with the mechanisms they have. The outcome
records whether the attack was noticed and which mechanism dealt with it.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

from ..artifact_lifecycle import ADVERSARY, VOTER, EnvelopeStatus, VotingEnvelope
from ..electoral_register import BlacklistReason
from ..errors import PrematureDestruction, ProverumError, RegisterDigestMismatch, UnsupportedContext
from ..contracts import result_key
from ..ledger import Chaincode
from ..privdata import PrivateEntry
from ..public_env import PublicationKind
from ..records import CHOICES, ResultRecord, ScopeLevel, normalize_counts
from ..result_publication import OutOfBandCommand, authorize_destruction, process_destruction, submit_record
from .process import Election, Simulation

NO_MITIGATION = "no Mitigation"
AUDIT_TRAIL = "Immutable Audit Trail"
SIGNED_TX = "Cryptographically signed Tx"
ELIGIBILITY = "Eligibility Verifiability Mechanism"
ARTIFACT_VERIFICATION = "Artifact Verification Mechanism"
REISSUANCE = "Report, Blacklist and Re-Issuance"
ARTIFACT_VERIFIABILITY = "Artifact Verifiability Mechanism"
CONTRACT_AUDIT = "Smart Contract & Audit Trail"

MITIGATIONS = {
    "TE1": NO_MITIGATION, "TE2": AUDIT_TRAIL, "TE3": SIGNED_TX, "TE4": ELIGIBILITY,
    "TE5": ARTIFACT_VERIFICATION, "TE6": AUDIT_TRAIL, "TE7": REISSUANCE, "TE8": REISSUANCE,
    "TE9": AUDIT_TRAIL, "TE10": ARTIFACT_VERIFIABILITY, "TE11": AUDIT_TRAIL, "TE12": CONTRACT_AUDIT,
    "TE13": CONTRACT_AUDIT, "TE14": SIGNED_TX,
}


@dataclass(frozen=True)
class InjectionOutcome:
    threat: str
    detected: bool
    mitigation: str
    evidence: tuple[bytes, ...]
    detail: str

    def render(self) -> str:
        evidence = ",".join(t.hex()[:16] for t in self.evidence) or "-"
        return f"{self.threat}\t{'detected' if self.detected else 'undetected'}\t{self.mitigation}\t{evidence}\t{self.detail}"


def _alert(sim: Simulation, authority: str, kind: str, detail: str, channel_id: Optional[str] = None) -> bytes:
    channel_id = channel_id or sim.network.cantonal_channel(authority).channel_id
    return sim.network.transact(channel_id, authority, Chaincode.CM, "ve.alert",
                                {"kind": kind, "detail": detail}).tx_id


def _require(condition: bool, threat: str, message: str) -> None:
    if not condition:
        raise UnsupportedContext(f"{threat}: {message}")


def _between(election: Election, threat: str, after: Optional[str], before: Optional[str]) -> None:
    if after is not None:
        _require(election.stage_done(after), threat, f"needs stage {after} done")
    if before is not None:
        _require(not election.stage_done(before), threat, f"must happen before stage {before}")


def _muni(sim: Simulation, params: dict) -> str:
    muni = params.get("muni", sim.municipalities[0])
    if muni not in sim.municipalities:
        raise UnsupportedContext(f"unknown municipality {muni!r}")
    return muni


def _pick(envelopes: list[VotingEnvelope], threat: str, what: str, index: int = 0) -> VotingEnvelope:
    _require(len(envelopes) > index, threat, f"no {what}")
    return envelopes[index]


def _outcome(threat: str, detected: bool, evidence, detail: str) -> InjectionOutcome:
    return InjectionOutcome(threat, detected, MITIGATIONS[threat] if detected or threat == "TE1" else NO_MITIGATION,
                            tuple(evidence), detail)


# -- the fourteen threat events ------------------------------------------------

def te1(sim: Simulation, election: Election, params: dict) -> InjectionOutcome:
    """ESP suspends production. Nothing on the ledger can prevent it; the event is delayed."""
    _between(election, "TE1", "register", "manufacture")
    ticks = int(params.get("ticks", 3))
    sim.pipeline.halted = True
    produced = sim.pipeline.manufacture(sim.export_for(election.event_id, sim.municipalities[0]),
                                        election.event_id, sim.municipalities[0])
    sim.network.advance(ticks)
    sim.pipeline.halted = False
    election.production_delay += ticks
    return _outcome("TE1", False, (), f"production halted for {ticks} ticks, {len(produced)} envelopes made")


def te2(sim: Simulation, election: Election, params: dict) -> InjectionOutcome:
    """Citizen data rewritten on one peer; the committed digest exposes it."""
    _between(election, "TE2", None, "register")
    muni = _muni(sim, params)
    registry = sim.registries[muni]
    records = registry.records()
    _require(bool(records), "TE2", f"{muni} has no citizens")
    victim = records[0]
    peer = registry.collection.primary_peer(muni)
    key = f"cr/{victim.local_person_id}"
    entry = registry.collection.stores[peer][key]
    forged = replace(victim, nationality="XX" if victim.nationality == "CH" else "CH")
    registry.collection.stores[peer][key] = PrivateEntry(forged.to_bytes(), entry.digest)
    divergent = registry.audit()
    detected = (peer, key) in divergent and not registry.verify(victim.local_person_id)
    evidence = []
    if detected:
        evidence.append(_alert(sim, muni, "PrivateDataDivergence", key))
        registry.repair_from_peer(victim.local_person_id)
    sim.commit()
    repaired = registry.verify(victim.local_person_id)
    return _outcome("TE2", detected, evidence, f"{len(divergent)} divergent copies, repaired={repaired}")


def te3(sim: Simulation, election: Election, params: dict) -> InjectionOutcome:
    """Register data altered in transit to the printer."""
    _between(election, "TE3", "register", "manufacture")
    muni = _muni(sim, params)
    _require(muni not in election.manufactured, "TE3", f"{muni} already manufactured")
    clean = sim.export_for(election.event_id, muni)
    lines = clean.splitlines()
    _require(lines and not lines[0].startswith("LIST_DIGEST="), "TE3", "empty register")
    lines[0] = ("0" if lines[0][0] != "0" else "1") + lines[0][1:]
    tampered = "\n".join(lines) + "\n"
    evidence = []
    try:
        sim.manufacture_for(election, muni, tampered)
        detected = False
    except RegisterDigestMismatch as exc:
        detected = True
        evidence.append(_alert(sim, sim.pipeline.esp, "RegisterDigestMismatch", str(exc),
                               sim.network.external_channel().channel_id))
        sim.manufacture_for(election, muni, clean)
    sim.commit()
    register = sim.offices[muni].active_register(election.event_id)
    evidence.append(register.publish_tx)
    return _outcome("TE3", detected, evidence, f"{muni} printed from the chain-matching list")


def te4(sim: Simulation, election: Election, params: dict) -> InjectionOutcome:
    """A fabricated envelope with a commitment that no register contains."""
    _between(election, "TE4", "register", "receive")
    muni = _muni(sim, params)
    fake = sim.network.rng.randbytes("adversary/te4", 32)
    envelope = sim.pipeline.forge(fake, election.event_id, muni)
    envelope.choice = CHOICES[0]
    envelope.holder = muni
    decision = sim.pipeline.receive_and_validate(muni, envelope, election.event_id)
    sim.commit()
    detected = not decision.accepted and decision.reason == "NotInRegister"
    return _outcome("TE4", detected, [decision.tx_id], f"forged envelope {decision.decision} {decision.reason}")


def te5(sim: Simulation, election: Election, params: dict) -> InjectionOutcome:
    """Envelopes stolen at the printer before dispatch."""
    _between(election, "TE5", "manufacture", "dispatch")
    muni = _muni(sim, params)
    _require(muni not in election.dispatched, "TE5", f"{muni} already dispatched")
    count = int(params.get("count", 1))
    batch = [sim.pipeline.envelopes[s] for s in election.batches.get(muni, [])]
    _require(len(batch) >= count, "TE5", f"{muni} batch has fewer than {count} envelopes")
    for envelope in batch[:count]:
        envelope.holder = ADVERSARY
    old_version = sim.offices[muni].active_register(election.event_id).version
    report = sim.dispatch_for(election, muni)
    first = election.batch_reports[-2] if len(election.batch_reports) >= 2 else report
    detected = bool(first.missing_commitments)
    register = sim.offices[muni].active_register(election.event_id)
    evidence = [first.tx_id]
    if detected:
        evidence += [register.publish_tx, report.tx_id]
    return _outcome("TE5", detected, evidence,
                    f"{len(first.missing_commitments)} missing, register v{old_version}->v{register.version}, "
                    f"re-verified complete={report.complete}")


def _divergence_reissue(sim: Simulation, election: Election, threat: str, envelope: VotingEnvelope,
                        reason: BlacklistReason) -> InjectionOutcome:
    muni = envelope.municipality
    divergences = [d for d in sim.pipeline.audit_routes(muni) if d.serial == envelope.serial]
    detected = bool(divergences)
    evidence = []
    if detected:
        evidence.append(sim.pipeline.report_theft(muni, election.event_id, [envelope.commitment], "RouteDivergence"))
        sim.commit()
        owner = sim.offices[muni].owner_of(election.event_id, envelope.commitment)
        replacement, blacklist_tx, register = sim.single_reissue(election, muni, owner, reason)
        evidence += [blacklist_tx, register.publish_tx]
        replacement_note = f", replacement {replacement.serial} delivered"
        if election.stage_done("cast") and envelope.choice:
            sim.cast_envelope(election, replacement, envelope.choice)
            sim.commit()
    else:
        replacement_note = ""
    return _outcome(threat, detected, evidence, f"{envelope.serial} diverged from its logged route{replacement_note}")


def te6(sim: Simulation, election: Election, params: dict) -> InjectionOutcome:
    """An envelope diverted while in the postal network."""
    _between(election, "TE6", "dispatch", "deliver")
    muni = _muni(sim, params)
    envelope = _pick([e for e in sim.envelopes_of(election.event_id, muni)
                      if e.status is EnvelopeStatus.AT_POST and e.holder == sim.pipeline.post], "TE6",
                     "envelope at the post")
    envelope.holder = ADVERSARY
    return _divergence_reissue(sim, election, "TE6", envelope, BlacklistReason.REROUTE)


def _theft(sim: Simulation, election: Election, threat: str, envelope: VotingEnvelope,
           reason: BlacklistReason) -> InjectionOutcome:
    muni = envelope.municipality
    envelope.holder = ADVERSARY
    report_tx = sim.pipeline.report_theft(muni, election.event_id, [envelope.commitment], reason.value)
    sim.commit()
    owner = sim.offices[muni].owner_of(election.event_id, envelope.commitment)
    replacement, blacklist_tx, register = sim.single_reissue(election, muni, owner, reason)
    if election.stage_done("cast") and envelope.choice:
        sim.cast_envelope(election, replacement, envelope.choice)
    # the thief tries to vote with the stolen envelope
    envelope.status, envelope.holder, envelope.choice = EnvelopeStatus.CAST, muni, CHOICES[0]
    decision = sim.pipeline.receive_and_validate(muni, envelope, election.event_id)
    sim.commit()
    detected = not decision.accepted and decision.reason == "Blacklisted"
    return _outcome(threat, detected, [report_tx, blacklist_tx, register.publish_tx, decision.tx_id],
                    f"stolen {envelope.serial} {decision.decision} {decision.reason}, "
                    f"replacement {replacement.serial} delivered to {owner}")


def te7(sim: Simulation, election: Election, params: dict) -> InjectionOutcome:
    """Blank envelope stolen from the voter's letterbox."""
    _between(election, "TE7", "deliver", "cast")
    muni = _muni(sim, params)
    envelope = _pick([e for e in sim.envelopes_of(election.event_id, muni)
                      if e.status is EnvelopeStatus.DELIVERED and e.holder == VOTER], "TE7", "delivered envelope")
    return _theft(sim, election, "TE7", envelope, BlacklistReason.THEFT_VOTER_LETTERBOX)


def te8(sim: Simulation, election: Election, params: dict) -> InjectionOutcome:
    """Filled-in envelope stolen from the municipal letterbox."""
    _between(election, "TE8", "cast", "receive")
    muni = _muni(sim, params)
    envelope = _pick([e for e in sim.envelopes_of(election.event_id, muni)
                      if e.status is EnvelopeStatus.CAST and e.holder in (sim.pipeline.post, muni)], "TE8",
                     "cast envelope")
    election.ballots.pop(envelope.serial, None)
    return _theft(sim, election, "TE8", envelope, BlacklistReason.THEFT_MUNICIPAL_LETTERBOX)


def te9(sim: Simulation, election: Election, params: dict) -> InjectionOutcome:
    """A returned envelope diverted on its way back to the municipality."""
    _between(election, "TE9", "cast", "receive")
    muni = _muni(sim, params)
    envelope = _pick([e for e in sim.envelopes_of(election.event_id, muni)
                      if e.status is EnvelopeStatus.CAST and e.holder == sim.pipeline.post], "TE9",
                     "envelope returned by post")
    envelope.holder = ADVERSARY
    election.ballots.pop(envelope.serial, None)
    outcome = _divergence_reissue(sim, election, "TE9", envelope, BlacklistReason.REROUTE)
    if outcome.detected:
        # the diverted envelope resurfaces at the municipality and is refused
        envelope.holder = muni
        envelope.status = EnvelopeStatus.CAST
        decision = sim.pipeline.receive_and_validate(muni, envelope, election.event_id)
        sim.commit()
        outcome = replace(outcome, evidence=outcome.evidence + (decision.tx_id,),
                          detail=outcome.detail + f", resurfaced copy {decision.decision} {decision.reason}")
    return outcome


def te10(sim: Simulation, election: Election, params: dict) -> InjectionOutcome:
    """Counterfeit envelopes: one with an invented commitment, one copying a real one."""
    _between(election, "TE10", "cast", "receive")
    muni = _muni(sim, params)
    original = _pick([e for e in sim.envelopes_of(election.event_id, muni)
                      if e.status is EnvelopeStatus.CAST and e.holder in (sim.pipeline.post, muni)], "TE10",
                     "cast envelope to copy")
    invented = sim.pipeline.forge(sim.network.rng.randbytes("adversary/te10", 32), election.event_id, muni)
    copy = sim.pipeline.forge(original.commitment, election.event_id, muni)
    for forged in (invented, copy):
        forged.choice, forged.holder = CHOICES[0], muni
    decisions = [sim.pipeline.receive_and_validate(muni, e, election.event_id) for e in (original, invented, copy)]
    sim.commit()
    same_commitment = [d for d in decisions if d.commitment == original.commitment]
    accepted = [d for d in same_commitment if d.accepted]
    detected = (not decisions[1].accepted and decisions[1].reason == "NotInRegister"
                and len(accepted) == 1 and decisions[2].reason == "DuplicateCast")
    return _outcome("TE10", detected, [d.tx_id for d in decisions],
                    f"invented {decisions[1].reason}, copy {decisions[2].reason}, "
                    f"{len(accepted)} acceptance for the copied commitment")


def te11(sim: Simulation, election: Election, params: dict) -> InjectionOutcome:
    """Accepted envelopes removed from municipal storage before counting."""
    _between(election, "TE11", "receive", "count")
    muni = _muni(sim, params)
    count = int(params.get("count", 1))
    stored = sim.pipeline.storage.get(muni, [])
    _require(len(stored) >= count, "TE11", f"{muni} stores fewer than {count} envelopes")
    removed = stored[:count]
    del stored[:count]
    for serial in removed:
        sim.pipeline.envelopes[serial].holder = ADVERSARY
    missing = sim.pipeline.audit_storage(muni, election.event_id)
    detected = set(removed) <= set(missing)
    evidence = [_alert(sim, muni, "StorageShortfall", ",".join(missing))] if detected else []
    sim.commit()
    return _outcome("TE11", detected, evidence, f"{len(missing)} logged acceptances missing from storage")


def te12(sim: Simulation, election: Election, params: dict) -> InjectionOutcome:
    """A municipality reports an inflated tally; the cantonal check and recount correct it."""
    _between(election, "TE12", "count", "submit")
    muni = _muni(sim, params)
    extra = int(params.get("extra", 3))
    true_counts = dict(election.counts.get(muni, {}))
    inflated = dict(true_counts)
    inflated[CHOICES[0]] = inflated.get(CHOICES[0], 0) + extra
    election.tally_override[muni] = inflated
    sim.run_stage(election.event_id, "submit")
    sim.run_stage(election.event_id, "check")
    checks = election.checks.get(muni, [])
    first, last = (checks[0], checks[-1]) if checks else (None, None)
    detected = first is not None and not first.passed and "LogMismatch" in first.reasons
    evidence = [t for t in (first and first.check_tx, first and first.recount_tx, last and last.check_tx) if t]
    return _outcome("TE12", detected, evidence,
                    f"first check {','.join(first.reasons) if first else '-'}, after recount "
                    f"{'Pass' if last and last.passed else 'Fail'}")


def te13(sim: Simulation, election: Election, params: dict) -> InjectionOutcome:
    """A falsified cantonal aggregate, both signed with wrong sums and altered after signing."""
    _between(election, "TE13", "check", "aggregate")
    canton = params.get("canton", sim.network.cantons()[0])
    net = sim.network
    federal = net.federal_channel().channel_id
    cantonal = net.cantonal_channel(canton).channel_id
    children = []
    for child in sorted(a.name for a in net.directory.children(canton)):
        raw = net.channel(cantonal).query_state(Chaincode.RP, result_key(election.event_id, ScopeLevel.MUNICIPALITY, child), canton)
        _require(raw is not None, "TE13", f"{child} has no committed result")
        children.append(raw)
    records = [ResultRecord.from_bytes(r) for r in children]
    honest = {c: 0 for c in CHOICES}
    for r in records:
        for choice, n in r.counts:
            honest[choice] += n
    electorate = sum(r.electorate_size for r in records)
    key = net.directory.publication_key(canton)
    inflated = dict(honest)
    inflated[CHOICES[0]] += int(params.get("extra", 10))
    wrong_sum = ResultRecord(ScopeLevel.CANTON, canton, election.event_id, normalize_counts(inflated),
                             electorate, canton).signed(key)
    genuine = ResultRecord(ScopeLevel.CANTON, canton, election.event_id, normalize_counts(honest),
                           electorate, canton).signed(key)
    altered = replace(genuine, counts=normalize_counts(inflated))
    tx_sum = submit_record(net, federal, wrong_sum, "rp.aggregate", children)
    tx_sig = submit_record(net, federal, altered, "rp.aggregate", children)
    sim.commit()
    channel = net.channel(federal)
    entries = [channel.find_tx(t) for t in (tx_sum, tx_sig)]
    reasons = [e.reason for e in entries]
    detected = all(not e.valid for e in entries) and reasons == ["AggregateSumMismatch", "ResultSignatureInvalid"]
    return _outcome("TE13", detected, [tx_sum, tx_sig], f"flagged invalid: {','.join(reasons)}")


def te14(sim: Simulation, election: Election, params: dict) -> InjectionOutcome:
    """Forged destruction orders: out of band, and premature through the ledger."""
    _between(election, "TE14", "register", "destroy")
    sender = params.get("sender", sim.network.confederation())
    command = OutOfBandCommand(sender, election.event_id)
    ignored = []
    evidence = []
    for muni in sim.municipalities:
        outcome = process_destruction(sim.network, sim.pipeline, muni, election.event_id, command)
        if not outcome.acted:
            ignored.append(muni)
            evidence.append(_alert(sim, muni, "OutOfBandDestruction", f"from {sender}"))
    premature_refused = True
    if sim.federal_result(election.event_id) is None:
        try:
            authorize_destruction(sim.network, sim.network.confederation(), election.event_id)
            premature_refused = False
        except PrematureDestruction:
            premature_refused = True
    sim.commit()
    detected = len(ignored) == len(sim.municipalities) and premature_refused
    return _outcome("TE14", detected, evidence,
                    f"{len(ignored)} municipalities ignored the order, premature authorization refused="
                    f"{premature_refused}")


INJECTIONS: dict[str, Callable[[Simulation, Election, dict], InjectionOutcome]] = {
    "TE1": te1, "TE2": te2, "TE3": te3, "TE4": te4, "TE5": te5, "TE6": te6, "TE7": te7, "TE8": te8,
    "TE9": te9, "TE10": te10, "TE11": te11, "TE12": te12, "TE13": te13, "TE14": te14,
}


def inject(sim: Simulation, event_id: str, threat: str, params: Optional[dict] = None) -> InjectionOutcome:
    handler = INJECTIONS.get(threat.upper())
    if handler is None:
        raise ProverumError(f"unknown threat event {threat!r}")
    outcome = handler(sim, sim.election(event_id), dict(params or {}))
    sim.outcomes.append(outcome)
    return outcome


# -- public storage tampering -------------------------------------------------

def _forged_payload(payload: bytes) -> bytes:
    return bytes([payload[0] ^ 0x01]) + payload[1:] if payload else b"\x00"


def tamper(sim: Simulation, verb: str, params: Optional[dict] = None) -> str:
    params = dict(params or {})
    public = sim.public
    if verb == "poa-block":
        _require(public.poa is not None and bool(public.poa.blocks), "tamper", "no PoA blocks")
        sim.flush_public()
        height = int(params.get("height", len(public.poa.blocks) // 2))
        height = min(height, len(public.poa.blocks) - 1)
        record = public.poa.blocks[height].records[0]
        public.tamper_poa_record(height, 0, _forged_payload(record.payload))
        return f"PoA block {height} record 0 rewritten"
    if verb == "sink-record":
        _require(public.sink is not None and bool(public.sink.records), "tamper", "no sink records")
        index = int(params.get("index", 0))
        public.tamper_sink_record(index, _forged_payload(public.sink.records[index].payload))
        return f"sink record {index} rewritten"
    if verb == "register-export":
        # rewrites a published register export on every enabled option, leaving signatures alone
        changed = 0
        for option, records in ((1, public.sink.records if public.sink else None),
                                (3, public.api.records if public.api else None)):
            if records is None:
                continue
            for i, r in enumerate(records):
                if r.kind is PublicationKind.REGISTER_EXPORT:
                    records[i] = replace(r, payload=_forged_payload(r.payload))
                    changed += 1
                    break
        if public.poa is not None:
            sim.flush_public()
            for h, block in enumerate(public.poa.blocks):
                index = next((i for i, r in enumerate(block.records) if r.kind is PublicationKind.REGISTER_EXPORT), None)
                if index is not None:
                    public.tamper_poa_record(h, index, _forged_payload(block.records[index].payload))
                    changed += 1
                    break
        _require(changed > 0, "tamper", "no published register export")
        return f"register export rewritten on {changed} options"
    if verb == "stale-api":
        _require(public.api is not None, "tamper", "read API not enabled")
        public.api.freeze()
        return "read API frozen"
    raise ProverumError(f"unknown tamper verb {verb!r}")

