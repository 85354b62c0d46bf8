"""The physical voting-envelope pipeline from manufacture to counting.

Envelopes are simulated objects carrying a voter commitment. Every legitimate
lifecycle move is logged as an external-channel transaction, so the logged
route can be compared with where an envelope actually is.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Iterable, Mapping, Optional, Sequence

from .contracts import envelope_key, reception_log_prefix
from .electoral_register import RegisterOffice, onchain_blacklisted, onchain_register, parse_register_export
from .encoding import decode
from .errors import RegisterDigestMismatch, UnknownCommitment
from .ledger import Chaincode
from .merkle import list_digest, merkle_root
from .records import CHOICES
from .pki import Role

if TYPE_CHECKING:
    from .network import Network


class EnvelopeStatus(str, Enum):
    MANUFACTURED = "Manufactured"
    AT_POST = "AtPost"
    DELIVERED = "Delivered"
    CAST = "Cast"
    RECEIVED = "ReceivedByMunicipality"
    COUNTED = "Counted"
    BLACKLISTED = "Blacklisted"
    REJECTED = "Rejected"


IN_TRANSIT = (EnvelopeStatus.MANUFACTURED, EnvelopeStatus.AT_POST, EnvelopeStatus.DELIVERED,
              EnvelopeStatus.CAST, EnvelopeStatus.RECEIVED)

VOTER = "Voter"
ADVERSARY = "Adversary"


@dataclass
class VotingEnvelope:
    serial: str
    commitment: bytes
    event_id: str
    municipality: str
    status: EnvelopeStatus = EnvelopeStatus.MANUFACTURED
    holder: str = ""
    choice: Optional[str] = None
    manufactured: bool = True


@dataclass(frozen=True)
class BatchReport:
    municipality: str
    complete: bool
    missing_commitments: tuple[bytes, ...]
    foreign_commitments: tuple[bytes, ...]
    tx_id: Optional[bytes] = None


@dataclass(frozen=True)
class ReceptionDecision:
    serial: str
    commitment: bytes
    accepted: bool
    reason: str = ""
    tx_id: Optional[bytes] = None

    @property
    def decision(self) -> str:
        return "Accepted" if self.accepted else "Rejected"

    def render(self) -> str:
        return f"{self.serial}\t{self.commitment.hex()}\t{self.decision}\t{self.reason}"


@dataclass(frozen=True)
class RouteDivergence:
    serial: str
    logged_holder: str
    actual_holder: str
    logged_status: str
    actual_status: str


@dataclass
class _Reception:
    decisions: list[ReceptionDecision] = field(default_factory=list)
    accepted: set[bytes] = field(default_factory=set)


class ArtifactPipeline:
    def __init__(self, network: "Network", offices: Mapping[str, RegisterOffice],
                 esp: Optional[str] = None, post: Optional[str] = None):
        self.network = network
        self.offices = offices
        self.esp = esp or network.one_of(Role.ESP)
        self.post = post or network.one_of(Role.SWISS_POST)
        self.envelopes: dict[str, VotingEnvelope] = {}
        self.receptions: dict[tuple[str, str], _Reception] = {}
        self.storage: dict[str, list[str]] = {}
        self._serials = 0
        self.halted = False

    @property
    def channel_id(self) -> str:
        return self.network.external_channel().channel_id

    def _log(self, submitter: str, operation: str, args) -> bytes:
        return self.network.transact(self.channel_id, submitter, Chaincode.CM, operation, args).tx_id

    def _move(self, envelope: VotingEnvelope, status: EnvelopeStatus, holder: str, submitter: str) -> None:
        envelope.status, envelope.holder = status, holder
        if envelope.manufactured:
            self._log(submitter, "ve.status", {"serial": envelope.serial, "status": status, "holder": holder})

    def _next_serial(self, event_id: str, municipality: str) -> str:
        self._serials += 1
        return f"VE-{event_id}-{municipality}-{self._serials:05d}"

    # -- ESP -------------------------------------------------------------

    def _checked_export(self, export_text: str, event_id: str, municipality: str):
        export = parse_register_export(export_text)
        onchain = onchain_register(self.network, event_id, municipality, self.esp)
        if onchain is None:
            raise RegisterDigestMismatch(f"no committed register for {municipality}/{event_id}")
        _, digest, root, _ = onchain
        if list_digest(export.commitments) != digest or merkle_root(export.commitments) != root:
            raise RegisterDigestMismatch(f"{municipality}/{event_id}: received list does not match the chain")
        return export

    def manufacture(self, export_text: str, event_id: str, municipality: str) -> list[VotingEnvelope]:
        if self.halted:
            return []
        export = self._checked_export(export_text, event_id, municipality)
        return [self._make(c, event_id, municipality) for c in export.commitments
                if not onchain_blacklisted(self.network, event_id, c, self.esp)]

    def manufacture_replacement(self, export_text: str, event_id: str, municipality: str,
                                commitment: bytes) -> VotingEnvelope:
        export = self._checked_export(export_text, event_id, municipality)
        if commitment not in export.commitments:
            raise UnknownCommitment(commitment.hex()[:16])
        return self._make(commitment, event_id, municipality)

    def _make(self, commitment: bytes, event_id: str, municipality: str) -> VotingEnvelope:
        envelope = VotingEnvelope(self._next_serial(event_id, municipality), commitment, event_id,
                                  municipality, EnvelopeStatus.MANUFACTURED, self.esp)
        self._log(self.esp, "ve.manufacture", {"serial": envelope.serial, "commitment": commitment,
                                               "event": event_id, "municipality": municipality})
        self.envelopes[envelope.serial] = envelope
        return envelope

    def forge(self, commitment: bytes, event_id: str, municipality: str) -> VotingEnvelope:
        """An envelope that never went through the ESP, held by the adversary."""
        envelope = VotingEnvelope(self._next_serial(event_id, municipality) + "-F", commitment, event_id,
                                  municipality, EnvelopeStatus.CAST, ADVERSARY, manufactured=False)
        self.envelopes[envelope.serial] = envelope
        return envelope

    # -- Swiss Post ------------------------------------------------------

    def hand_to_post(self, envelopes: Iterable[VotingEnvelope]) -> None:
        for e in envelopes:
            self._move(e, EnvelopeStatus.AT_POST, self.post, self.post)

    def post_verify_batch(self, envelopes: Sequence[VotingEnvelope], event_id: str,
                          municipality: str) -> BatchReport:
        onchain = onchain_register(self.network, event_id, municipality, self.post)
        listed = onchain[3] if onchain else ()
        expected = Counter(c for c in listed if not onchain_blacklisted(self.network, event_id, c, self.post))
        received = Counter(e.commitment for e in envelopes)
        missing = tuple(sorted((expected - received).elements()))
        foreign = tuple(sorted((received - expected).elements()))
        complete = not missing and not foreign
        tx_id = self._log(self.post, "ve.batch", {
            "event": event_id, "municipality": municipality, "version": onchain[0] if onchain else 0,
            "complete": complete, "missing": missing, "foreign": foreign,
        })
        if missing:
            self._log(self.post, "ve.report", {"event": event_id, "municipality": municipality,
                                               "kind": "MissingFromBatch", "commitments": missing})
        return BatchReport(municipality, complete, missing, foreign, tx_id)

    def deliver(self, envelope: VotingEnvelope) -> None:
        self._move(envelope, EnvelopeStatus.DELIVERED, VOTER, self.post)

    def cast(self, envelope: VotingEnvelope, choice: str, via: str = "post") -> None:
        """Voter fills in the ballot and returns it by post or by hand to the municipal letterbox."""
        if choice not in CHOICES:
            raise ValueError(f"unknown choice {choice!r}")
        envelope.choice = choice
        if via == "post":
            self._move(envelope, EnvelopeStatus.CAST, self.post, self.post)
        elif via == "manual":
            envelope.status, envelope.holder = EnvelopeStatus.CAST, envelope.municipality
        else:
            raise ValueError(f"unknown return path {via!r}")

    # -- municipality ----------------------------------------------------

    def report_theft(self, municipality: str, event_id: str, commitments: Sequence[bytes], kind: str) -> bytes:
        return self._log(municipality, "ve.report", {"event": event_id, "municipality": municipality,
                                                     "kind": kind, "commitments": tuple(commitments)})

    def mark_blacklisted(self, municipality: str, event_id: str, commitments: Iterable[bytes]) -> list[str]:
        banned = set(commitments)
        marked = []
        for e in self.envelopes.values():
            if (e.municipality == municipality and e.event_id == event_id and e.commitment in banned
                    and e.status in (EnvelopeStatus.MANUFACTURED, EnvelopeStatus.AT_POST,
                                     EnvelopeStatus.DELIVERED, EnvelopeStatus.CAST)):
                self._move(e, EnvelopeStatus.BLACKLISTED, e.holder, municipality)
                marked.append(e.serial)
        return marked

    def _reception(self, event_id: str, municipality: str) -> _Reception:
        return self.receptions.setdefault((event_id, municipality), _Reception())

    def receive_and_validate(self, municipality: str, envelope: VotingEnvelope,
                             event_id: Optional[str] = None) -> ReceptionDecision:
        event_id = event_id or envelope.event_id
        office = self.offices[municipality]
        state = self._reception(event_id, municipality)
        c = envelope.commitment
        if envelope.event_id != event_id:
            reason = "WrongEvent"
        elif office.is_blacklisted(event_id, c):
            reason = "Blacklisted"
        elif c not in office.valid_commitments(event_id):
            reason = "NotInRegister"
        elif c in state.accepted:
            reason = "DuplicateCast"
        else:
            reason = ""
        accepted = reason == ""
        tx_id = self._log(municipality, "ve.receive", {
            "event": event_id, "municipality": municipality, "serial": envelope.serial,
            "commitment": c, "decision": "Accepted" if accepted else "Rejected", "reason": reason,
        })
        decision = ReceptionDecision(envelope.serial, c, accepted, reason, tx_id)
        state.decisions.append(decision)
        if accepted:
            state.accepted.add(c)
            envelope.status, envelope.holder = EnvelopeStatus.RECEIVED, municipality
            self.storage.setdefault(municipality, []).append(envelope.serial)
        else:
            envelope.status, envelope.holder = EnvelopeStatus.REJECTED, municipality
        return decision

    def decisions(self, event_id: str, municipality: str) -> list[ReceptionDecision]:
        return list(self._reception(event_id, municipality).decisions)

    def reception_log(self, event_id: str, municipality: str) -> str:
        return "".join(d.render() + "\n" for d in self.decisions(event_id, municipality))

    def count_received(self, municipality: str, event_id: str,
                       vote_choices: Optional[Mapping[str, str]] = None) -> dict[str, int]:
        """Tally the ballots of accepted envelopes still in municipal storage, then log them Counted."""
        counts = {c: 0 for c in CHOICES}
        for serial in self.storage.get(municipality, []):
            envelope = self.envelopes[serial]
            if envelope.event_id != event_id or envelope.status is not EnvelopeStatus.RECEIVED:
                continue
            choice = (vote_choices or {}).get(serial, envelope.choice)
            counts[choice] += 1
            self._move(envelope, EnvelopeStatus.COUNTED, municipality, municipality)
        return counts

    def destroy(self, municipality: str) -> int:
        stored = self.storage.pop(municipality, [])
        return len(stored)

    # -- audits ----------------------------------------------------------

    def logged_envelope(self, serial: str, caller: str) -> Optional[tuple[str, str]]:
        raw = self.network.external_channel().query_state(Chaincode.CM, envelope_key(serial), caller)
        if raw is None:
            return None
        status, holder, *_ = decode(raw)
        return status, holder

    def audit_routes(self, caller: str) -> list[RouteDivergence]:
        """Manufactured envelopes whose actual holder or status disagrees with the logged route."""
        divergent = []
        for serial in sorted(self.envelopes):
            e = self.envelopes[serial]
            if not e.manufactured:
                continue
            logged = self.logged_envelope(serial, caller)
            if logged is None:
                continue
            status, holder = logged
            if e.status is EnvelopeStatus.CAST and e.holder == e.municipality and status == "Delivered":
                continue  # manual return, legitimately unlogged
            if (status, holder) != (e.status.value, e.holder):
                divergent.append(RouteDivergence(serial, holder, e.holder, status, e.status.value))
        return divergent

    def audit_storage(self, municipality: str, event_id: str) -> list[str]:
        """Accepted serials on the chain's reception log that are no longer in storage."""
        logged = self.network.external_channel().scan_state(
            Chaincode.CM, reception_log_prefix(event_id, municipality), municipality)
        stored = set(self.storage.get(municipality, []))
        missing = []
        for _, raw in logged:
            serial, _, decision, _ = decode(raw)
            if decision == "Accepted" and serial not in stored:
                missing.append(serial)
        return missing

    def status_census(self, municipality: Optional[str] = None) -> dict[str, int]:
        census = Counter(e.status.value for e in self.envelopes.values()
                         if e.manufactured and (municipality is None or e.municipality == municipality))
        return dict(sorted(census.items()))


def read_reception_log(scan: Iterable[tuple[str, bytes]]) -> list[tuple[str, str, bytes, str, str]]:
    """``(municipality, serial, commitment, decision, reason)`` rows from a reception-log scan."""
    rows = []
    for key, raw in scan:
        municipality = key.split("/")[2]
        serial, commitment, decision, reason = decode(raw)
        rows.append((municipality, serial, commitment, decision, reason))
    return rows


def check_eligibility_verifiability(register_exports: Iterable[tuple[str, str]],
                                    reception_rows: Iterable[tuple[str, str, bytes, str, str]],
                                    blacklisted: Iterable[bytes] = ()) -> list[str]:
    """Problems found from public data alone: ``(municipality, export)`` pairs plus the reception log.

    Each accepted reception must map to exactly one commitment of its
    municipality's register, must not be blacklisted, and no commitment may be
    accepted twice.
    """
    problems = []
    owners: dict[bytes, set[str]] = {}
    for municipality, text in register_exports:
        export = parse_register_export(text)
        if not export.recomputes():
            problems.append(f"{municipality}: register export does not recompute")
        for c in export.commitments:
            owners.setdefault(c, set()).add(municipality)
    banned = set(blacklisted)
    seen: Counter = Counter()
    for municipality, serial, commitment, decision, _ in reception_rows:
        if decision != "Accepted":
            continue
        holders = owners.get(commitment, set())
        if holders != {municipality}:
            problems.append(f"{serial}: accepted commitment maps to {sorted(holders) or 'no register'}")
        if commitment in banned:
            problems.append(f"{serial}: accepted a blacklisted commitment")
        seen[commitment] += 1
    problems += [f"{c.hex()[:16]} accepted {n} times" for c, n in sorted(seen.items()) if n > 1]
    return problems
