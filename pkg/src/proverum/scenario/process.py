"""The deterministic election process on top of a topology.

A :class:`Simulation` owns the private environment, every municipality's
registry and election office, the envelope pipeline and the public
environment. Each stage of a voting event ends with a block cut on every
channel with pending transactions, then publishes what the stage produced.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from ..artifact_lifecycle import ArtifactPipeline, EnvelopeStatus, VotingEnvelope, VOTER
from ..citizen_registry import CitizenRecord, CitizenRegistry, RelocationReceipt, relocate
from ..electoral_register import ALL, BlacklistReason, ElectoralRegister, RegisterOffice
from ..errors import (
    ChildFailedPlausibility,
    GatekeeperRejection,
    MissingChildResult,
    PrematureDestruction,
    ProverumError,
    RegisterDigestMismatch,
)
from ..network import Network
from ..pki import Role
from ..public_env import (
    Gatekeeper,
    PublicationRecord,
    PublicEnvironment,
    blacklist_record,
    reception_log_record,
    register_records,
    result_record,
)
from ..records import CHOICES, ResultRecord
from ..result_publication import (
    DestructionOutcome,
    PlausibilityResult,
    aggregate,
    authorize_destruction,
    plausibility_check,
    process_destruction,
    submit_municipal_result,
)
from .citizens import generate_citizens
from .topology import TopologyConfig, build_topology, default_config

STAGES = ("register", "manufacture", "dispatch", "deliver", "cast", "receive", "count", "submit", "check",
          "aggregate", "destroy")


@dataclass
class Election:
    event_id: str
    reference_date: dt.date
    done: list[str] = field(default_factory=list)
    batches: dict[str, list[str]] = field(default_factory=dict)
    manufactured: set[str] = field(default_factory=set)
    dispatched: set[str] = field(default_factory=set)
    batch_reports: list = field(default_factory=list)
    ballots: dict[str, str] = field(default_factory=dict)
    counts: dict[str, dict[str, int]] = field(default_factory=dict)
    tally_override: dict[str, dict[str, int]] = field(default_factory=dict)
    submissions: dict[str, bytes] = field(default_factory=dict)
    checks: dict[str, list[PlausibilityResult]] = field(default_factory=dict)
    aggregates: dict[str, tuple[ResultRecord, bytes]] = field(default_factory=dict)
    blocked: dict[str, str] = field(default_factory=dict)
    destruction: dict[str, DestructionOutcome] = field(default_factory=dict)
    production_delay: int = 0

    def stage_done(self, stage: str) -> bool:
        return stage in self.done

    def next_stage(self) -> Optional[str]:
        remaining = [s for s in STAGES if s not in self.done]
        return remaining[0] if remaining else None


class Simulation:
    def __init__(self, config: Optional[TopologyConfig] = None, seed: int = 0,
                 public_options: Optional[Iterable[int]] = None, today: dt.date = dt.date(2020, 9, 27)):
        self.config = config or default_config()
        self.seed = seed
        self.network: Network = build_topology(self.config, seed, today)
        net = self.network
        self.registries = {m: CitizenRegistry(net, m) for m in net.municipalities()}
        self.offices = {m: RegisterOffice(net, self.registries[m]) for m in net.municipalities()}
        self.pipeline = ArtifactPipeline(net, self.offices)
        producers = self.config.poa_producers or tuple(a.name for a in net.directory.of_role(Role.CANTON))
        options = tuple(public_options) if public_options else self.config.public_env
        self.public = PublicEnvironment(
            options, net.directory.bundle(), Gatekeeper(lambda: net.pii),
            {p: net.directory.publication_key(p) for p in producers}, net.external_channel(),
        )
        net.commit_hooks.append(self.public.tick)
        self.elections: dict[str, Election] = {}
        self.live_identities: set[bytes] = set()
        self.relocations: list[RelocationReceipt] = []
        self.publication_errors: list[str] = []
        self.outcomes: list = []
        self.log: list[str] = []

    # -- plumbing -------------------------------------------------------

    def commit(self) -> None:
        self.network.commit()

    def note(self, line: str) -> None:
        self.log.append(line)

    def publish(self, records: Iterable[PublicationRecord]) -> None:
        for record in records:
            try:
                self.public.publish(record)
            except (GatekeeperRejection, ProverumError) as exc:
                self.publication_errors.append(f"{record.kind.value} {record.scope}: {exc}")

    def tx_valid(self, channel_id: str, tx_id: bytes) -> bool:
        entry = self.network.channel(channel_id).find_tx(tx_id)
        return entry is not None and entry.valid

    def flush_public(self) -> None:
        while self.public.poa and self.public.poa.pending:
            self.public.tick()

    def election(self, event_id: str) -> Election:
        try:
            return self.elections[event_id]
        except KeyError:
            raise ProverumError(f"unknown event {event_id!r}") from None

    @property
    def municipalities(self) -> list[str]:
        return self.network.municipalities()

    def envelopes_of(self, event_id: str, municipality: Optional[str] = None) -> list[VotingEnvelope]:
        return [e for s, e in sorted(self.pipeline.envelopes.items())
                if e.event_id == event_id and (municipality is None or e.municipality == municipality)]

    # -- citizen registries ---------------------------------------------

    def load_citizens(self, records: Sequence[CitizenRecord]) -> None:
        for r in records:
            self.registries[r.residence_municipality].create_citizen(r.residence_municipality, r)
            self.live_identities.add(r.identity())
        self.commit()

    def generate_citizens(self, per_municipality: int) -> list[CitizenRecord]:
        records = generate_citizens(self.network.rng.stream("citizens"), self.municipalities,
                                    per_municipality, self.network.today)
        self.load_citizens(records)
        return records

    def relocate(self, source: str, target: str, local_id: str) -> RelocationReceipt:
        receipt = relocate(self.network, self.registries, source, target, local_id)
        self.relocations.append(receipt)
        self.commit()
        return receipt

    def restrict(self, municipality: str, local_id: str, restricted: bool) -> None:
        self.registries[municipality].set_voting_restriction(municipality, local_id, restricted)
        self.commit()

    # -- stages -----------------------------------------------------------

    def open_event(self, event_id: str, reference_date: Optional[dt.date] = None) -> Election:
        if event_id in self.elections:
            raise ProverumError(f"event {event_id!r} already open")
        election = Election(event_id, reference_date or self.network.today)
        self.elections[event_id] = election
        return election

    def run_stage(self, event_id: str, stage: str, **params) -> None:
        election = self.election(event_id)
        if stage not in STAGES:
            raise ProverumError(f"unknown stage {stage!r}")
        if election.next_stage() != stage:
            raise ProverumError(f"stage {stage} out of order: next is {election.next_stage()}")
        getattr(self, f"_stage_{stage}")(election, **params)
        election.done.append(stage)

    def run_remaining(self, event_id: str, until: Optional[str] = None) -> None:
        election = self.election(event_id)
        while election.next_stage() is not None:
            stage = election.next_stage()
            self.run_stage(event_id, stage)
            if stage == until:
                break

    def _stage_register(self, election: Election) -> None:
        registers = [o.generate_register(election.event_id, election.reference_date)
                     for _, o in sorted(self.offices.items())]
        self.commit()
        for r in registers:
            self.publish(register_records(self.network, r))

    def export_for(self, event_id: str, municipality: str) -> str:
        """The register data the municipality sends to the printer."""
        return self.offices[municipality].active_register(event_id).export()

    def manufacture_for(self, election: Election, municipality: str, export_text: Optional[str] = None) -> list[VotingEnvelope]:
        text = export_text if export_text is not None else self.export_for(election.event_id, municipality)
        envelopes = self.pipeline.manufacture(text, election.event_id, municipality)
        election.batches[municipality] = [e.serial for e in envelopes]
        election.manufactured.add(municipality)
        return envelopes

    def _stage_manufacture(self, election: Election) -> None:
        for m in self.municipalities:
            if m not in election.manufactured:
                try:
                    self.manufacture_for(election, m)
                except RegisterDigestMismatch as exc:
                    self.note(f"manufacture aborted for {m}: {exc}")
        self.commit()

    def dispatch_for(self, election: Election, municipality: str):
        batch = [self.pipeline.envelopes[s] for s in election.batches.get(municipality, [])]
        handed = [e for e in batch if e.status is EnvelopeStatus.MANUFACTURED and e.holder == self.pipeline.esp]
        self.pipeline.hand_to_post(handed)
        self.commit()
        report = self.pipeline.post_verify_batch(handed, election.event_id, municipality)
        self.commit()
        election.batch_reports.append(report)
        if report.missing_commitments:
            report = self.bulk_reissue(election, municipality, BlacklistReason.THEFT_BEFORE_DISPATCH)
        election.dispatched.add(municipality)
        return report

    def bulk_reissue(self, election: Election, municipality: str, reason: BlacklistReason):
        office = self.offices[municipality]
        event = election.event_id
        old = office.active_register(event)
        register = office.reissue(event, ALL, reason, election.reference_date)
        self.commit()
        self.pipeline.mark_blacklisted(municipality, event, old.commitments)
        entries = [e for e in office.blacklist_entries(event) if e.commitment in set(old.commitments)]
        self.publish(register_records(self.network, register))
        if entries:
            self.publish([blacklist_record(self.network, municipality, event, [e.commitment for e in entries],
                                           entries[-1].tx_id)])
        self.manufacture_for(election, municipality)
        self.commit()
        batch = [self.pipeline.envelopes[s] for s in election.batches[municipality]]
        self.pipeline.hand_to_post(batch)
        self.commit()
        report = self.pipeline.post_verify_batch(batch, event, municipality)
        self.commit()
        election.batch_reports.append(report)
        return report

    def single_reissue(self, election: Election, municipality: str, local_id: str,
                       reason: BlacklistReason) -> tuple[VotingEnvelope, bytes, ElectoralRegister]:
        """Blacklist one voter's commitment and send a freshly salted replacement envelope."""
        office = self.offices[municipality]
        event = election.event_id
        old = office.active_commitment_of(event, local_id)
        register = office.reissue(event, local_id, reason)
        self.commit()
        blacklist_tx = office.blacklist_entries(event)[-1].tx_id
        self.pipeline.mark_blacklisted(municipality, event, [old])
        self.publish(register_records(self.network, register))
        self.publish([blacklist_record(self.network, municipality, event, [old], blacklist_tx)])
        fresh = office.active_commitment_of(event, local_id)
        replacement = self.pipeline.manufacture_replacement(register.export(), event, municipality, fresh)
        self.commit()
        self.pipeline.hand_to_post([replacement])
        self.commit()
        self.pipeline.deliver(replacement)
        self.commit()
        return replacement, blacklist_tx, register

    def _stage_dispatch(self, election: Election) -> None:
        for m in self.municipalities:
            if m in election.manufactured and m not in election.dispatched:
                self.dispatch_for(election, m)

    def _stage_deliver(self, election: Election) -> None:
        for e in self.envelopes_of(election.event_id):
            if e.status is EnvelopeStatus.AT_POST and e.holder == self.pipeline.post:
                self.pipeline.deliver(e)
        self.commit()

    def cast_envelope(self, election: Election, envelope: VotingEnvelope, choice: str, via: str = "post") -> None:
        self.pipeline.cast(envelope, choice, via)
        election.ballots[envelope.serial] = choice

    def _stage_cast(self, election: Election, turnout: float = 0.8, manual: float = 0.1,
                    yes_share: float = 0.55) -> None:
        rng = self.network.rng.stream(f"votes/{election.event_id}")
        for e in self.envelopes_of(election.event_id):
            if e.status is not EnvelopeStatus.DELIVERED or e.holder != VOTER:
                continue
            if rng.random() >= turnout:
                continue
            choice = CHOICES[0] if rng.random() < yes_share else CHOICES[1]
            via = "manual" if rng.random() < manual else "post"
            self.cast_envelope(election, e, choice, via)
        self.commit()

    def receive_pending(self, election: Election, municipality: Optional[str] = None) -> list:
        decisions = []
        for e in self.envelopes_of(election.event_id, municipality):
            if e.status is EnvelopeStatus.CAST and e.holder in (self.pipeline.post, e.municipality):
                decisions.append(self.pipeline.receive_and_validate(e.municipality, e, election.event_id))
        return decisions

    def _stage_receive(self, election: Election) -> None:
        self.receive_pending(election)
        self.commit()
        for m in self.municipalities:
            self.publish([reception_log_record(self.network, m, election.event_id)])

    def _stage_count(self, election: Election) -> None:
        for m in self.municipalities:
            election.counts[m] = self.pipeline.count_received(m, election.event_id)
        self.commit()

    def submit_for(self, election: Election, municipality: str, counts: dict[str, int]) -> bytes:
        electorate = self.offices[municipality].electorate(election.event_id)
        tx_id = submit_municipal_result(self.network, municipality, election.event_id, counts, electorate)
        election.submissions[municipality] = tx_id
        return tx_id

    def _publish_result(self, channel_id: str, tx_id: bytes) -> None:
        entry = self.network.channel(channel_id).find_tx(tx_id)
        if entry is not None and entry.valid:
            record = ResultRecord.from_bytes(entry.tx.arg("record"))
            self.publish([result_record(self.network, record, tx_id)])

    def _stage_submit(self, election: Election) -> None:
        for m in self.municipalities:
            counts = election.tally_override.get(m, election.counts.get(m, {}))
            self.submit_for(election, m, counts)
        self.commit()
        for m in self.municipalities:
            self._publish_result(self.network.cantonal_channel(m).channel_id, election.submissions[m])

    def check_for(self, election: Election, canton: str) -> list[PlausibilityResult]:
        results = []
        for child in sorted(a.name for a in self.network.directory.children(canton)):
            try:
                result = plausibility_check(self.network, canton, child, election.event_id)
            except MissingChildResult as exc:
                self.note(f"check skipped: {exc}")
                continue
            election.checks.setdefault(child, []).append(result)
            results.append(result)
        return results

    def _stage_check(self, election: Election) -> None:
        failed = []
        for canton in self.network.cantons():
            failed += [r.subject for r in self.check_for(election, canton) if not r.passed]
        self.commit()
        if not failed:
            return
        # recount: the municipality recounts its physical ballots and resubmits
        for m in failed:
            self.submit_for(election, m, election.counts.get(m, {}))
        self.commit()
        for m in failed:
            self._publish_result(self.network.cantonal_channel(m).channel_id, election.submissions[m])
            canton = self.network.directory.authority(m).parent
            result = plausibility_check(self.network, canton, m, election.event_id)
            election.checks[m].append(result)
        self.commit()

    def _stage_aggregate(self, election: Election) -> None:
        federal = self.network.federal_channel().channel_id
        submitted = []
        for canton in self.network.cantons():
            try:
                record, tx_id = aggregate(self.network, canton, election.event_id)
                submitted.append((canton, record, tx_id))
            except (ChildFailedPlausibility, MissingChildResult) as exc:
                election.blocked[canton] = f"{type(exc).__name__}: {exc}"
        self.commit()
        for canton, record, tx_id in submitted:
            if self.tx_valid(federal, tx_id):
                election.aggregates[canton] = (record, tx_id)
                self._publish_result(federal, tx_id)
        confederation = self.network.confederation()
        try:
            record, tx_id = aggregate(self.network, confederation, election.event_id)
        except MissingChildResult as exc:
            election.blocked[confederation] = f"MissingChildResult: {exc}"
            return
        self.commit()
        if self.tx_valid(federal, tx_id):
            election.aggregates[confederation] = (record, tx_id)
            self._publish_result(federal, tx_id)

    def _stage_destroy(self, election: Election) -> None:
        try:
            authorize_destruction(self.network, self.network.confederation(), election.event_id)
        except PrematureDestruction as exc:
            election.blocked["destroy"] = f"PrematureDestruction: {exc}"
        self.commit()
        for m in self.municipalities:
            election.destruction[m] = process_destruction(self.network, self.pipeline, m, election.event_id)
        self.commit()

    # -- convenience ------------------------------------------------------

    def federal_result(self, event_id: str) -> Optional[ResultRecord]:
        found = self.election(event_id).aggregates.get(self.network.confederation())
        return found[0] if found else None
