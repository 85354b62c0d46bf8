"""The public environment and its verifier.

Three publication targets can be enabled in any combination:

1. a permissionless sink: an append-only log that anyone can read;
2. a proof-of-authority chain: hash-linked blocks produced round robin by
   authorized government producers and readable by anyone;
3. a read API: a query surface over indexed records plus a read grant on the
   external channel for per-commitment reception status.

Records arrive through the exchange interface, whose gatekeeper refuses any
payload carrying personal data. :func:`public_verify` works from a
:class:`PublicSnapshot`, which holds plain public data only.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, replace
from enum import Enum
from typing import TYPE_CHECKING, Callable, Iterable, Mapping, Optional, Sequence

from .artifact_lifecycle import check_eligibility_verifiability
from .contracts import accepted_key, reception_log_prefix
from .electoral_register import ElectoralRegister, parse_register_export
from .encoding import H, ZERO_HASH, decode, encode, sha256
from .errors import BadSourceSignature, DecodeError, GatekeeperRejection, ParseError, UnauthorizedProducer
from .ledger import Chaincode, Channel
from .merkle import list_digest
from .pki import CertificateBundle, KeyPair, Signature, publication_key_label, sign, verify
from .records import ResultRecord, ScopeLevel

if TYPE_CHECKING:
    from .network import Network

PUBLIC_READER = "public-api"
OPTIONS = (1, 2, 3)


class PublicationKind(str, Enum):
    REGISTER_DIGEST = "RegisterDigest"
    MERKLE_ROOT = "MerkleRoot"
    PRELIMINARY_RESULT = "PreliminaryResult"
    FEDERAL_RESULT = "FederalResult"
    BLACKLIST_DIGEST = "BlacklistDigest"
    REGISTER_EXPORT = "RegisterExport"
    RECEPTION_LOG = "ReceptionLog"


DIGEST_KINDS = (PublicationKind.REGISTER_DIGEST, PublicationKind.MERKLE_ROOT, PublicationKind.BLACKLIST_DIGEST)
RESULT_KINDS = (PublicationKind.PRELIMINARY_RESULT, PublicationKind.FEDERAL_RESULT)


@dataclass(frozen=True)
class PublicationRecord:
    kind: PublicationKind
    event_id: str
    scope: str
    payload: bytes
    source_authority: str
    source_channel_tx_id: bytes
    source_signature: Optional[Signature] = None

    def signed_payload(self) -> bytes:
        return encode(("publication", self.kind, self.event_id, self.scope, self.payload,
                       self.source_authority, self.source_channel_tx_id))

    def signed(self, key: KeyPair) -> "PublicationRecord":
        return replace(self, source_signature=sign(key, self.signed_payload()))

    def to_value(self):
        return (self.kind, self.event_id, self.scope, self.payload, self.source_authority,
                self.source_channel_tx_id, self.source_signature)

    def to_bytes(self) -> bytes:
        return encode(self)

    @property
    def digest(self) -> bytes:
        return sha256(self.to_bytes())

    def render(self) -> str:
        sig = self.source_signature.value.hex() if self.source_signature else ""
        return (f"{self.kind.value}\t{self.event_id}\t{self.scope}\t{self.payload.hex()}\t"
                f"{self.source_authority}\t{sig}\t{self.source_channel_tx_id.hex()}")


@dataclass(frozen=True)
class PublicationReceipt:
    record_digest: bytes
    sink_tx: Optional[str] = None
    poa_queued: bool = False
    api_indexed: bool = False


# -- gatekeeper ------------------------------------------------------------------

class Gatekeeper:
    """Exchange-interface filter: structural checks plus a PII substring scan."""

    def __init__(self, pii: Callable[[], Iterable[str]]):
        self._pii = pii

    def problems(self, record: PublicationRecord) -> list[str]:
        found = []
        payload = record.payload
        if record.kind in DIGEST_KINDS and len(payload) != 32:
            found.append(f"{record.kind.value} payload is not a 32-byte digest")
        elif record.kind in RESULT_KINDS:
            try:
                result = ResultRecord.from_bytes(payload)
                federal = result.level is ScopeLevel.FEDERAL
                if federal != (record.kind is PublicationKind.FEDERAL_RESULT):
                    found.append("result level does not match publication kind")
            except DecodeError:
                found.append("payload is not a result record")
        elif record.kind is PublicationKind.REGISTER_EXPORT:
            try:
                parse_register_export(payload.decode("ascii"))
            except (UnicodeDecodeError, ParseError):
                found.append("payload is not a register export")
        elif record.kind is PublicationKind.RECEPTION_LOG:
            try:
                rows = decode(payload)
                if not all(len(r) == 4 for r in rows):
                    found.append("malformed reception log")
            except (DecodeError, TypeError):
                found.append("malformed reception log")
        haystack = payload + record.scope.encode() + record.event_id.encode()
        for value in sorted(self._pii()):
            if value.encode("utf-8") in haystack:
                found.append("payload contains personal data")
                break
        return found

    def check(self, record: PublicationRecord) -> None:
        problems = self.problems(record)
        if problems:
            raise GatekeeperRejection("; ".join(problems))


# -- option 1 -------------------------------------------------------------------

class PermissionlessSink:
    def __init__(self):
        self.records: list[PublicationRecord] = []
        self.tx_ids: list[str] = []

    def append(self, record: PublicationRecord) -> str:
        tx = H("sink", len(self.records), record.to_bytes()).hex()
        self.records.append(record)
        self.tx_ids.append(tx)
        return tx


# -- option 2 -------------------------------------------------------------------

@dataclass(frozen=True)
class PoABlock:
    height: int
    prev_hash: bytes
    records: tuple[PublicationRecord, ...]
    producer: str
    signature: Signature
    block_hash: bytes

    @staticmethod
    def compute_hash(height: int, prev_hash: bytes, records: Sequence[PublicationRecord], producer: str) -> bytes:
        return H("poa", height, prev_hash, tuple(r.digest for r in records), producer)

    def recompute_hash(self) -> bytes:
        return self.compute_hash(self.height, self.prev_hash, self.records, self.producer)


class PoAChain:
    def __init__(self, producers: Mapping[str, KeyPair]):
        self.authorized_producers = tuple(sorted(producers))
        self._keys = dict(producers)
        self.blocks: list[PoABlock] = []
        self.pending: list[PublicationRecord] = []

    @property
    def head_hash(self) -> bytes:
        return self.blocks[-1].block_hash if self.blocks else ZERO_HASH

    def scheduled_producer(self, height: Optional[int] = None) -> str:
        height = len(self.blocks) if height is None else height
        return self.authorized_producers[height % len(self.authorized_producers)]

    def produce(self, producer: str) -> Optional[PoABlock]:
        if producer not in self._keys:
            raise UnauthorizedProducer(f"{producer} is not an authorized producer")
        if producer != self.scheduled_producer():
            raise UnauthorizedProducer(f"height {len(self.blocks)} belongs to {self.scheduled_producer()}")
        if not self.pending:
            return None
        records, self.pending = tuple(self.pending), []
        height = len(self.blocks)
        block_hash = PoABlock.compute_hash(height, self.head_hash, records, producer)
        block = PoABlock(height, self.head_hash, records, producer, sign(self._keys[producer], block_hash),
                         block_hash)
        self.blocks.append(block)
        return block

    def tick(self) -> Optional[PoABlock]:
        return self.produce(self.scheduled_producer()) if self.pending else None

    def records(self) -> list[PublicationRecord]:
        return [r for b in self.blocks for r in b.records]


@dataclass(frozen=True)
class ChainReport:
    ok: bool
    first_bad_height: Optional[int] = None
    detail: str = ""


def verify_poa(blocks: Sequence[PoABlock], producers: Sequence[str], certificates: CertificateBundle) -> ChainReport:
    prev = ZERO_HASH
    for height, block in enumerate(blocks):
        if block.height != height:
            return ChainReport(False, height, "height discontinuity")
        if block.prev_hash != prev:
            return ChainReport(False, height, "prevHash does not link")
        if block.recompute_hash() != block.block_hash:
            return ChainReport(False, height, "blockHash mismatch")
        if block.producer not in producers or block.producer != producers[height % len(producers)]:
            return ChainReport(False, height, f"producer {block.producer} not scheduled")
        cert = certificates.certificate(publication_key_label(block.producer))
        if not verify(cert, block.block_hash, block.signature):
            return ChainReport(False, height, "producer signature invalid")
        prev = block.block_hash
    return ChainReport(True)


# -- option 3 -------------------------------------------------------------------

class ReadAPI:
    def __init__(self, channel: Optional[Channel] = None):
        self._channel = channel
        if channel is not None:
            channel.grant_read(PUBLIC_READER)
        self.records: list[PublicationRecord] = []
        self.frozen_at: Optional[int] = None

    def index(self, record: PublicationRecord) -> bool:
        if self.frozen_at is not None:
            return False
        self.records.append(record)
        return True

    def freeze(self) -> None:
        """Stop indexing: the endpoint keeps answering from stale data."""
        self.frozen_at = len(self.records)

    @property
    def stale(self) -> bool:
        return self.frozen_at is not None

    def query(self, kind: Optional[PublicationKind] = None, event_id: Optional[str] = None,
              scope: Optional[str] = None) -> list[PublicationRecord]:
        return [r for r in self.records
                if (kind is None or r.kind is kind) and (event_id is None or r.event_id == event_id)
                and (scope is None or r.scope == scope)]

    def reception_status(self, event_id: str, commitment: bytes) -> str:
        """Per-voter verification: has the envelope with this commitment been accepted?"""
        if self._channel is None:
            return "Unavailable"
        raw = self._channel.query_state(Chaincode.CM, accepted_key(event_id, commitment), PUBLIC_READER)
        if raw is not None:
            return "Accepted"
        for _, value in self._channel.scan_state(Chaincode.CM, reception_log_prefix(event_id), PUBLIC_READER):
            _, c, decision, reason = decode(value)
            if c == commitment:
                return f"{decision}:{reason}"
        return "NotReceived"


# -- the environment -----------------------------------------------------------

class PublicEnvironment:
    def __init__(self, options: Iterable[int], certificates: CertificateBundle, gatekeeper: Gatekeeper,
                 producers: Mapping[str, KeyPair], api_channel: Optional[Channel] = None):
        self.options = tuple(sorted(set(options)))
        if not self.options or any(o not in OPTIONS for o in self.options):
            raise ValueError(f"public-env options must be a non-empty subset of {OPTIONS}")
        self.certificates = certificates
        self.gatekeeper = gatekeeper
        self.sink = PermissionlessSink() if 1 in self.options else None
        self.poa = PoAChain(producers) if 2 in self.options else None
        self.api = ReadAPI(api_channel) if 3 in self.options else None
        self.rejections: list[tuple[PublicationRecord, str]] = []

    def publish(self, record: PublicationRecord) -> PublicationReceipt:
        cert = self.certificates.certificate(publication_key_label(record.source_authority))
        if not verify(cert, record.signed_payload(), record.source_signature):
            self.rejections.append((record, "BadSourceSignature"))
            raise BadSourceSignature(f"{record.kind.value} from {record.source_authority}")
        try:
            self.gatekeeper.check(record)
        except GatekeeperRejection as exc:
            self.rejections.append((record, str(exc)))
            raise
        sink_tx = self.sink.append(record) if self.sink else None
        if self.poa:
            self.poa.pending.append(record)
        indexed = self.api.index(record) if self.api else False
        return PublicationReceipt(record.digest, sink_tx, self.poa is not None, indexed)

    def tick(self, _clock: int = 0) -> Optional[PoABlock]:
        return self.poa.tick() if self.poa else None

    def public_read(self, option: int, kind: Optional[PublicationKind] = None,
                    event_id: Optional[str] = None) -> list[PublicationRecord]:
        records = self.snapshot().records_for(option)
        return [r for r in records if (kind is None or r.kind is kind) and (event_id is None or r.event_id == event_id)]

    def snapshot(self) -> "PublicSnapshot":
        return PublicSnapshot(
            options=self.options,
            certificates=copy.deepcopy(self.certificates),
            sink_records=tuple(self.sink.records) if self.sink else (),
            poa_blocks=tuple(self.poa.blocks) if self.poa else (),
            poa_producers=self.poa.authorized_producers if self.poa else (),
            api_records=tuple(self.api.records) if self.api else (),
            api_stale=bool(self.api and self.api.stale),
        )

    # -- adversarial tampering of public storage ------------------------

    def tamper_poa_record(self, height: int, index: int, payload: bytes) -> None:
        block = self.poa.blocks[height]
        records = list(block.records)
        records[index] = replace(records[index], payload=payload)
        self.poa.blocks[height] = replace(block, records=tuple(records))

    def tamper_sink_record(self, index: int, payload: bytes) -> None:
        self.sink.records[index] = replace(self.sink.records[index], payload=payload)

    def tamper_api_record(self, index: int, payload: bytes) -> None:
        self.api.records[index] = replace(self.api.records[index], payload=payload)


def export_records(records: Iterable[PublicationRecord]) -> str:
    return "".join(r.render() + "\n" for r in records)


# -- exchange interface (private side) ------------------------------------------

def _record(network: "Network", kind: PublicationKind, event_id: str, scope: str, payload: bytes,
            source: str, tx_id: bytes) -> PublicationRecord:
    record = PublicationRecord(kind, event_id, scope, payload, source, tx_id)
    return record.signed(network.directory.publication_key(source))


def register_records(network: "Network", register: ElectoralRegister) -> list[PublicationRecord]:
    scope = f"{register.municipality}/v{register.version}"
    tx = register.publish_tx or ZERO_HASH
    source = register.municipality
    return [
        _record(network, PublicationKind.REGISTER_DIGEST, register.event_id, scope, register.list_digest, source, tx),
        _record(network, PublicationKind.MERKLE_ROOT, register.event_id, scope, register.merkle_root, source, tx),
        _record(network, PublicationKind.REGISTER_EXPORT, register.event_id, scope,
                register.export().encode("ascii"), source, tx),
    ]


def result_record(network: "Network", record: ResultRecord, tx_id: bytes) -> PublicationRecord:
    kind = PublicationKind.FEDERAL_RESULT if record.level is ScopeLevel.FEDERAL else PublicationKind.PRELIMINARY_RESULT
    return _record(network, kind, record.event_id, f"{record.level.value}/{record.scope}", record.to_bytes(),
                   record.submitter, tx_id)


def blacklist_record(network: "Network", municipality: str, event_id: str, commitments: Sequence[bytes],
                     tx_id: bytes) -> PublicationRecord:
    return _record(network, PublicationKind.BLACKLIST_DIGEST, event_id, municipality,
                   list_digest(sorted(commitments)), municipality, tx_id)


def reception_log_record(network: "Network", municipality: str, event_id: str) -> PublicationRecord:
    """The committed reception log of one municipality, as published rows."""
    channel = network.external_channel()
    rows = tuple(decode(raw) for _, raw in
                 channel.scan_state(Chaincode.CM, reception_log_prefix(event_id, municipality), municipality))
    last_tx = ZERO_HASH
    for _, entry in channel.entries("ve.receive", valid=True):
        if entry.tx.submitter == municipality and entry.tx.arg("event") == event_id:
            last_tx = entry.tx.tx_id
    return _record(network, PublicationKind.RECEPTION_LOG, event_id, municipality, encode(rows),
                   municipality, last_tx)


# -- public verifier ------------------------------------------------------------

@dataclass(frozen=True)
class PublicSnapshot:
    """Everything an outsider can read. No handle into the private environment."""

    options: tuple[int, ...]
    certificates: CertificateBundle
    sink_records: tuple[PublicationRecord, ...] = ()
    poa_blocks: tuple[PoABlock, ...] = ()
    poa_producers: tuple[str, ...] = ()
    api_records: tuple[PublicationRecord, ...] = ()
    api_stale: bool = False

    def records_for(self, option: int) -> list[PublicationRecord]:
        if option == 1:
            return list(self.sink_records)
        if option == 2:
            return [r for b in self.poa_blocks for r in b.records]
        if option == 3:
            return list(self.api_records)
        raise ValueError(option)

    def all_bytes(self) -> bytes:
        parts = [r.to_bytes() for o in self.options for r in self.records_for(o)]
        return b"".join(parts)


@dataclass(frozen=True)
class CheckResult:
    name: str
    option: Optional[int]
    ok: bool
    evidence: tuple[str, ...] = ()


@dataclass(frozen=True)
class PublicReport:
    ok: bool
    checks: tuple[CheckResult, ...]
    notes: tuple[str, ...] = ()

    def failures(self) -> list[CheckResult]:
        return [c for c in self.checks if not c.ok]

    def render(self) -> str:
        lines = []
        for c in self.checks:
            where = f"option{c.option}" if c.option else "all"
            lines.append(f"public-check\t{c.name}\t{where}\t{'pass' if c.ok else 'FAIL'}\t{'; '.join(c.evidence)}")
        lines.extend(f"public-note\t{n}" for n in self.notes)
        return "\n".join(lines)


def _latest(records: Iterable[tuple[int, PublicationRecord]]) -> dict[tuple[str, str], tuple[int, PublicationRecord]]:
    latest = {}
    for i, r in records:
        latest[(r.kind.value, r.scope)] = (i, r)
    return latest


def _check_signatures(records, certificates, option) -> CheckResult:
    bad = []
    for i, r in records:
        cert = certificates.certificate(publication_key_label(r.source_authority))
        if not verify(cert, r.signed_payload(), r.source_signature):
            bad.append(f"record {i} ({r.kind.value} {r.scope}): source signature invalid")
            continue
        if r.kind in RESULT_KINDS:
            try:
                inner = ResultRecord.from_bytes(r.payload)
            except DecodeError:
                bad.append(f"record {i} ({r.kind.value} {r.scope}): undecodable result")
                continue
            inner_cert = certificates.certificate(publication_key_label(inner.submitter))
            if not verify(inner_cert, inner.payload(), inner.signature):
                bad.append(f"record {i} ({r.kind.value} {r.scope}): result signature invalid")
    return CheckResult("signatures", option, not bad, tuple(bad))


def _check_registers(records, option) -> CheckResult:
    latest = _latest(records)
    bad, seen = [], 0
    for (kind, scope), (i, r) in sorted(latest.items()):
        if kind != PublicationKind.REGISTER_EXPORT.value:
            continue
        seen += 1
        try:
            export = parse_register_export(r.payload.decode("ascii"))
        except (ParseError, UnicodeDecodeError) as exc:
            bad.append(f"record {i} ({scope}): unreadable export: {exc}")
            continue
        for digest_kind, recomputed, label in (
            (PublicationKind.MERKLE_ROOT, export.recomputed_root(), "merkleRoot"),
            (PublicationKind.REGISTER_DIGEST, export.recomputed_digest(), "listDigest"),
        ):
            published = latest.get((digest_kind.value, scope))
            if published is None:
                bad.append(f"record {i} ({scope}): no published {label}")
            elif published[1].payload != recomputed:
                bad.append(f"record {published[0]} ({scope}): published {label} differs from recomputation "
                           f"of export record {i}")
    if not seen:
        bad.append("no register export published")
    return CheckResult("register-roots", option, not bad, tuple(bad))


def _results(records):
    out = {}
    for (kind, scope), (i, r) in _latest(records).items():
        if kind in (PublicationKind.PRELIMINARY_RESULT.value, PublicationKind.FEDERAL_RESULT.value):
            try:
                out[scope] = (i, ResultRecord.from_bytes(r.payload))
            except DecodeError:
                continue
    return out


def _check_sums(records, option) -> CheckResult:
    results = _results(records)
    bad = []
    federal = [(i, r) for i, r in results.values() if r.level is ScopeLevel.FEDERAL]
    cantonal = {r.scope: (i, r) for i, r in results.values() if r.level is ScopeLevel.CANTON}
    municipal = [(i, r) for i, r in results.values() if r.level is ScopeLevel.MUNICIPALITY]
    if not federal:
        bad.append("no federal result published")

    def total(rs):
        acc: dict[str, int] = {}
        for r in rs:
            for c, n in r.counts:
                acc[c] = acc.get(c, 0) + n
        return acc

    for i, fed in federal:
        if total(r for _, r in cantonal.values()) != fed.counts_dict():
            bad.append(f"record {i} (federal): counts differ from the sum of {len(cantonal)} cantonal results")
        if sum(r.electorate_size for _, r in cantonal.values()) != fed.electorate_size:
            bad.append(f"record {i} (federal): electorate differs from the cantonal sum")
    if federal and municipal and total(r for _, r in municipal) != federal[-1][1].counts_dict():
        bad.append(f"federal counts differ from the sum of {len(municipal)} municipal results")
    return CheckResult("result-sums", option, not bad, tuple(bad))


def _check_eligibility(records, option) -> CheckResult:
    exports, rows = [], []
    for i, r in records:
        if r.kind is PublicationKind.REGISTER_EXPORT:
            exports.append((r.scope.split("/")[0], r.payload.decode("ascii", "replace")))
    for (kind, scope), (i, r) in sorted(_latest(records).items()):
        if kind == PublicationKind.RECEPTION_LOG.value:
            try:
                rows.extend((scope, *row) for row in decode(r.payload))
            except (DecodeError, TypeError):
                return CheckResult("eligibility", option, False, (f"record {i} ({scope}): unreadable log",))
    try:
        problems = check_eligibility_verifiability(exports, rows)
    except ParseError as exc:
        problems = [f"unreadable export: {exc}"]
    if not rows:
        problems.append("no reception log published")
    return CheckResult("eligibility", option, not problems, tuple(problems))


def public_verify(snapshot: PublicSnapshot, event_id: str) -> PublicReport:
    checks: list[CheckResult] = []
    notes: list[str] = []
    for option in snapshot.options:
        records = [(i, r) for i, r in enumerate(snapshot.records_for(option)) if r.event_id == event_id]
        if option == 2:
            chain = verify_poa(snapshot.poa_blocks, snapshot.poa_producers, snapshot.certificates)
            evidence = () if chain.ok else (f"block {chain.first_bad_height}: {chain.detail}",)
            checks.append(CheckResult("poa-links", 2, chain.ok, evidence))
        checks.append(_check_signatures(records, snapshot.certificates, option))
        checks.append(_check_registers(records, option))
        checks.append(_check_sums(records, option))
        checks.append(_check_eligibility(records, option))
    if 1 in snapshot.options and 2 in snapshot.options:
        sink = sorted(r.digest for r in snapshot.records_for(1))
        chain = sorted(r.digest for r in snapshot.records_for(2))
        diff = sorted(set(sink) ^ set(chain))
        evidence = tuple(f"record {d.hex()[:16]} on only one option" for d in diff)
        if not diff and sink != chain:
            evidence = ("record multiplicities differ",)
        checks.append(CheckResult("option-consistency", None, not evidence, evidence))
    ok = all(c.ok for c in checks)
    if snapshot.options == (3,):
        notes.append("read API is the only public source: a single trusted endpoint")
        if not ok:
            notes.append("single point of failure: the only endpoint served data that does not verify")
    if snapshot.api_stale:
        notes.append("read API reports stale data")
    return PublicReport(ok, tuple(checks), tuple(notes))
