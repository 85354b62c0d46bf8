"""Permissioned channels: hash-chained blocks, ordering and world state.

A channel is shared by a fixed set of member authorities. Members submit
signed transactions into a pending pool; the scheduled orderer (round robin
over the consortium by block height) cuts a block, ordering the pool by
``(timestamp, txId)``. Each transaction is replayed through its chaincode
handler at commit; transactions the contract rejects are still committed,
flagged invalid, and leave the world state untouched.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from fractions import Fraction
from typing import Any, Callable, Iterable, Iterator, Mapping, Optional, Protocol

from .encoding import ZERO_HASH, decode, encode, frame_list, hexs, list_item_spans, sha256
from .errors import (
    DecodeError,
    EmptyPool,
    IncompatibleChaincode,
    NotAMember,
    UnknownMember,
    WrongOrderer,
)
from .pki import (
    GOVERNMENT_ROLES,
    Certificate,
    CertificateBundle,
    Directory,
    Role,
    Signature,
    sign,
    tx_key_label,
    verify,
)


class Chaincode(str, Enum):
    CM = "CM"
    RP = "RP"


class CertificateSource(Protocol):
    def certificate(self, label: str) -> Optional[Certificate]: ...


@dataclass(frozen=True, eq=False)
class SignedTransaction:
    submitter: str
    chaincode: Chaincode
    operation: str
    args: Mapping[str, Any]
    timestamp: int
    signature: Signature

    def payload(self) -> bytes:
        cached = self.__dict__.get("_payload")
        if cached is None:
            source = self.__dict__.get("_source")
            if source is not None:
                cached = _payload_from_source(source)
            else:
                cached = signing_payload(self.submitter, self.chaincode, self.operation, self.args, self.timestamp)
            object.__setattr__(self, "_payload", cached)
        return cached

    @property
    def tx_id(self) -> bytes:
        return sha256(self.payload())

    def arg(self, name: str, default: Any = None) -> Any:
        return self.args.get(name, default)

    def to_value(self):
        return (self.submitter, self.chaincode, self.operation, dict(self.args), self.timestamp, self.signature)

    @classmethod
    def from_value(cls, value) -> "SignedTransaction":
        try:
            submitter, chaincode, operation, args, timestamp, sig = value
            if not (isinstance(submitter, str) and isinstance(operation, str) and isinstance(args, dict)
                    and isinstance(timestamp, int) and not isinstance(timestamp, bool)):
                raise DecodeError("malformed transaction")
            return cls(submitter, Chaincode(chaincode), operation, args, timestamp, Signature.from_value(sig))
        except (TypeError, ValueError) as exc:
            raise DecodeError("malformed transaction") from exc

    def __eq__(self, other):
        return isinstance(other, SignedTransaction) and encode(self) == encode(other)

    def __hash__(self):
        return hash(self.tx_id)


def signing_payload(submitter, chaincode, operation, args, timestamp) -> bytes:
    return encode(("tx", submitter, Chaincode(chaincode), operation, dict(args), int(timestamp)))


def make_transaction(directory: Directory, submitter: str, chaincode: Chaincode,
                     operation: str, args: Mapping[str, Any], timestamp: int) -> SignedTransaction:
    payload = signing_payload(submitter, chaincode, operation, args, timestamp)
    signature = sign(directory.tx_key(submitter), payload)
    return SignedTransaction(submitter, Chaincode(chaincode), operation, dict(args), int(timestamp), signature)


@dataclass(frozen=True, eq=False)
class CommittedTx:
    tx: SignedTransaction
    valid: bool
    reason: str = ""

    def to_value(self):
        return (self.tx, self.valid, self.reason)

    @classmethod
    def from_value(cls, value) -> "CommittedTx":
        try:
            tx, valid, reason = value
        except (TypeError, ValueError) as exc:
            raise DecodeError("malformed entry") from exc
        if not isinstance(valid, bool) or not isinstance(reason, str):
            raise DecodeError("malformed entry")
        return cls(SignedTransaction.from_value(tx), valid, reason)

    def digest(self) -> bytes:
        cached = self.__dict__.get("_digest")
        if cached is None:
            source = self.__dict__.get("_source")
            cached = sha256(frame_list(_ENTRY_TAG + source) if source is not None else encode(("entry", self)))
            object.__setattr__(self, "_digest", cached)
        return cached


@dataclass(frozen=True, eq=False)
class Block:
    channel_id: str
    height: int
    prev_hash: bytes
    entries: tuple[CommittedTx, ...]
    orderer: str
    orderer_signature: Signature
    block_hash: bytes

    @staticmethod
    def compute_hash(channel_id: str, height: int, prev_hash: bytes,
                     entries: Iterable[CommittedTx], orderer: str) -> bytes:
        digests = tuple(e.digest() for e in entries)
        return sha256(encode(("block", channel_id, height, prev_hash, digests, orderer)))

    def recompute_hash(self) -> bytes:
        cached = self.__dict__.get("_recomputed")
        if cached is None:
            cached = self.compute_hash(self.channel_id, self.height, self.prev_hash, self.entries, self.orderer)
            object.__setattr__(self, "_recomputed", cached)
        return cached

    @property
    def transactions(self) -> tuple[SignedTransaction, ...]:
        return tuple(e.tx for e in self.entries)

    def to_value(self):
        return (self.channel_id, self.height, self.prev_hash, self.entries,
                self.orderer, self.orderer_signature, self.block_hash)

    def to_bytes(self) -> bytes:
        return encode(self)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Block":
        return _block_from_bytes(bytes(data))

    @classmethod
    def _parse(cls, data: bytes) -> "Block":
        value = decode(data)
        try:
            channel_id, height, prev_hash, entries, orderer, sig, block_hash = value
        except (TypeError, ValueError) as exc:
            raise DecodeError("malformed block") from exc
        if not (isinstance(channel_id, str) and type(height) is int and isinstance(prev_hash, bytes)
                and isinstance(entries, tuple) and isinstance(orderer, str) and isinstance(block_hash, bytes)):
            raise DecodeError("malformed block")
        parsed = tuple(CommittedTx.from_value(e) for e in entries)
        _attach_sources(data, parsed)
        return cls(channel_id, height, prev_hash, parsed, orderer, Signature.from_value(sig), block_hash)

    def render(self) -> str:
        invalid = sum(1 for e in self.entries if not e.valid)
        return f"{self.height}\t{hexs(self.block_hash, 16)}\t{len(self.entries)}\t{invalid}\t{self.orderer}"


_ENTRY_TAG = encode("entry")
_TX_TAG = encode("tx")


def _attach_sources(data: bytes, entries: tuple[CommittedTx, ...]) -> None:
    """Remember the raw bytes each entry was parsed from.

    Decoding is canonical, so the raw slice of an entry is exactly its encoding
    and digests and signing payloads can be taken from it without re-encoding.
    """
    spans = list_item_spans(data, list_item_spans(data)[3][0])
    for entry, (a, b) in zip(entries, spans):
        raw = data[a:b]
        object.__setattr__(entry, "_source", raw)
        object.__setattr__(entry.tx, "_source", raw)


_BLOCK_TAG = encode("block")


@lru_cache(maxsize=512)
def _raw_hash_mismatch(data: bytes) -> bool:
    """True when the stored block hash disagrees with the hash of the raw fields.

    Canonical decoding makes this equal to the check on the parsed block, so a
    mismatch can be reported before the entries are decoded. Anything
    structurally off is left to the full parse.
    """
    try:
        fields = list_item_spans(data)
        if len(fields) != 7:
            return False
        entries = list_item_spans(data, fields[3][0])
    except DecodeError:
        return False
    stored = data[fields[6][0]:fields[6][1]]
    if stored[:1] != b"b":
        return False
    digests = b"".join(encode(sha256(frame_list(_ENTRY_TAG + data[a:b]))) for a, b in entries)
    header = b"".join(data[a:b] for a, b in (fields[0], fields[1], fields[2]))
    recomputed = sha256(frame_list(_BLOCK_TAG + header + frame_list(digests) + data[fields[4][0]:fields[4][1]]))
    return recomputed != stored[5:]


def _payload_from_source(raw_entry: bytes) -> bytes:
    fields = list_item_spans(raw_entry, 5)  # the transaction is the entry's first item
    return frame_list(_TX_TAG + raw_entry[fields[0][0]:fields[4][1]])


@lru_cache(maxsize=512)
def _block_from_bytes(data: bytes) -> Block:
    # blocks are immutable, so re-verifying an unchanged serialized chain reuses the parse
    return Block._parse(data)


@dataclass(frozen=True)
class ConsensusPolicy:
    """The ordering consortium plus the fault thresholds scenario checks refer to."""

    ordering_members: tuple[str, ...]
    bft_fraction: Fraction = Fraction(1, 3)

    @property
    def n(self) -> int:
        return len(self.ordering_members)

    @property
    def majority_threshold(self) -> int:
        return self.n // 2 + 1

    @property
    def bft_tolerated(self) -> int:
        # largest f with f < n * bft_fraction
        limit = self.n * self.bft_fraction
        f = int(limit)
        return f - 1 if f == limit else f

    def scheduled_orderer(self, height: int) -> str:
        return self.ordering_members[height % self.n]

    def validate(self, directory: Directory) -> None:
        if not self.ordering_members:
            raise UnknownMember("empty ordering service")
        for name in self.ordering_members:
            if directory.authority(name).role not in GOVERNMENT_ROLES:
                raise IncompatibleChaincode(f"{name} is not a government authority")


@dataclass(frozen=True)
class TxReceipt:
    tx_id: bytes
    accepted: bool
    reason: str = ""


@dataclass(frozen=True)
class VerificationReport:
    ok: bool
    first_bad_height: Optional[int] = None
    detail: str = ""


class ContractRejection(Exception):
    """Raised by a chaincode handler to flag a transaction invalid."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class StateView:
    """Copy-on-write view over a world state for one transaction."""

    _DELETED = object()

    def __init__(self, base: Mapping[str, bytes]):
        self._base = base
        self._writes: dict[str, Any] = {}

    def get(self, key: str) -> Optional[bytes]:
        if key in self._writes:
            value = self._writes[key]
            return None if value is self._DELETED else value
        return self._base.get(key)

    def __contains__(self, key: str) -> bool:
        return self.get(key) is not None

    def put(self, key: str, value: bytes) -> None:
        if not isinstance(value, bytes):
            raise TypeError("world state values are bytes")
        self._writes[key] = value

    def delete(self, key: str) -> None:
        self._writes[key] = self._DELETED

    def apply_to(self, state: dict[str, bytes]) -> None:
        for key, value in self._writes.items():
            if value is self._DELETED:
                state.pop(key, None)
            else:
                state[key] = value


@dataclass(frozen=True)
class ExecutionContext:
    channel_id: str
    members: frozenset[str]
    roles: Mapping[str, Role]
    parents: Mapping[str, Optional[str]]
    certificates: CertificateSource

    def role(self, name: str) -> Optional[Role]:
        return self.roles.get(name)

    def children(self, parent: str) -> list[str]:
        return sorted(n for n, p in self.parents.items() if p == parent)


Handler = Callable[[StateView, SignedTransaction, ExecutionContext], None]


class ContractRegistry:
    def __init__(self):
        self._handlers: dict[tuple[Chaincode, str], Handler] = {}

    def register(self, chaincode: Chaincode, operation: str):
        def deco(fn: Handler) -> Handler:
            self._handlers[(Chaincode(chaincode), operation)] = fn
            return fn
        return deco

    def get(self, chaincode: Chaincode, operation: str) -> Optional[Handler]:
        return self._handlers.get((chaincode, operation))

    def operations(self, chaincode: Chaincode) -> list[str]:
        return sorted(op for cc, op in self._handlers if cc is chaincode)


def execute(registry: ContractRegistry, state: dict[str, bytes], tx: SignedTransaction,
            ctx: ExecutionContext) -> tuple[bool, str]:
    """Run one transaction through its handler, applying writes only if it is valid."""
    handler = registry.get(tx.chaincode, tx.operation)
    if handler is None:
        return False, "UnknownOperation"
    view = StateView(state)
    try:
        handler(view, tx, ctx)
    except ContractRejection as exc:
        return False, exc.reason
    except (KeyError, TypeError, ValueError, DecodeError) as exc:
        return False, f"MalformedArguments:{type(exc).__name__}"
    view.apply_to(state)
    return True, ""


class Channel:
    def __init__(self, channel_id: str, members: Iterable[str], chaincodes: Iterable[Chaincode],
                 directory: Directory, policy: ConsensusPolicy, registry: ContractRegistry,
                 kind: str = "", scope: Optional[str] = None):
        self.channel_id = channel_id
        self.members = frozenset(members)
        self.chaincodes = frozenset(Chaincode(c) for c in chaincodes)
        self.kind = kind
        self.scope = scope
        self._directory = directory
        self.policy = policy
        self.registry = registry
        self.blocks: list[Block] = []
        self.world_states: dict[Chaincode, dict[str, bytes]] = {c: {} for c in self.chaincodes}
        self.pending: list[SignedTransaction] = []
        self.read_grants: set[str] = set()
        self._commit_genesis()

    # -- helpers ---------------------------------------------------------

    @property
    def context(self) -> ExecutionContext:
        authorities = self._directory.authorities
        roles = {name: a.role for name, a in authorities.items()}
        parents = {name: a.parent for name, a in authorities.items()}
        return ExecutionContext(self.channel_id, self.members, roles, parents, self._directory.bundle())

    @property
    def height(self) -> int:
        return len(self.blocks)

    @property
    def head_hash(self) -> bytes:
        return self.blocks[-1].block_hash if self.blocks else ZERO_HASH

    def has_restricted_member(self) -> bool:
        return any(self._directory.authority(m).role in (Role.ESP, Role.SWISS_POST) for m in self.members)

    def _seal(self, entries: tuple[CommittedTx, ...], orderer: str) -> Block:
        height = self.height
        block_hash = Block.compute_hash(self.channel_id, height, self.head_hash, entries, orderer)
        signature = sign(self._directory.tx_key(orderer), block_hash)
        return Block(self.channel_id, height, self.head_hash, entries, orderer, signature, block_hash)

    def _commit_genesis(self) -> None:
        self.blocks.append(self._seal((), self.policy.scheduled_orderer(0)))

    # -- operations ------------------------------------------------------

    def submit(self, tx: SignedTransaction) -> TxReceipt:
        if tx.submitter not in self.members:
            return TxReceipt(tx.tx_id, False, "NotAMember")
        cert = self._directory.certificate(tx_key_label(tx.submitter))
        if not verify(cert, tx.payload(), tx.signature):
            return TxReceipt(tx.tx_id, False, "BadSignature")
        if tx.chaincode not in self.chaincodes:
            return TxReceipt(tx.tx_id, False, "ChaincodeNotOnChannel")
        if any(p.tx_id == tx.tx_id for p in self.pending):
            return TxReceipt(tx.tx_id, False, "DuplicateTransaction")
        self.pending.append(tx)
        return TxReceipt(tx.tx_id, True)

    def cut_block(self, orderer: str) -> Block:
        scheduled = self.policy.scheduled_orderer(self.height)
        if orderer != scheduled:
            raise WrongOrderer(f"height {self.height} is scheduled for {scheduled}, not {orderer}")
        if not self.pending:
            raise EmptyPool(self.channel_id)
        ordered = sorted(self.pending, key=lambda t: (t.timestamp, t.tx_id))
        self.pending = []
        ctx = self.context
        entries = []
        for tx in ordered:
            cert = self._directory.certificate(tx_key_label(tx.submitter))
            if not verify(cert, tx.payload(), tx.signature):
                entries.append(CommittedTx(tx, False, "BadSignature"))
                continue
            valid, reason = execute(self.registry, self.world_states[tx.chaincode], tx, ctx)
            entries.append(CommittedTx(tx, valid, reason))
        block = self._seal(tuple(entries), orderer)
        self.blocks.append(block)
        return block

    def cut_scheduled(self) -> Optional[Block]:
        if not self.pending:
            return None
        return self.cut_block(self.policy.scheduled_orderer(self.height))

    def _check_reader(self, caller: str) -> None:
        if caller not in self.members and caller not in self.read_grants:
            raise NotAMember(f"{caller} cannot read channel {self.channel_id}")

    def query_state(self, chaincode: Chaincode, key: str, caller: str) -> Optional[bytes]:
        self._check_reader(caller)
        state = self.world_states.get(Chaincode(chaincode))
        if state is None:
            return None
        return state.get(key)

    def scan_state(self, chaincode: Chaincode, prefix: str, caller: str) -> list[tuple[str, bytes]]:
        self._check_reader(caller)
        state = self.world_states.get(Chaincode(chaincode), {})
        return sorted((k, v) for k, v in state.items() if k.startswith(prefix))

    def grant_read(self, label: str) -> None:
        self.read_grants.add(label)

    def entries(self, operation: Optional[str] = None, valid: Optional[bool] = None) -> Iterator[tuple[int, CommittedTx]]:
        for block in self.blocks:
            for entry in block.entries:
                if operation is not None and entry.tx.operation != operation:
                    continue
                if valid is not None and entry.valid != valid:
                    continue
                yield block.height, entry

    def find_tx(self, tx_id: bytes) -> Optional[CommittedTx]:
        for _, entry in self.entries():
            if entry.tx.tx_id == tx_id:
                return entry
        return None

    def verify_chain(self) -> VerificationReport:
        return verify_blocks(self.channel_id, self.blocks, self._directory.bundle(), self.policy)

    def replay(self) -> tuple[dict[Chaincode, dict[str, bytes]], Optional[int]]:
        """Rebuild world state from genesis; also report the first height whose flags differ."""
        states: dict[Chaincode, dict[str, bytes]] = {c: {} for c in self.chaincodes}
        ctx = self.context
        mismatch = None
        for block in self.blocks:
            for entry in block.entries:
                tx = entry.tx
                cert = self._directory.certificate(tx_key_label(tx.submitter))
                if not verify(cert, tx.payload(), tx.signature):
                    valid, reason = False, "BadSignature"
                elif tx.chaincode not in states:
                    valid, reason = False, "ChaincodeNotOnChannel"
                else:
                    valid, reason = execute(self.registry, states[tx.chaincode], tx, ctx)
                if (valid, reason) != (entry.valid, entry.reason) and mismatch is None:
                    mismatch = block.height
        return states, mismatch

    def replay_sound(self) -> bool:
        states, mismatch = self.replay()
        return mismatch is None and states == self.world_states

    def orderer_visible_bytes(self) -> bytes:
        parts = [b.to_bytes() for b in self.blocks]
        parts.extend(encode(t) for t in self.pending)
        return b"".join(parts)

    def dump(self) -> bytes:
        certs = self._directory.bundle().to_value()
        return encode((
            "proverum-channel-dump", self.channel_id, tuple(sorted(self.members)),
            tuple(sorted(c.value for c in self.chaincodes)), self.policy.ordering_members,
            certs, tuple(b.to_bytes() for b in self.blocks),
        ))

    def render(self) -> str:
        lines = [f"# channel {self.channel_id}\theight\thash\ttxs\tinvalid\torderer"]
        lines.extend(f"{self.channel_id}\t{b.render()}" for b in self.blocks)
        return "\n".join(lines)


def create_channel(channel_id: str, members: Iterable[str], chaincodes: Iterable[Chaincode],
                   directory: Directory, policy: ConsensusPolicy, registry: ContractRegistry,
                   kind: str = "", scope: Optional[str] = None) -> Channel:
    members = frozenset(members)
    chaincodes = frozenset(Chaincode(c) for c in chaincodes)
    if not members:
        raise UnknownMember(f"channel {channel_id} has no members")
    for name in members:
        if name not in directory.authorities:
            raise UnknownMember(name)
    if Chaincode.RP in chaincodes:
        restricted = [m for m in members if directory.authority(m).role in (Role.ESP, Role.SWISS_POST)]
        if restricted:
            raise IncompatibleChaincode(f"RP chaincode cannot run on a channel with {sorted(restricted)}")
    return Channel(channel_id, members, chaincodes, directory, policy, registry, kind, scope)


def verify_blocks(channel_id: str, blocks: Iterable[Block], certificates: CertificateSource,
                  policy: Optional[ConsensusPolicy] = None) -> VerificationReport:
    prev = ZERO_HASH
    for expected_height, block in enumerate(blocks):
        problem = _block_problem(channel_id, expected_height, prev, block, certificates, policy)
        if problem:
            return VerificationReport(False, expected_height, problem)
        prev = block.block_hash
    return VerificationReport(True)


def _block_problem(channel_id, height, prev, block, certificates, policy) -> str:
    if block.channel_id != channel_id:
        return "channel id mismatch"
    if block.height != height:
        return "height discontinuity"
    if block.prev_hash != prev:
        return "prevHash does not link to previous block"
    if block.recompute_hash() != block.block_hash:
        return "blockHash mismatch"
    if policy is not None and block.orderer != policy.scheduled_orderer(height):
        return "orderer not scheduled for this height"
    if block.orderer_signature.signer != tx_key_label(block.orderer):
        return "orderer signature by wrong key"
    if not verify(certificates.certificate(tx_key_label(block.orderer)), block.block_hash, block.orderer_signature):
        return "orderer signature invalid"
    for i, entry in enumerate(block.entries):
        tx = entry.tx
        if tx.signature.signer != tx_key_label(tx.submitter):
            return f"tx {i} signed by wrong key"
        if not verify(certificates.certificate(tx_key_label(tx.submitter)), tx.payload(), tx.signature):
            return f"tx {i} signature invalid"
    return ""


@dataclass
class ChannelDump:
    channel_id: str
    members: tuple[str, ...]
    chaincodes: tuple[str, ...]
    ordering_members: tuple[str, ...]
    certificates: CertificateBundle
    block_bytes: tuple[bytes, ...]

    @classmethod
    def from_bytes(cls, data: bytes) -> "ChannelDump":
        value = decode(data)
        try:
            magic, channel_id, members, chaincodes, ordering, certs, blocks = value
        except (TypeError, ValueError) as exc:
            raise DecodeError("malformed dump") from exc
        if magic != "proverum-channel-dump":
            raise DecodeError("not a channel dump")
        from .pki import Certificate as _Cert

        bundle = CertificateBundle.from_certificates(_Cert.from_value(c) for c in certs)
        return cls(channel_id, tuple(members), tuple(chaincodes), tuple(ordering), bundle, tuple(blocks))

    def verify(self) -> VerificationReport:
        # the dump carries its own trust material, so every certificate must chain to an embedded root
        for label, cert in sorted(self.certificates.certificates.items()):
            if self.certificates.certificate(label) is None:
                return VerificationReport(False, None, f"certificate {label} does not chain to its root")
        for name, values in (("members", self.members), ("chaincodes", self.chaincodes)):
            if list(values) != sorted(set(values)):
                return VerificationReport(False, None, f"{name} list is not canonical")
        policy = ConsensusPolicy(self.ordering_members) if self.ordering_members else None
        report = verify_block_bytes(self.channel_id, self.block_bytes, self.certificates, policy)
        if not report.ok:
            return report
        # membership is not committed on the chain; it must at least cover what the chain shows
        for height, raw in enumerate(self.block_bytes):
            for entry in Block.from_bytes(raw).entries:
                if entry.tx.submitter not in self.members:
                    return VerificationReport(False, height, f"submitter {entry.tx.submitter} is not a listed member")
                if entry.tx.chaincode.value not in self.chaincodes:
                    return VerificationReport(False, height, f"chaincode {entry.tx.chaincode.value} is not listed")
        return report

    def render(self) -> str:
        lines = [f"# channel {self.channel_id}\theight\thash\ttxs\tinvalid\torderer"]
        for raw in self.block_bytes:
            try:
                lines.append(f"{self.channel_id}\t{Block.from_bytes(raw).render()}")
            except DecodeError:
                lines.append(f"{self.channel_id}\t<undecodable block>")
        return "\n".join(lines)


def verify_block_bytes(channel_id: str, block_bytes: Iterable[bytes], certificates: CertificateSource,
                       policy: Optional[ConsensusPolicy] = None) -> VerificationReport:
    """Verify serialized blocks; a block that no longer decodes is a failure at its height."""
    prev = ZERO_HASH
    for height, raw in enumerate(block_bytes):
        if _raw_hash_mismatch(bytes(raw)):
            return VerificationReport(False, height, "blockHash mismatch")
        try:
            block = Block.from_bytes(raw)
        except DecodeError as exc:
            return VerificationReport(False, height, f"undecodable block: {exc}")
        problem = _block_problem(channel_id, height, prev, block, certificates, policy)
        if problem:
            return VerificationReport(False, height, problem)
        prev = block.block_hash
    return VerificationReport(True)


def verify_dump(data: bytes) -> VerificationReport:
    try:
        dump = ChannelDump.from_bytes(data)
    except DecodeError as exc:
        return VerificationReport(False, None, f"undecodable dump: {exc}")
    return dump.verify()
