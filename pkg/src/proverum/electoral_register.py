"""Electoral registers as salted voter commitments.

A register version is the ordered list of commitments
``sha256(salt || encode(voter identity))`` for the eligible voters of one
municipality and one voting event. The commitment list, its list digest and
its Merkle root go on the external channel; salts and voter references stay
in the municipality's private salt collection, with only their digest on the
cantonal channel.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Iterable, Optional, Sequence, Union

from .citizen_registry import CitizenRecord, CitizenRegistry
from .contracts import blacklist_key, register_state
from .encoding import decode, encode, sha256
from .errors import NotInRegister, ParseError, UnknownCommitment
from .ledger import Chaincode, Channel
from .merkle import fold_path, list_digest, merkle_path, merkle_root
from .privdata import create_collection, put_private

if TYPE_CHECKING:
    from .network import Network

ALL = "ALL"
SALT_BYTES = 32


class RegisterStatus(str, Enum):
    ACTIVE = "Active"
    SUPERSEDED = "Superseded"


class BlacklistReason(str, Enum):
    THEFT_BEFORE_DISPATCH = "TheftBeforeDispatch"
    THEFT_VOTER_LETTERBOX = "TheftVoterLetterbox"
    THEFT_MUNICIPAL_LETTERBOX = "TheftMunicipalLetterbox"
    REROUTE = "Reroute"
    OTHER = "Other"


def voter_identity(record: CitizenRecord) -> bytes:
    return encode(("voter", record.residence_municipality, record.local_person_id,
                   record.official_name, record.first_name, record.date_of_birth))


def commit(salt: bytes, record: CitizenRecord) -> bytes:
    return sha256(salt + voter_identity(record))


@dataclass(frozen=True)
class VoterCommitment:
    commitment: bytes
    salt: bytes
    voter_ref: str


@dataclass
class ElectoralRegister:
    event_id: str
    municipality: str
    version: int
    commitments: tuple[bytes, ...]
    list_digest: bytes
    merkle_root: bytes
    status: RegisterStatus = RegisterStatus.ACTIVE
    publish_tx: Optional[bytes] = None

    @classmethod
    def build(cls, event_id: str, municipality: str, version: int,
              commitments: Sequence[bytes]) -> "ElectoralRegister":
        commitments = tuple(commitments)
        return cls(event_id, municipality, version, commitments,
                   list_digest(commitments), merkle_root(commitments))

    def recomputes(self) -> bool:
        return (list_digest(self.commitments) == self.list_digest
                and merkle_root(self.commitments) == self.merkle_root)

    def export(self) -> str:
        lines = [c.hex() for c in self.commitments]
        lines.append(f"LIST_DIGEST={self.list_digest.hex()}")
        lines.append(f"MERKLE_ROOT={self.merkle_root.hex()}")
        return "\n".join(lines) + "\n"

    def verification_tokens(self) -> list[tuple[str, str]]:
        """Per-voter ``(commitment hex, event)`` pairs handed out with the voting material."""
        return [(c.hex(), self.event_id) for c in self.commitments]


@dataclass(frozen=True)
class RegisterExport:
    commitments: tuple[bytes, ...]
    list_digest: bytes
    merkle_root: bytes

    def recomputed_digest(self) -> bytes:
        return list_digest(self.commitments)

    def recomputed_root(self) -> bytes:
        return merkle_root(self.commitments)

    def recomputes(self) -> bool:
        return self.recomputed_digest() == self.list_digest and self.recomputed_root() == self.merkle_root


def _hex32(text: str, line: int, column: int) -> bytes:
    try:
        value = bytes.fromhex(text)
    except ValueError:
        raise ParseError(f"not hex: {text[:16]!r}", line, column) from None
    if len(value) != 32:
        raise ParseError(f"expected 32 bytes, got {len(value)}", line, column)
    return value


def parse_register_export(text: str) -> RegisterExport:
    commitments: list[bytes] = []
    footer: dict[str, bytes] = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if "=" in line:
            name, _, value = line.partition("=")
            if name not in ("LIST_DIGEST", "MERKLE_ROOT"):
                raise ParseError(f"unknown footer {name!r}", n)
            if name in footer:
                raise ParseError(f"repeated footer {name}", n)
            footer[name] = _hex32(value, n, len(name) + 2)
            continue
        if footer:
            raise ParseError("commitment after footer", n)
        commitments.append(_hex32(line, n, 1))
    for name in ("LIST_DIGEST", "MERKLE_ROOT"):
        if name not in footer:
            raise ParseError(f"missing {name} footer", len(text.splitlines()) + 1)
    return RegisterExport(tuple(commitments), footer["LIST_DIGEST"], footer["MERKLE_ROOT"])


@dataclass(frozen=True)
class EligibilityProof:
    commitment: bytes
    merkle_path: tuple[tuple[bytes, str], ...]
    root: bytes
    register_version: int


def verify_eligibility_proof(proof: EligibilityProof, on_chain_root: bytes,
                             on_chain_version: Optional[int] = None) -> bool:
    """The proof folds to the committed root and names that root and, if given, its version."""
    try:
        if proof.root != on_chain_root:
            return False
        if on_chain_version is not None and proof.register_version != on_chain_version:
            return False
        if not isinstance(proof.commitment, bytes) or len(proof.commitment) != 32:
            return False
        if any(not isinstance(s, bytes) or len(s) != 32 for s, _ in proof.merkle_path):
            return False
        return fold_path(proof.commitment, proof.merkle_path) == on_chain_root
    except (TypeError, ValueError):
        return False


@dataclass(frozen=True)
class BlacklistEntry:
    commitment: bytes
    reason: BlacklistReason
    register_version: int
    tx_id: bytes


class ChannelReader:
    """Read-only view of one chaincode's world state through a member's access rights."""

    def __init__(self, channel: Channel, caller: str, chaincode: Chaincode = Chaincode.CM):
        self.channel, self.caller, self.chaincode = channel, caller, chaincode

    def get(self, key: str) -> Optional[bytes]:
        return self.channel.query_state(self.chaincode, key, self.caller)


def onchain_register(network: "Network", event_id: str, municipality: str, caller: str):
    """Committed active ``(version, list_digest, root, commitments)`` or ``None``."""
    return register_state(ChannelReader(network.external_channel(), caller), event_id, municipality)


def onchain_blacklisted(network: "Network", event_id: str, commitment: bytes, caller: str) -> bool:
    return network.external_channel().query_state(Chaincode.CM, blacklist_key(event_id, commitment), caller) is not None


@dataclass
class _EventBook:
    versions: list[ElectoralRegister] = field(default_factory=list)
    salts: dict[int, list[VoterCommitment]] = field(default_factory=dict)
    blacklist: list[BlacklistEntry] = field(default_factory=list)

    @property
    def active(self) -> Optional[ElectoralRegister]:
        return self.versions[-1] if self.versions else None

    def blacklisted(self) -> set[bytes]:
        return {e.commitment for e in self.blacklist}


class RegisterOffice:
    """A municipality's election office: generates, proves, blacklists and re-issues."""

    def __init__(self, network: "Network", registry: CitizenRegistry):
        self.network = network
        self.registry = registry
        self.municipality = registry.municipality
        collection_id = f"{self.municipality}-salts"
        self.salt_collection = network.collections.get(collection_id) or create_collection(
            network, collection_id, self.municipality, [self.municipality])
        self.books: dict[str, _EventBook] = {}

    def _book(self, event_id: str) -> _EventBook:
        return self.books.setdefault(event_id, _EventBook())

    def _salt(self) -> bytes:
        return self.network.rng.randbytes(f"salts/{self.municipality}", SALT_BYTES)

    def _publish(self, event_id: str, entries: list[VoterCommitment]) -> ElectoralRegister:
        book = self._book(event_id)
        version = len(book.versions) + 1
        register = ElectoralRegister.build(event_id, self.municipality, version, [e.commitment for e in entries])
        receipt = self.network.transact(self.network.external_channel().channel_id, self.municipality,
                                        Chaincode.CM, "er.publish", {
                                            "event": event_id, "municipality": self.municipality,
                                            "version": version, "commitments": register.commitments,
                                            "list_digest": register.list_digest,
                                            "merkle_root": register.merkle_root,
                                        })
        register.publish_tx = receipt.tx_id
        salts_value = encode(tuple((e.voter_ref, e.salt, e.commitment) for e in entries))
        put_private(self.network, self.salt_collection, self.municipality, f"salts/{event_id}/v{version}",
                    salts_value, self.network.cantonal_channel(self.municipality).channel_id, "er.salts")
        if book.active is not None:
            book.active.status = RegisterStatus.SUPERSEDED
        book.versions.append(register)
        book.salts[version] = entries
        return register

    # -- operations ------------------------------------------------------

    def generate_register(self, event_id: str, reference_date: dt.date) -> ElectoralRegister:
        entries = []
        for voter in self.registry.derive_eligible(reference_date):
            salt = self._salt()
            entries.append(VoterCommitment(commit(salt, voter.record), salt, voter.record.local_person_id))
        return self._publish(event_id, entries)

    def active_register(self, event_id: str) -> Optional[ElectoralRegister]:
        return self._book(event_id).active

    def registers(self, event_id: str) -> list[ElectoralRegister]:
        return list(self._book(event_id).versions)

    def blacklist_entries(self, event_id: str) -> list[BlacklistEntry]:
        return list(self._book(event_id).blacklist)

    def is_blacklisted(self, event_id: str, commitment: bytes) -> bool:
        return commitment in self._book(event_id).blacklisted()

    def valid_commitments(self, event_id: str) -> list[bytes]:
        """Active commitments that are not blacklisted, in register order."""
        book = self._book(event_id)
        if book.active is None:
            return []
        banned = book.blacklisted()
        return [c for c in book.active.commitments if c not in banned]

    def electorate(self, event_id: str) -> int:
        return len(self.valid_commitments(event_id))

    def owner_of(self, event_id: str, commitment: bytes) -> Optional[str]:
        for entries in self._book(event_id).salts.values():
            for e in entries:
                if e.commitment == commitment:
                    return e.voter_ref
        return None

    def active_commitment_of(self, event_id: str, local_id: str) -> bytes:
        book = self._book(event_id)
        if book.active is None:
            raise NotInRegister(f"no register for {event_id}")
        banned = book.blacklisted()
        for e in book.salts[book.active.version]:
            if e.voter_ref == local_id and e.commitment not in banned:
                return e.commitment
        raise NotInRegister(f"{local_id} has no active commitment in {event_id}")

    def prove_eligibility(self, event_id: str, local_id: str) -> EligibilityProof:
        commitment = self.active_commitment_of(event_id, local_id)
        register = self._book(event_id).active
        index = register.commitments.index(commitment)
        return EligibilityProof(commitment, tuple(merkle_path(register.commitments, index)),
                                register.merkle_root, register.version)

    def blacklist(self, event_id: str, commitments: Iterable[bytes],
                  reason: BlacklistReason = BlacklistReason.OTHER) -> bytes:
        book = self._book(event_id)
        commitments = tuple(commitments)
        versions = {}
        for c in commitments:
            found = [r.version for r in book.versions if c in r.commitments]
            if not found:
                raise UnknownCommitment(f"{c.hex()[:16]} is not in a {self.municipality} register")
            versions[c] = found[-1]
        receipt = self.network.transact(self.network.external_channel().channel_id, self.municipality,
                                        Chaincode.CM, "er.blacklist", {
                                            "event": event_id, "municipality": self.municipality,
                                            "commitments": commitments, "reason": BlacklistReason(reason),
                                        })
        known = book.blacklisted()
        for c in commitments:
            if c not in known:
                book.blacklist.append(BlacklistEntry(c, BlacklistReason(reason), versions[c], receipt.tx_id))
                known.add(c)
        return receipt.tx_id

    def reissue(self, event_id: str, target: Union[str, None], reason: BlacklistReason,
                reference_date: Optional[dt.date] = None) -> ElectoralRegister:
        """Re-issue the whole register (``ALL``) or one voter's commitment."""
        book = self._book(event_id)
        old = book.active
        if old is None:
            raise NotInRegister(f"no register for {event_id}")
        if target == ALL:
            stale = [c for c in old.commitments if c not in book.blacklisted()]
            if stale:
                self.blacklist(event_id, stale, reason)
            return self.generate_register(event_id, reference_date or self.network.today)
        previous = self.active_commitment_of(event_id, target)
        record = self.registry.get(target)
        if record is None:
            raise NotInRegister(target)
        self.blacklist(event_id, [previous], reason)
        salt = self._salt()
        fresh = VoterCommitment(commit(salt, record), salt, target)
        return self._publish(event_id, list(book.salts[old.version]) + [fresh])

    def one_active_commitment_violations(self, event_id: str) -> list[str]:
        book = self._book(event_id)
        if book.active is None:
            return []
        banned = book.blacklisted()
        per_voter: dict[str, int] = {}
        for e in book.salts[book.active.version]:
            per_voter.setdefault(e.voter_ref, 0)
            if e.commitment not in banned:
                per_voter[e.voter_ref] += 1
        return sorted(f"{v} has {n} active commitments" for v, n in per_voter.items() if n != 1)


def decode_salts(value: bytes) -> list[VoterCommitment]:
    return [VoterCommitment(c, s, ref) for ref, s, c in decode(value)]
