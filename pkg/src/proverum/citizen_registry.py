"""Citizen registries: private CRUD, voting restrictions, eligibility and relocation.

Each municipality keeps its citizen records in its own private collection.
Every change commits a digest on the municipality's cantonal channel; a
relocation commits its transfer-in and purge digests on the federal channel.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, replace
from enum import Enum
from typing import TYPE_CHECKING, Iterable, Mapping, Optional

from .encoding import H, decode, encode
from .errors import DecodeError, DuplicateId, InvalidRecord, NotOwner, SameMunicipality, UnknownId
from .privdata import (
    PrivateCollection,
    audit_collection,
    create_collection,
    purge_private,
    put_private,
    put_private_tx,
    verify_private,
)

if TYPE_CHECKING:
    from .network import Network

SWISS = "CH"
VOTING_AGE = 18


class ResidenceType(str, Enum):
    MAIN = "Main"
    SECONDARY = "Secondary"


@dataclass(frozen=True)
class CitizenRecord:
    local_person_id: str
    official_name: str
    first_name: str
    date_of_birth: dt.date
    nationality: str
    residence_municipality: str
    residence_type: ResidenceType = ResidenceType.MAIN
    voting_restriction: bool = False

    def to_bytes(self) -> bytes:
        return encode(("citizen", self.local_person_id, self.official_name, self.first_name,
                       self.date_of_birth, self.nationality, self.residence_municipality,
                       self.residence_type, self.voting_restriction))

    @classmethod
    def from_bytes(cls, data: bytes) -> "CitizenRecord":
        try:
            tag, pid, official, first, dob, nat, muni, rtype, restricted = decode(data)
            if tag != "citizen" or not isinstance(restricted, bool):
                raise DecodeError("not a citizen record")
            return cls(pid, official, first, dt.date.fromisoformat(dob), nat, muni,
                       ResidenceType(rtype), restricted)
        except (TypeError, ValueError) as exc:
            raise DecodeError("malformed citizen record") from exc

    def identity(self) -> bytes:
        """Simulator-internal cross-municipality identity of the person."""
        return H("person", self.official_name, self.first_name, self.date_of_birth)

    def pii_values(self) -> tuple[str, ...]:
        return (self.official_name, self.first_name, self.date_of_birth.isoformat())


@dataclass(frozen=True)
class EligibleVoter:
    record: CitizenRecord
    eligibility_date: dt.date


@dataclass(frozen=True)
class RelocationReceipt:
    person: bytes
    old_id: str
    new_id: str
    transfer_tx: bytes
    purge_tx: bytes


def age_on(date_of_birth: dt.date, reference: dt.date) -> int:
    before_birthday = (reference.month, reference.day) < (date_of_birth.month, date_of_birth.day)
    return reference.year - date_of_birth.year - before_birthday


def is_eligible(record: CitizenRecord, municipality: str, reference: dt.date) -> bool:
    return (
        record.nationality == SWISS
        and age_on(record.date_of_birth, reference) >= VOTING_AGE
        and record.residence_type is ResidenceType.MAIN
        and record.residence_municipality == municipality
        and not record.voting_restriction
    )


def _key(local_id: str) -> str:
    return f"cr/{local_id}"


class CitizenRegistry:
    def __init__(self, network: "Network", municipality: str):
        self.network = network
        self.municipality = municipality
        collection_id = f"{municipality}-registry"
        existing = network.collections.get(collection_id)
        self.collection: PrivateCollection = existing or create_collection(
            network, collection_id, municipality, [municipality])
        self.digest_channel: dict[str, str] = {}
        self.calls = 0

    # -- reads -----------------------------------------------------------

    def get(self, local_id: str) -> Optional[CitizenRecord]:
        raw = self.collection.read(self.municipality, _key(local_id))
        return None if raw is None else CitizenRecord.from_bytes(raw)

    def records(self) -> list[CitizenRecord]:
        keys = self.collection.keys(self.municipality, "cr/")
        return [CitizenRecord.from_bytes(self.collection.read(self.municipality, k)) for k in keys]

    def __contains__(self, local_id: str) -> bool:
        return self.get(local_id) is not None

    def next_local_id(self) -> str:
        used = {r.local_person_id for r in self.records()}
        n = len(used) + 1
        while f"{self.municipality}-{n:04d}" in used:
            n += 1
        return f"{self.municipality}-{n:04d}"

    # -- writes ----------------------------------------------------------

    def _owner(self, caller: str) -> None:
        if caller != self.municipality:
            raise NotOwner(f"{caller} does not own the {self.municipality} registry")

    def _validate(self, record: CitizenRecord) -> None:
        if record.residence_municipality != self.municipality:
            raise InvalidRecord(f"{record.local_person_id} resides in {record.residence_municipality}")
        if record.date_of_birth > self.network.today:
            raise InvalidRecord(f"{record.local_person_id} born in the simulated future")

    def _store(self, record: CitizenRecord, operation: str, channel_id: Optional[str] = None) -> bytes:
        channel_id = channel_id or self.network.cantonal_channel(self.municipality).channel_id
        self.network.register_pii(record.pii_values())
        digest = put_private(self.network, self.collection, self.municipality,
                             _key(record.local_person_id), record.to_bytes(), channel_id, operation)
        self.digest_channel[record.local_person_id] = channel_id
        self.calls += 1
        return digest

    def create_citizen(self, caller: str, record: CitizenRecord) -> bytes:
        self._owner(caller)
        if record.local_person_id in self:
            raise DuplicateId(record.local_person_id)
        self._validate(record)
        return self._store(record, "cr.create")

    def update_citizen(self, caller: str, record: CitizenRecord) -> bytes:
        self._owner(caller)
        if record.local_person_id not in self:
            raise UnknownId(record.local_person_id)
        self._validate(record)
        return self._store(record, "cr.update")

    def delete_citizen(self, caller: str, local_id: str) -> bytes:
        self._owner(caller)
        if local_id not in self:
            raise UnknownId(local_id)
        channel_id = self.network.cantonal_channel(self.municipality).channel_id
        receipt = purge_private(self.network, self.collection, self.municipality, _key(local_id),
                                channel_id, "cr.delete")
        self.digest_channel[local_id] = channel_id
        self.calls += 1
        return receipt.digest

    def set_voting_restriction(self, caller: str, local_id: str, restricted: bool) -> bytes:
        self._owner(caller)
        record = self.get(local_id)
        if record is None:
            raise UnknownId(local_id)
        return self._store(replace(record, voting_restriction=bool(restricted)), "cr.restrict")

    # -- eligibility and audit ------------------------------------------

    def derive_eligible(self, reference: dt.date) -> list[EligibleVoter]:
        return [
            EligibleVoter(r, reference)
            for r in sorted(self.records(), key=lambda r: r.local_person_id)
            if is_eligible(r, self.municipality, reference)
        ]

    def verify(self, local_id: str, peer: Optional[str] = None) -> bool:
        channel_id = self.digest_channel.get(local_id) or self.network.cantonal_channel(self.municipality).channel_id
        return verify_private(self.network, self.collection, self.municipality, _key(local_id), channel_id, peer)

    def audit(self) -> list[tuple[str, str]]:
        """Stored citizen values that diverge from their committed digests."""
        def channel_for(key: str) -> Optional[str]:
            if not key.startswith("cr/"):
                return None
            return self.digest_channel.get(key[3:])

        return audit_collection(self.network, self.collection, self.municipality, channel_for)

    def repair_from_peer(self, local_id: str) -> bool:
        """Restore divergent peer copies from a peer whose copy matches the chain."""
        key = _key(local_id)
        good = None
        for peer in self.collection.peers[self.municipality]:
            if self.verify(local_id, peer):
                good = self.collection.stores[peer][key]
                break
        if good is None:
            return False
        for peer in self.collection.peers[self.municipality]:
            self.collection.stores[peer][key] = good
        return True


def relocate(network: "Network", registries: Mapping[str, CitizenRegistry], source: str, target: str,
             local_id: str) -> RelocationReceipt:
    """Move a citizen's record from ``source`` to ``target`` in one simulation step."""
    if source == target:
        raise SameMunicipality(source)
    src, dst = registries[source], registries[target]
    record = src.get(local_id)
    if record is None:
        raise UnknownId(local_id)
    federal = network.federal_channel().channel_id
    new_id = dst.next_local_id()
    moved = replace(record, local_person_id=new_id, residence_municipality=target)
    network.register_pii(moved.pii_values())
    _, transfer = put_private_tx(network, dst.collection, target, _key(new_id), moved.to_bytes(),
                                 federal, "cr.transfer_in")
    dst.digest_channel[new_id] = federal
    # the purge goes where the source's digest lives, so the contract can tombstone it
    source_channel = src.digest_channel.get(local_id) or network.cantonal_channel(source).channel_id
    purge = purge_private(network, src.collection, source, _key(local_id), source_channel, "cr.purge")
    src.calls += 1
    dst.calls += 1
    return RelocationReceipt(record.identity(), local_id, new_id, transfer.tx_id, purge.tx_id)


def single_holder_violations(registries: Iterable[CitizenRegistry],
                             live_identities: Iterable[bytes]) -> list[str]:
    holders: dict[bytes, list[str]] = {}
    for registry in registries:
        for record in registry.records():
            holders.setdefault(record.identity(), []).append(registry.municipality)
    problems = [f"{k.hex()[:12]} held by {v}" for k, v in holders.items() if len(v) > 1]
    problems += [f"{k.hex()[:12]} held by nobody" for k in live_identities if k not in holders]
    return sorted(problems)
