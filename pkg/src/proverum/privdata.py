"""Private data collections.

Values live only in the stores of the collection's authorized members (one
store per peer); replication is synchronous at put time. The ordering
service only ever sees ``(collection, key, digest)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Optional

from .contracts import pd_key
from .encoding import decode, sha256
from .errors import NoOnChainDigest, NotAuthorized, UnknownKey
from .ledger import Chaincode, TxReceipt

if TYPE_CHECKING:
    from .network import Network


@dataclass(frozen=True)
class PrivateEntry:
    value: bytes
    digest: bytes


@dataclass(frozen=True)
class PurgeReceipt:
    key: str
    digest: bytes
    tx_id: bytes


class PrivateCollection:
    def __init__(self, collection_id: str, owner: str, authorized_members: Iterable[str],
                 peers: dict[str, list[str]]):
        self.collection_id = collection_id
        self.owner = owner
        self.authorized_members = frozenset(authorized_members)
        self.peers = {m: list(peers[m]) for m in self.authorized_members}
        self.stores: dict[str, dict[str, PrivateEntry]] = {
            p: {} for m in sorted(self.authorized_members) for p in self.peers[m]
        }

    def _check(self, caller: str) -> None:
        if caller not in self.authorized_members:
            raise NotAuthorized(f"{caller} is not authorized for {self.collection_id}")

    def primary_peer(self, member: str) -> str:
        return self.peers[member][0]

    def read(self, caller: str, key: str, peer: Optional[str] = None) -> Optional[bytes]:
        self._check(caller)
        entry = self.stores[peer or self.primary_peer(caller)].get(key)
        return None if entry is None else entry.value

    def keys(self, caller: str, prefix: str = "") -> list[str]:
        self._check(caller)
        return sorted(k for k in self.stores[self.primary_peer(caller)] if k.startswith(prefix))

    def _replicate(self, key: str, entry: Optional[PrivateEntry], members: Iterable[str]) -> None:
        for member in members:
            for peer in self.peers[member]:
                if entry is None:
                    self.stores[peer].pop(key, None)
                else:
                    self.stores[peer][key] = entry

    def all_values(self) -> Iterable[bytes]:
        for store in self.stores.values():
            for entry in store.values():
                yield entry.value


def create_collection(network: "Network", collection_id: str, owner: str,
                      authorized_members: Iterable[str]) -> PrivateCollection:
    members = sorted(set(authorized_members))
    peers = {m: network.directory.peers(m) or [m] for m in members}
    collection = PrivateCollection(collection_id, owner, members, peers)
    network.collections[collection_id] = collection
    return collection


def put_private(network: "Network", collection: PrivateCollection, caller: str, key: str, value: bytes,
                channel_id: str, operation: str = "pd.put") -> bytes:
    return put_private_tx(network, collection, caller, key, value, channel_id, operation)[0]


def put_private_tx(network: "Network", collection: PrivateCollection, caller: str, key: str, value: bytes,
                   channel_id: str, operation: str = "pd.put") -> tuple[bytes, TxReceipt]:
    collection._check(caller)
    digest = sha256(value)
    collection._replicate(key, PrivateEntry(value, digest), collection.authorized_members)
    receipt = network.transact(channel_id, caller, Chaincode.CM, operation, {
        "owner": caller, "collection": collection.collection_id, "key": key, "digest": digest,
    })
    return digest, receipt


def onchain_digest(network: "Network", collection: PrivateCollection, caller: str, key: str,
                   channel_id: str) -> Optional[tuple[bytes, bool]]:
    raw = network.channel(channel_id).query_state(Chaincode.CM, pd_key(collection.collection_id, key), caller)
    if raw is None:
        return None
    digest, live = decode(raw)
    return digest, live


def verify_private(network: "Network", collection: PrivateCollection, caller: str, key: str,
                   channel_id: str, peer: Optional[str] = None) -> bool:
    """True iff every checked peer copy hashes to the latest committed digest."""
    collection._check(caller)
    committed = onchain_digest(network, collection, caller, key, channel_id)
    if committed is None:
        raise NoOnChainDigest(f"{collection.collection_id}/{key} has no committed digest on {channel_id}")
    digest, _ = committed
    peers = [peer] if peer else collection.peers[caller]
    for p in peers:
        entry = collection.stores[p].get(key)
        if entry is None or sha256(entry.value) != digest:
            return False
    return True


def purge_private(network: "Network", collection: PrivateCollection, caller: str, key: str,
                  channel_id: str, operation: str = "pd.purge") -> PurgeReceipt:
    collection._check(caller)
    entry = collection.stores[collection.primary_peer(caller)].get(key)
    if entry is None:
        raise UnknownKey(f"{collection.collection_id}/{key}")
    collection._replicate(key, None, [caller])
    receipt = network.transact(channel_id, caller, Chaincode.CM, operation, {
        "owner": caller, "collection": collection.collection_id, "key": key, "digest": entry.digest,
    })
    return PurgeReceipt(key, entry.digest, receipt.tx_id)


def audit_collection(network: "Network", collection: PrivateCollection, caller: str,
                     channel_for_key) -> list[tuple[str, str]]:
    """``(peer, key)`` pairs whose stored value no longer matches its committed digest."""
    divergent = []
    for peer in collection.peers[caller]:
        for key, entry in sorted(collection.stores[peer].items()):
            channel_id = channel_for_key(key)
            if channel_id is None:
                continue
            committed = onchain_digest(network, collection, caller, key, channel_id)
            if committed is None or sha256(entry.value) != committed[0]:
                divergent.append((peer, key))
    return divergent
