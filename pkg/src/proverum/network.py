"""The private environment: authorities, channels, private collections and the clock."""

from __future__ import annotations

import datetime as dt
from typing import Any, Callable, Iterable, Mapping, Optional

from .contracts import CONTRACTS
from .errors import UnknownMember
from .ledger import Block, Chaincode, Channel, ConsensusPolicy, TxReceipt, create_channel, make_transaction
from .pki import Directory, Role
from .rng import SeededRandomness

# country-scale constants of a full deployment
CANTONAL_LEDGERS = 26
MUNICIPALITIES = 2202
# sub-tick resolution of transaction timestamps
TICK = 1 << 20


class Network:
    def __init__(self, seed: int, today: dt.date = dt.date(2020, 9, 27)):
        self.seed = seed
        self.rng = SeededRandomness(seed)
        self.directory = Directory(self.rng)
        self.channels: dict[str, Channel] = {}
        self.collections: dict[str, Any] = {}
        self.policy: Optional[ConsensusPolicy] = None
        self.clock = 0
        self._sequence = 0
        self.today = today
        self.registry = CONTRACTS
        self.pii: set[str] = set()
        self.commit_hooks: list[Callable[[int], None]] = []

    # -- topology --------------------------------------------------------

    def set_policy(self, ordering_members: Iterable[str]) -> ConsensusPolicy:
        policy = ConsensusPolicy(tuple(ordering_members))
        policy.validate(self.directory)
        self.policy = policy
        return policy

    def add_channel(self, channel_id: str, members: Iterable[str], chaincodes: Iterable[Chaincode],
                    kind: str = "", scope: Optional[str] = None) -> Channel:
        if self.policy is None:
            raise UnknownMember("ordering service must be configured before channels")
        if channel_id in self.channels:
            raise ValueError(f"duplicate channel {channel_id}")
        channel = create_channel(channel_id, members, chaincodes, self.directory, self.policy,
                                 self.registry, kind, scope)
        self.channels[channel_id] = channel
        return channel

    def channel(self, channel_id: str) -> Channel:
        return self.channels[channel_id]

    def _of_kind(self, kind: str, scope: Optional[str] = None) -> Channel:
        for channel in self.channels.values():
            if channel.kind == kind and (scope is None or channel.scope == scope):
                return channel
        raise UnknownMember(f"no {kind} channel" + (f" for {scope}" if scope else ""))

    def federal_channel(self) -> Channel:
        return self._of_kind("federal")

    def external_channel(self) -> Channel:
        return self._of_kind("external")

    def cantonal_channel(self, authority: str) -> Channel:
        a = self.directory.authority(authority)
        canton = a.name if a.role is Role.CANTON else a.parent
        return self._of_kind("cantonal", canton)

    def municipalities(self) -> list[str]:
        return sorted(a.name for a in self.directory.of_role(Role.MUNICIPALITY))

    def cantons(self) -> list[str]:
        return sorted(a.name for a in self.directory.of_role(Role.CANTON))

    def confederation(self) -> str:
        return self.directory.of_role(Role.CONFEDERATION)[0].name

    def one_of(self, role: Role) -> str:
        found = sorted(a.name for a in self.directory.of_role(role))
        if not found:
            raise UnknownMember(f"no {role.value} in topology")
        return found[0]

    # -- transactions ----------------------------------------------------

    def transact(self, channel_id: str, submitter: str, chaincode: Chaincode, operation: str,
                 args: Mapping[str, Any]) -> TxReceipt:
        # successive submissions within a tick stay in submission order, so dependent writes commit in sequence
        self._sequence += 1
        tx = make_transaction(self.directory, submitter, chaincode, operation, args,
                              self.clock * TICK + self._sequence)
        return self.channels[channel_id].submit(tx)

    def commit(self, channel_ids: Optional[Iterable[str]] = None) -> list[Block]:
        """Cut a block on every channel with pending transactions, then advance the clock."""
        ids = sorted(self.channels) if channel_ids is None else list(channel_ids)
        blocks = []
        for channel_id in ids:
            block = self.channels[channel_id].cut_scheduled()
            if block is not None:
                blocks.append(block)
        self.clock += 1
        self._sequence = 0
        for hook in self.commit_hooks:
            hook(self.clock)
        return blocks

    def advance(self, ticks: int = 1) -> None:
        for _ in range(ticks):
            self.commit()

    def orderer_visible_bytes(self) -> bytes:
        return b"".join(self.channels[c].orderer_visible_bytes() for c in sorted(self.channels))

    def register_pii(self, values: Iterable[str]) -> None:
        self.pii.update(v for v in values if v)
