"""Topology configuration: a small line-oriented format and the prototype default.

Format, one directive per line, ``#`` starts a comment::

    authority <name> <role> [parent]
    peers <n>
    ordering <member,member,...>
    channel <id> <kind>[:<scope>] <CM,RP> <member,member,...>
    public-env <1,2,3>
    poa-producers <member,member,...>

``ordering`` must come before any ``channel`` line.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from typing import Optional

from ..errors import ParseError, ProverumError
from ..ledger import Chaincode
from ..network import Network
from ..pki import Role

DEFAULT_TOPOLOGY = """\
# prototype network: one confederation, two cantons with two municipalities each,
# the postal operator and one artifact printer
authority Confederation Confederation
authority Zurich Canton Confederation
authority Bern Canton Confederation
authority Uster Municipality Zurich
authority Winterthur Municipality Zurich
authority Bern-city Municipality Bern
authority Thun Municipality Bern
authority ESP1 ESP
authority SwissPost SwissPost
peers 2
ordering Confederation,Zurich,Bern,Uster,Winterthur,Bern-city,Thun
channel federal federal CM,RP Confederation,Zurich,Bern,Uster,Winterthur,Bern-city,Thun
channel canton-zurich cantonal:Zurich CM,RP Confederation,Zurich,Uster,Winterthur
channel canton-bern cantonal:Bern CM,RP Confederation,Bern,Bern-city,Thun
channel external external CM Confederation,Zurich,Bern,Uster,Winterthur,Bern-city,Thun,ESP1,SwissPost
public-env 1,2,3
poa-producers Confederation,Zurich,Bern
"""

KINDS = ("federal", "cantonal", "external")


@dataclass(frozen=True)
class AuthoritySpec:
    name: str
    role: Role
    parent: Optional[str] = None


@dataclass(frozen=True)
class ChannelSpec:
    channel_id: str
    kind: str
    scope: Optional[str]
    chaincodes: tuple[Chaincode, ...]
    members: tuple[str, ...]


@dataclass
class TopologyConfig:
    authorities: list[AuthoritySpec] = field(default_factory=list)
    peers: int = 2
    ordering: tuple[str, ...] = ()
    channels: list[ChannelSpec] = field(default_factory=list)
    public_env: tuple[int, ...] = (1, 2, 3)
    poa_producers: tuple[str, ...] = ()


def _names(text: str, line: int, column: int) -> tuple[str, ...]:
    names = tuple(n for n in text.split(",") if n)
    if not names:
        raise ParseError("empty list", line, column)
    return names


def parse_topology(text: str) -> TopologyConfig:
    config = TopologyConfig()
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        words = line.split()
        columns = []
        pos = 0
        for w in words:
            pos = line.index(w, pos)
            columns.append(pos + 1)
            pos += len(w)
        verb, args = words[0], words[1:]

        def need(count: int, most: Optional[int] = None) -> None:
            if len(args) < count or (most is not None and len(args) > most):
                raise ParseError(f"{verb} takes {count}{'' if most == count else '+'} arguments", n,
                                 columns[-1] + len(words[-1]))

        if verb == "authority":
            need(2, 3)
            try:
                role = Role(args[1])
            except ValueError:
                raise ParseError(f"unknown role {args[1]!r}", n, columns[2]) from None
            config.authorities.append(AuthoritySpec(args[0], role, args[2] if len(args) == 3 else None))
        elif verb == "peers":
            need(1, 1)
            if not args[0].isdigit() or int(args[0]) < 1:
                raise ParseError("peers must be a positive integer", n, columns[1])
            config.peers = int(args[0])
        elif verb == "ordering":
            need(1, 1)
            config.ordering = _names(args[0], n, columns[1])
        elif verb == "channel":
            need(4, 4)
            kind, _, scope = args[1].partition(":")
            if kind not in KINDS:
                raise ParseError(f"unknown channel kind {kind!r}", n, columns[2])
            try:
                chaincodes = tuple(Chaincode(c) for c in _names(args[2], n, columns[3]))
            except ValueError:
                raise ParseError(f"unknown chaincode in {args[2]!r}", n, columns[3]) from None
            config.channels.append(ChannelSpec(args[0], kind, scope or None, chaincodes,
                                               _names(args[3], n, columns[4])))
        elif verb == "public-env":
            need(1, 1)
            try:
                options = tuple(sorted({int(o) for o in _names(args[0], n, columns[1])}))
            except ValueError:
                raise ParseError("public-env takes option numbers", n, columns[1]) from None
            if any(o not in (1, 2, 3) for o in options):
                raise ParseError("public-env options are 1, 2 and 3", n, columns[1])
            config.public_env = options
        elif verb == "poa-producers":
            need(1, 1)
            config.poa_producers = _names(args[0], n, columns[1])
        else:
            raise ParseError(f"unknown directive {verb!r}", n, columns[0])
    if not config.ordering:
        raise ParseError("missing ordering directive", max(1, len(text.splitlines())))
    return config


def default_config() -> TopologyConfig:
    return parse_topology(DEFAULT_TOPOLOGY)


def build_topology(config: TopologyConfig, seed: int, today: dt.date = dt.date(2020, 9, 27)) -> Network:
    network = Network(seed, today)
    for spec in config.authorities:
        network.directory.create_authority(spec.name, spec.role, spec.parent)
    for spec in config.authorities:
        network.directory.provision(spec.name, config.peers)
    network.set_policy(config.ordering)
    for spec in config.channels:
        network.add_channel(spec.channel_id, spec.members, spec.chaincodes, spec.kind, spec.scope)
    for kind in ("federal", "external"):
        if not any(c.kind == kind for c in config.channels):
            raise ProverumError(f"topology needs a {kind} channel")
    return network
