"""Signed preliminary results, cantonal plausibility checks, aggregation and destruction commands."""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Mapping, Optional, Sequence

from .contracts import accepted_count_key, check_key, destroy_key, result_key
from .encoding import decode
from .errors import ChildFailedPlausibility, MissingChildResult, PrematureDestruction, UnsignedResult, WrongScope
from .ledger import Chaincode
from .pki import Role
from .records import ResultRecord, ScopeLevel, normalize_counts

if TYPE_CHECKING:
    from .artifact_lifecycle import ArtifactPipeline
    from .network import Network

TURNOUT_EXCEEDS_ELECTORATE = "TurnoutExceedsElectorate"
NEGATIVE_COUNT = "NegativeCount"
LOG_MISMATCH = "LogMismatch"
TURNOUT_OUT_OF_RANGE = "TurnoutOutOfRange"


@dataclass(frozen=True)
class PlausibilityResult:
    subject: str
    passed: bool
    reasons: tuple[str, ...]
    check_tx: Optional[bytes] = None
    recount_tx: Optional[bytes] = None


@dataclass(frozen=True)
class DestructionOutcome:
    municipality: str
    acted: bool
    reason: str
    command_tx: Optional[bytes] = None
    destroyed: int = 0


@dataclass(frozen=True)
class OutOfBandCommand:
    """A destruction order that did not arrive as a transaction, e.g. an e-mail."""

    sender: str
    event_id: str


def _rp_read(network: "Network", channel_id: str, key: str, caller: str) -> Optional[bytes]:
    return network.channel(channel_id).query_state(Chaincode.RP, key, caller)


def committed_result(network: "Network", channel_id: str, event_id: str, level: ScopeLevel, scope: str,
                     caller: str) -> Optional[ResultRecord]:
    raw = _rp_read(network, channel_id, result_key(event_id, level, scope), caller)
    return None if raw is None else ResultRecord.from_bytes(raw)


def submit_record(network: "Network", channel_id: str, record: ResultRecord, operation: str = "rp.submit",
                  children: Sequence[bytes] = ()) -> bytes:
    if record.signature is None:
        raise UnsignedResult(f"{record.scope} {record.event_id}")
    args = {"event": record.event_id, "record": record.to_bytes()}
    if operation == "rp.aggregate":
        args["children"] = tuple(children)
    return network.transact(channel_id, record.submitter, Chaincode.RP, operation, args).tx_id


def submit_municipal_result(network: "Network", municipality: str, event_id: str, counts: Mapping[str, int],
                            electorate_size: int) -> bytes:
    if network.directory.authority(municipality).role is not Role.MUNICIPALITY:
        raise WrongScope(f"{municipality} cannot submit a municipal result")
    record = ResultRecord(ScopeLevel.MUNICIPALITY, municipality, event_id, normalize_counts(counts),
                          electorate_size, municipality).signed(network.directory.publication_key(municipality))
    return submit_record(network, network.cantonal_channel(municipality).channel_id, record)


def evaluate_plausibility(record: ResultRecord, logged_accepted: int) -> tuple[str, ...]:
    """The deterministic rule set; an empty tuple means Pass."""
    reasons = []
    total = record.total
    if total > record.electorate_size:
        reasons.append(TURNOUT_EXCEEDS_ELECTORATE)
    if any(n < 0 for _, n in record.counts):
        reasons.append(NEGATIVE_COUNT)
    if total != logged_accepted:
        reasons.append(LOG_MISMATCH)
    if record.electorate_size <= 0:
        turnout_ok = total == 0
    else:
        turnout_ok = 0 <= total / record.electorate_size <= 1
    if not turnout_ok:
        reasons.append(TURNOUT_OUT_OF_RANGE)
    return tuple(reasons)


def logged_acceptances(network: "Network", event_id: str, municipality: str, caller: str) -> int:
    raw = network.external_channel().query_state(Chaincode.CM, accepted_count_key(event_id, municipality), caller)
    return 0 if raw is None else int(decode(raw))


def plausibility_check(network: "Network", canton: str, municipality: str, event_id: str) -> PlausibilityResult:
    channel_id = network.cantonal_channel(canton).channel_id
    record = committed_result(network, channel_id, event_id, ScopeLevel.MUNICIPALITY, municipality, canton)
    if record is None:
        raise MissingChildResult(f"{municipality} has no committed result for {event_id}")
    reasons = evaluate_plausibility(record, logged_acceptances(network, event_id, municipality, canton))
    check_tx = network.transact(channel_id, canton, Chaincode.RP, "rp.check", {
        "event": event_id, "subject": municipality, "passed": not reasons, "reasons": reasons,
    }).tx_id
    recount_tx = None
    if reasons:
        recount_tx = network.transact(channel_id, canton, Chaincode.RP, "rp.recount", {
            "event": event_id, "subject": municipality, "reasons": reasons,
        }).tx_id
    return PlausibilityResult(municipality, not reasons, reasons, check_tx, recount_tx)


def _sum(records: Sequence[ResultRecord]) -> dict[str, int]:
    total: dict[str, int] = {}
    for r in records:
        for choice, n in r.counts:
            total[choice] = total.get(choice, 0) + n
    return total


def aggregate(network: "Network", authority: str, event_id: str) -> tuple[ResultRecord, bytes]:
    """Sum the checked child results one scope up and commit the signed aggregate on the federal channel."""
    role = network.directory.authority(authority).role
    federal = network.federal_channel().channel_id
    children: list[ResultRecord] = []
    raws: list[bytes] = []
    if role is Role.CANTON:
        level = ScopeLevel.CANTON
        cantonal = network.cantonal_channel(authority).channel_id
        for child in sorted(a.name for a in network.directory.children(authority)):
            raw = _rp_read(network, cantonal, result_key(event_id, ScopeLevel.MUNICIPALITY, child), authority)
            if raw is None:
                raise MissingChildResult(f"{child} has no result for {event_id}")
            check = _rp_read(network, cantonal, check_key(event_id, child), authority)
            if check is None or not decode(check)[0]:
                detail = "unchecked" if check is None else ",".join(decode(check)[1])
                raise ChildFailedPlausibility(f"{child}: {detail}")
            children.append(ResultRecord.from_bytes(raw))
            raws.append(raw)
    elif role is Role.CONFEDERATION:
        level = ScopeLevel.FEDERAL
        for child in network.cantons():
            raw = _rp_read(network, federal, result_key(event_id, ScopeLevel.CANTON, child), authority)
            if raw is None:
                raise MissingChildResult(f"{child} has no aggregate for {event_id}")
            children.append(ResultRecord.from_bytes(raw))
            raws.append(raw)
    else:
        raise WrongScope(f"{authority} does not aggregate results")
    record = ResultRecord(level, authority, event_id, normalize_counts(_sum(children)),
                          sum(c.electorate_size for c in children), authority)
    record = record.signed(network.directory.publication_key(authority))
    return record, submit_record(network, federal, record, "rp.aggregate", raws)


def authorize_destruction(network: "Network", authority: str, event_id: str) -> tuple[bytes, ...]:
    federal = network.federal_channel().channel_id
    confederation = network.confederation()
    if committed_result(network, federal, event_id, ScopeLevel.FEDERAL, confederation, authority) is None:
        raise PrematureDestruction(f"no federal result for {event_id} yet")
    role = network.directory.authority(authority).role
    if role is Role.CONFEDERATION:
        channels = [network.cantonal_channel(c).channel_id for c in network.cantons()]
    elif role is Role.CANTON:
        channels = [network.cantonal_channel(authority).channel_id]
    else:
        raise WrongScope(f"{authority} cannot order destruction")
    return tuple(
        network.transact(c, authority, Chaincode.RP, "rp.destroy", {"event": event_id}).tx_id
        for c in channels
    )


def committed_destruction(network: "Network", municipality: str, event_id: str) -> Optional[bytes]:
    """Tx id of the valid destruction command on the municipality's channel, if committed."""
    channel = network.cantonal_channel(municipality)
    if _rp_read(network, channel.channel_id, destroy_key(event_id), municipality) is None:
        return None
    for _, entry in channel.entries("rp.destroy", valid=True):
        if entry.tx.arg("event") == event_id:
            return entry.tx.tx_id
    return None


def process_destruction(network: "Network", pipeline: "ArtifactPipeline", municipality: str, event_id: str,
                        command: Optional[OutOfBandCommand] = None) -> DestructionOutcome:
    """Act only on a command committed on the municipality's own channel."""
    if command is not None:
        return DestructionOutcome(municipality, False, f"out-of-band command from {command.sender} ignored")
    tx_id = committed_destruction(network, municipality, event_id)
    if tx_id is None:
        return DestructionOutcome(municipality, False, "no committed destruction command")
    destroyed = pipeline.destroy(municipality)
    network.transact(network.cantonal_channel(municipality).channel_id, municipality, Chaincode.CM,
                     "ve.destroyed", {"event": event_id, "command_tx": tx_id, "count": destroyed})
    return DestructionOutcome(municipality, True, "", tx_id, destroyed)


def committed_results(network: "Network", event_id: str) -> list[tuple[ResultRecord, bytes]]:
    """The latest valid committed result per scope of an event with its tx id, municipal first."""
    latest: dict[tuple[ScopeLevel, str], tuple[ResultRecord, bytes]] = {}
    for channel_id in sorted(network.channels):
        channel = network.channel(channel_id)
        if Chaincode.RP not in channel.chaincodes:
            continue
        for _, entry in channel.entries(valid=True):
            if entry.tx.operation in ("rp.submit", "rp.aggregate") and entry.tx.arg("event") == event_id:
                record = ResultRecord.from_bytes(entry.tx.arg("record"))
                latest[(record.level, record.scope)] = (record, entry.tx.tx_id)
    order = {ScopeLevel.MUNICIPALITY: 0, ScopeLevel.CANTON: 1, ScopeLevel.FEDERAL: 2}
    return sorted(latest.values(), key=lambda p: (order[p[0].level], p[0].scope))


def export_tallies(results: Sequence[tuple[ResultRecord, bytes]]) -> str:
    lines = ["level\tscope\tevent\tcounts\telectorate\ttx\tsignature"]
    for record, tx_id in results:
        sig = record.signature.value.hex() if record.signature else ""
        lines.append(f"{record.render()}\t{tx_id.hex()}\t{sig}")
    return "\n".join(lines) + "\n"


def recount_from_logs(reception_rows, ballots: Mapping[str, str]) -> dict[str, int]:
    """Independent fold: count the ballot of every accepted line of a reception log."""
    counts = {c: 0 for c, _ in normalize_counts({})}
    for _, serial, _, decision, _ in reception_rows:
        if decision == "Accepted":
            counts[ballots[serial]] += 1
    return counts
