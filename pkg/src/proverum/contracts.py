"""Chaincode handlers for the Citizen Management (CM) and Result Publication (RP) contracts.

Handlers are pure functions of ``(world state, transaction, context)`` so a
channel can be replayed from genesis. They raise :class:`ContractRejection`
to flag a transaction invalid; the channel then commits it with the reason
and discards its writes.
"""

from __future__ import annotations

from typing import Iterable

from .encoding import decode, encode
from .ledger import Chaincode, ContractRegistry, ContractRejection, ExecutionContext, SignedTransaction, StateView
from .merkle import list_digest, merkle_root
from .pki import Role, publication_key_label, verify
from .records import ResultRecord, ScopeLevel

CONTRACTS = ContractRegistry()
cm = lambda op: CONTRACTS.register(Chaincode.CM, op)  # noqa: E731
rp = lambda op: CONTRACTS.register(Chaincode.RP, op)  # noqa: E731

PUT_OPERATIONS = ("pd.put", "cr.create", "cr.update", "cr.restrict", "cr.transfer_in", "er.salts")
PURGE_OPERATIONS = ("pd.purge", "cr.delete", "cr.purge")
REGISTRY_OPERATIONS = ("cr.create", "cr.update", "cr.restrict", "cr.transfer_in", "cr.delete", "cr.purge")

# envelope lifecycle moves that may be logged through ``ve.status``
STATUS_MOVES = {
    "Manufactured": {"AtPost", "Blacklisted"},
    "AtPost": {"Delivered", "Blacklisted"},
    "Delivered": {"Cast", "Blacklisted"},
    "Cast": {"Blacklisted"},
    "ReceivedByMunicipality": {"Counted"},
    "Blacklisted": set(),
    "Counted": set(),
    "Rejected": set(),
}


# -- world-state keys ----------------------------------------------------------

def pd_key(collection: str, key: str) -> str:
    return f"pd/{collection}/{key}"


def er_active_key(event: str, municipality: str) -> str:
    return f"er/{event}/{municipality}/active"


def er_version_key(event: str, municipality: str, version: int) -> str:
    return f"er/{event}/{municipality}/v{version}"


def commitment_key(commitment: bytes) -> str:
    return f"erc/{commitment.hex()}"


def blacklist_key(event: str, commitment: bytes) -> str:
    return f"bl/{event}/{commitment.hex()}"


def envelope_key(serial: str) -> str:
    return f"ve/{serial}"


def accepted_key(event: str, commitment: bytes) -> str:
    return f"rx/{event}/{commitment.hex()}"


def reception_log_prefix(event: str, municipality: str = "") -> str:
    return f"rxlog/{event}/{municipality + '/' if municipality else ''}"


def accepted_count_key(event: str, municipality: str) -> str:
    return f"rxcount/{event}/{municipality}"


def result_key(event: str, level: ScopeLevel, scope: str) -> str:
    return f"rp/{event}/{ScopeLevel(level).value}/{scope}"


def check_key(event: str, scope: str) -> str:
    return f"check/{event}/{scope}"


def recount_key(event: str, scope: str) -> str:
    return f"recount/{event}/{scope}"


def destroy_key(event: str) -> str:
    return f"destroy/{event}"


# -- small helpers -------------------------------------------------------------

def _require(condition: bool, reason: str) -> None:
    if not condition:
        raise ContractRejection(reason)


def _digest_arg(tx: SignedTransaction, name: str = "digest") -> bytes:
    value = tx.args[name]
    _require(isinstance(value, bytes) and len(value) == 32, f"Bad{name.title()}")
    return value


def _commitments_arg(tx: SignedTransaction) -> tuple[bytes, ...]:
    values = tuple(tx.args["commitments"])
    _require(all(isinstance(c, bytes) and len(c) == 32 for c in values), "BadCommitment")
    return values


def _int_value(raw: bytes | None, default: int = 0) -> int:
    return default if raw is None else int(decode(raw))


def register_state(state, event: str, municipality: str):
    """Active ``(version, list_digest, root, commitments)`` of a register, or ``None``."""
    raw = state.get(er_active_key(event, municipality))
    if raw is None:
        return None
    version = int(decode(raw))
    digest, root, commitments = decode(state.get(er_version_key(event, municipality, version)))
    return version, digest, root, tuple(commitments)


# -- CM: private-data digests --------------------------------------------------

def _put_digest(view: StateView, tx: SignedTransaction, ctx: ExecutionContext) -> None:
    owner = tx.args["owner"]
    _require(owner == tx.submitter, "NotOwner")
    key = pd_key(tx.args["collection"], tx.args["key"])
    digest = _digest_arg(tx)
    current = view.get(key)
    live = current is not None and decode(current)[1]
    if tx.operation == "cr.create" or tx.operation == "cr.transfer_in":
        _require(not live, "DuplicateId")
    elif tx.operation in ("cr.update", "cr.restrict"):
        _require(live, "UnknownId")
    view.put(key, encode((digest, True)))


def _purge_digest(view: StateView, tx: SignedTransaction, ctx: ExecutionContext) -> None:
    _require(tx.args["owner"] == tx.submitter, "NotOwner")
    key = pd_key(tx.args["collection"], tx.args["key"])
    current = view.get(key)
    _require(current is not None and decode(current)[1], "UnknownKey")
    digest = _digest_arg(tx)
    _require(decode(current)[0] == digest, "PurgeDigestMismatch")
    view.put(key, encode((digest, False)))


for _op in PUT_OPERATIONS:
    cm(_op)(_put_digest)
for _op in PURGE_OPERATIONS:
    cm(_op)(_purge_digest)


# -- CM: electoral registers ---------------------------------------------------

@cm("er.publish")
def _publish_register(view: StateView, tx: SignedTransaction, ctx: ExecutionContext) -> None:
    event, municipality = tx.args["event"], tx.args["municipality"]
    _require(tx.submitter == municipality and ctx.role(municipality) is Role.MUNICIPALITY, "NotOwner")
    commitments = _commitments_arg(tx)
    _require(len(set(commitments)) == len(commitments), "DuplicateCommitment")
    _require(list_digest(commitments) == _digest_arg(tx, "list_digest"), "ListDigestMismatch")
    _require(merkle_root(commitments) == _digest_arg(tx, "merkle_root"), "MerkleRootMismatch")
    active = view.get(er_active_key(event, municipality))
    expected = 1 if active is None else int(decode(active)) + 1
    _require(tx.args["version"] == expected, "VersionOutOfOrder")
    for c in commitments:
        index = view.get(commitment_key(c))
        if index is not None:
            _require(tuple(decode(index)[:2]) == (event, municipality), "ForeignCommitment")
        else:
            view.put(commitment_key(c), encode((event, municipality, expected)))
    view.put(er_version_key(event, municipality, expected),
             encode((tx.args["list_digest"], tx.args["merkle_root"], commitments)))
    view.put(er_active_key(event, municipality), encode(expected))


@cm("er.blacklist")
def _blacklist(view: StateView, tx: SignedTransaction, ctx: ExecutionContext) -> None:
    event, municipality = tx.args["event"], tx.args["municipality"]
    _require(tx.submitter == municipality, "NotOwner")
    commitments = _commitments_arg(tx)
    _require(bool(commitments), "EmptyBlacklist")
    for c in commitments:
        index = view.get(commitment_key(c))
        _require(index is not None and tuple(decode(index)[:2]) == (event, municipality), "UnknownCommitment")
        if view.get(blacklist_key(event, c)) is None:
            view.put(blacklist_key(event, c), encode((tx.args["reason"], municipality)))


# -- CM: voting-envelope lifecycle ---------------------------------------------

@cm("ve.manufacture")
def _manufacture(view: StateView, tx: SignedTransaction, ctx: ExecutionContext) -> None:
    _require(ctx.role(tx.submitter) is Role.ESP, "NotManufacturer")
    serial = tx.args["serial"]
    _require(view.get(envelope_key(serial)) is None, "DuplicateSerial")
    commitment = tx.args["commitment"]
    _require(isinstance(commitment, bytes) and len(commitment) == 32, "BadCommitment")
    view.put(envelope_key(serial), encode(("Manufactured", tx.submitter, commitment,
                                           tx.args["event"], tx.args["municipality"])))


@cm("ve.status")
def _envelope_status(view: StateView, tx: SignedTransaction, ctx: ExecutionContext) -> None:
    serial, status, holder = tx.args["serial"], tx.args["status"], tx.args["holder"]
    raw = view.get(envelope_key(serial))
    _require(raw is not None, "UnknownEnvelope")
    current, _, commitment, event, municipality = decode(raw)
    _require(status in STATUS_MOVES.get(current, set()), f"IllegalTransition:{current}->{status}")
    role = ctx.role(tx.submitter)
    if status == "Blacklisted":
        _require(tx.submitter == municipality, "NotOwner")
    elif status == "Counted":
        _require(tx.submitter == municipality, "NotOwner")
    else:
        _require(role is Role.SWISS_POST, "NotCarrier")
    view.put(envelope_key(serial), encode((status, holder, commitment, event, municipality)))


@cm("ve.batch")
def _batch_report(view: StateView, tx: SignedTransaction, ctx: ExecutionContext) -> None:
    _require(ctx.role(tx.submitter) is Role.SWISS_POST, "NotCarrier")
    key = f"batch/{tx.args['event']}/{tx.args['municipality']}/v{tx.args['version']}"
    view.put(key, encode((tx.args["complete"], tuple(tx.args["missing"]), tuple(tx.args["foreign"]))))


@cm("ve.report")
def _theft_report(view: StateView, tx: SignedTransaction, ctx: ExecutionContext) -> None:
    event, municipality = tx.args["event"], tx.args["municipality"]
    counter = f"reports/{event}/{municipality}"
    n = _int_value(view.get(counter)) + 1
    view.put(counter, encode(n))
    view.put(f"report/{event}/{municipality}/{n:06d}",
             encode((tx.args["kind"], tx.submitter, _commitments_arg(tx))))


@cm("ve.receive")
def _receive(view: StateView, tx: SignedTransaction, ctx: ExecutionContext) -> None:
    event, municipality = tx.args["event"], tx.args["municipality"]
    _require(tx.submitter == municipality and ctx.role(municipality) is Role.MUNICIPALITY, "NotOwner")
    commitment = tx.args["commitment"]
    _require(isinstance(commitment, bytes) and len(commitment) == 32, "BadCommitment")
    decision, reason, serial = tx.args["decision"], tx.args["reason"], tx.args["serial"]
    _require(decision in ("Accepted", "Rejected"), "BadDecision")
    if decision == "Accepted":
        register = register_state(view, event, municipality)
        _require(register is not None and commitment in register[3], "AcceptanceNotInRegister")
        _require(view.get(blacklist_key(event, commitment)) is None, "AcceptanceBlacklisted")
        _require(view.get(accepted_key(event, commitment)) is None, "AcceptanceDuplicate")
        view.put(accepted_key(event, commitment), encode((serial, municipality)))
        count_key = accepted_count_key(event, municipality)
        view.put(count_key, encode(_int_value(view.get(count_key)) + 1))
    seq_key = f"rxseq/{event}/{municipality}"
    seq = _int_value(view.get(seq_key)) + 1
    view.put(seq_key, encode(seq))
    view.put(f"{reception_log_prefix(event, municipality)}{seq:06d}",
             encode((serial, commitment, decision, reason)))
    raw = view.get(envelope_key(serial))
    if raw is not None:
        _, _, c, e, m = decode(raw)
        status = "ReceivedByMunicipality" if decision == "Accepted" else "Rejected"
        view.put(envelope_key(serial), encode((status, municipality, c, e, m)))


@cm("ve.destroyed")
def _destroyed(view: StateView, tx: SignedTransaction, ctx: ExecutionContext) -> None:
    _require(ctx.role(tx.submitter) is Role.MUNICIPALITY, "NotOwner")
    view.put(f"destroyed/{tx.args['event']}/{tx.submitter}", encode((tx.args["command_tx"], tx.args["count"])))


@cm("ve.alert")
def _alert(view: StateView, tx: SignedTransaction, ctx: ExecutionContext) -> None:
    counter = "alerts"
    n = _int_value(view.get(counter)) + 1
    view.put(counter, encode(n))
    view.put(f"alert/{n:06d}", encode((tx.args["kind"], tx.submitter, tx.args["detail"])))


# -- RP: results ---------------------------------------------------------------

def _verified_record(raw: bytes, ctx: ExecutionContext) -> ResultRecord:
    _require(isinstance(raw, bytes), "MalformedRecord")
    record = ResultRecord.from_bytes(raw)
    _require(record.signature is not None, "UnsignedResult")
    cert = ctx.certificates.certificate(publication_key_label(record.submitter))
    _require(verify(cert, record.payload(), record.signature), "ResultSignatureInvalid")
    _require(all(isinstance(n, int) and n >= 0 for _, n in record.counts), "NegativeCount")
    _require(record.electorate_size >= 0, "NegativeElectorate")
    return record


def _sum_counts(records: Iterable[ResultRecord]) -> dict[str, int]:
    total: dict[str, int] = {}
    for r in records:
        for choice, n in r.counts:
            total[choice] = total.get(choice, 0) + n
    return total


@rp("rp.submit")
def _submit_result(view: StateView, tx: SignedTransaction, ctx: ExecutionContext) -> None:
    record = _verified_record(tx.args["record"], ctx)
    _require(record.level is ScopeLevel.MUNICIPALITY, "WrongScope")
    _require(record.submitter == tx.submitter == record.scope, "WrongScope")
    _require(ctx.role(tx.submitter) is Role.MUNICIPALITY, "WrongScope")
    _require(record.event_id == tx.args["event"], "EventMismatch")
    key = result_key(record.event_id, record.level, record.scope)
    if view.get(key) is not None:
        _require(view.get(recount_key(record.event_id, record.scope)) is not None, "DuplicateResult")
        view.delete(recount_key(record.event_id, record.scope))
        view.delete(check_key(record.event_id, record.scope))
    view.put(key, record.to_bytes())


@rp("rp.check")
def _plausibility(view: StateView, tx: SignedTransaction, ctx: ExecutionContext) -> None:
    subject, event = tx.args["subject"], tx.args["event"]
    _require(ctx.role(tx.submitter) is Role.CANTON and ctx.parents.get(subject) == tx.submitter, "WrongScope")
    _require(view.get(result_key(event, ScopeLevel.MUNICIPALITY, subject)) is not None, "NoResult")
    view.put(check_key(event, subject), encode((bool(tx.args["passed"]), tuple(tx.args["reasons"]))))


@rp("rp.recount")
def _recount(view: StateView, tx: SignedTransaction, ctx: ExecutionContext) -> None:
    subject, event = tx.args["subject"], tx.args["event"]
    _require(ctx.role(tx.submitter) is Role.CANTON and ctx.parents.get(subject) == tx.submitter, "WrongScope")
    view.put(recount_key(event, subject), encode(tuple(tx.args["reasons"])))


@rp("rp.aggregate")
def _aggregate(view: StateView, tx: SignedTransaction, ctx: ExecutionContext) -> None:
    record = _verified_record(tx.args["record"], ctx)
    _require(record.submitter == tx.submitter == record.scope, "WrongScope")
    role = ctx.role(tx.submitter)
    if record.level is ScopeLevel.CANTON:
        _require(role is Role.CANTON, "WrongScope")
        expected_children = ctx.children(record.scope)
        child_level = ScopeLevel.MUNICIPALITY
    elif record.level is ScopeLevel.FEDERAL:
        _require(role is Role.CONFEDERATION, "WrongScope")
        expected_children = sorted(n for n, r in ctx.roles.items() if r is Role.CANTON)
        child_level = ScopeLevel.CANTON
    else:
        raise ContractRejection("WrongScope")
    children = [_verified_record(raw, ctx) for raw in tx.args["children"]]
    _require(all(c.level is child_level and c.event_id == record.event_id for c in children), "ChildScopeMismatch")
    _require(sorted(c.scope for c in children) == expected_children, "MissingChildResult")
    _require(_sum_counts(children) == _sum_counts([record]), "AggregateSumMismatch")
    _require(sum(c.electorate_size for c in children) == record.electorate_size, "ElectorateSumMismatch")
    key = result_key(record.event_id, record.level, record.scope)
    _require(view.get(key) is None, "DuplicateResult")
    view.put(key, record.to_bytes())


@rp("rp.destroy")
def _destroy(view: StateView, tx: SignedTransaction, ctx: ExecutionContext) -> None:
    _require(ctx.role(tx.submitter) in (Role.CANTON, Role.CONFEDERATION), "NotAuthorizedToDestroy")
    key = destroy_key(tx.args["event"])
    if view.get(key) is None:
        view.put(key, encode(tx.submitter))


def describe(tx: SignedTransaction) -> str:
    """Short human-readable label for reports."""
    args = tx.args
    detail = args.get("key") or args.get("serial") or args.get("event") or ""
    return f"{tx.operation}:{detail}" if detail else tx.operation

