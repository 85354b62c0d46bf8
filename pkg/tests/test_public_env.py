import dataclasses

import pytest

from proverum.encoding import sha256
from proverum.errors import BadSourceSignature, GatekeeperRejection, UnauthorizedProducer
from proverum.public_env import (
    PoAChain,
    PublicationKind,
    PublicationRecord,
    export_records,
    public_verify,
    verify_poa,
)
from proverum.scenario.process import Simulation

from conftest import run_until


def digest_record(network, source="Zurich", payload=b"\x01" * 32, kind=PublicationKind.MERKLE_ROOT):
    record = PublicationRecord(kind, "E1", source, payload, source, b"\x00" * 32)
    return record.signed(network.directory.publication_key(source))


@pytest.fixture
def full(small_citizens):
    sim = Simulation(seed=11)
    sim.load_citizens(small_citizens)
    run_until(sim, "destroy")
    sim.flush_public()
    return sim


def test_honest_run_verifies_on_every_option(full):
    report = public_verify(full.public.snapshot(), "E1")
    assert report.ok, report.render()
    names = {(c.name, c.option) for c in report.checks}
    for option in (1, 2, 3):
        for name in ("signatures", "register-roots", "result-sums", "eligibility"):
            assert (name, option) in names
    assert ("poa-links", 2) in names and ("option-consistency", None) in names
    assert full.publication_errors == []


def test_gatekeeper_refuses_personal_data(full):
    name = "Keller"
    assert name in full.network.pii
    leaking = digest_record(full.network, kind=PublicationKind.RECEPTION_LOG, payload=name.encode())
    with pytest.raises(GatekeeperRejection):
        full.public.publish(leaking)
    assert full.public.rejections[-1][0] == leaking
    with pytest.raises(GatekeeperRejection):
        full.public.publish(digest_record(full.network, payload=b"short"))


def test_bad_source_signature(full):
    record = digest_record(full.network)
    with pytest.raises(BadSourceSignature):
        full.public.publish(dataclasses.replace(record, payload=b"\x02" * 32))
    with pytest.raises(BadSourceSignature):
        full.public.publish(dataclasses.replace(record, source_signature=None))


def test_poa_rotation_and_unauthorized_producer(network):
    keys = {p: network.directory.publication_key(p) for p in ("Confederation", "Zurich", "Bern")}
    chain = PoAChain(keys)
    producers = []
    for i in range(6):
        chain.pending.append(digest_record(network, payload=sha256(bytes([i]))))
        producers.append(chain.tick().producer)
    assert producers == ["Bern", "Confederation", "Zurich"] * 2
    chain.pending.append(digest_record(network))
    with pytest.raises(UnauthorizedProducer):
        chain.produce("Uster")
    with pytest.raises(UnauthorizedProducer):
        chain.produce("Zurich")
    assert verify_poa(chain.blocks, chain.authorized_producers, network.directory.bundle()).ok
    # a block signed by the wrong producer is localized
    forged = dataclasses.replace(chain.blocks[3], producer="Zurich")
    blocks = list(chain.blocks)
    blocks[3] = forged
    report = verify_poa(blocks, chain.authorized_producers, network.directory.bundle())
    assert (report.ok, report.first_bad_height) == (False, 3)


def test_poa_tamper_is_localized(full):
    env = full.public
    height = next(h for h, b in enumerate(env.poa.blocks) if b.records)
    env.tamper_poa_record(height, 0, b"\x00" * 32)
    report = public_verify(env.snapshot(), "E1")
    (poa,) = [c for c in report.checks if c.name == "poa-links"]
    assert not poa.ok and poa.evidence == (f"block {height}: blockHash mismatch",)
    failing = {(c.name, c.option) for c in report.failures()}
    assert ("poa-links", 2) in failing and ("option-consistency", None) in failing
    assert all(option in (2, None) for _, option in failing)


def test_sink_tamper_names_the_record(full):
    env = full.public
    index = next(i for i, r in enumerate(env.sink.records) if r.kind is PublicationKind.MERKLE_ROOT)
    env.tamper_sink_record(index, b"\x09" * 32)
    report = public_verify(env.snapshot(), "E1")
    (sig,) = [c for c in report.checks if c.name == "signatures" and c.option == 1]
    assert not sig.ok and sig.evidence[0].startswith(f"record {index} ")


def test_stale_api_is_noted(full):
    full.public.api.freeze()
    assert full.public.api.index(digest_record(full.network)) is False
    report = public_verify(full.public.snapshot(), "E1")
    assert "read API reports stale data" in report.notes


def test_reception_status_lookup(full):
    accepted = next(d for d in full.pipeline.decisions("E1", "Thun") if d.accepted)
    assert full.public.api.reception_status("E1", accepted.commitment) == "Accepted"
    assert full.public.api.reception_status("E1", b"\x05" * 32) == "NotReceived"


def test_snapshot_is_detached_from_later_changes(full):
    snapshot = full.public.snapshot()
    full.public.tamper_sink_record(0, b"\x09" * 32)
    assert public_verify(snapshot, "E1").ok


def test_export_records_renders_one_line_each(full):
    records = full.public.public_read(1, PublicationKind.FEDERAL_RESULT)
    assert len(records) == 1
    assert export_records(records).count("\n") == 1
