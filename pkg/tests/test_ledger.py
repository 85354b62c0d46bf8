import dataclasses

import pytest

from proverum.encoding import ZERO_HASH, encode, sha256
from proverum.errors import EmptyPool, IncompatibleChaincode, NotAMember, WrongOrderer
from proverum.ledger import (
    Block,
    Chaincode,
    ConsensusPolicy,
    create_channel,
    make_transaction,
    verify_block_bytes,
    verify_blocks,
    verify_dump,
)

ORDERING = ("Confederation", "Zurich", "Bern", "Uster", "Winterthur", "Bern-city", "Thun")


def alert(network, who, detail, channel="federal"):
    return network.transact(channel, who, Chaincode.CM, "ve.alert", {"kind": "test", "detail": detail})


def test_policy_thresholds():
    policy = ConsensusPolicy(ORDERING)
    assert policy.n == 7
    assert policy.majority_threshold == 4
    assert policy.bft_tolerated == 2
    assert ConsensusPolicy(tuple("abcdef")).bft_tolerated == 1


def test_genesis_block(network):
    for channel in network.channels.values():
        genesis = channel.blocks[0]
        assert genesis.height == 0 and genesis.entries == () and genesis.prev_hash == ZERO_HASH
        assert genesis.orderer == ORDERING[0]
        expected = sha256(encode(("block", channel.channel_id, 0, ZERO_HASH, (), ORDERING[0])))
        assert genesis.block_hash == expected


def test_round_robin_over_three_rounds(network):
    channel = network.federal_channel()
    for i in range(20):
        assert alert(network, "Zurich", f"n{i}").accepted
        network.commit()
    assert channel.height == 21
    assert [b.orderer for b in channel.blocks] == [ORDERING[h % 7] for h in range(21)]
    for prev, block in zip(channel.blocks, channel.blocks[1:]):
        assert block.prev_hash == prev.block_hash
    assert channel.verify_chain().ok


def test_pool_ordering_by_timestamp_then_id(network):
    channel = network.federal_channel()
    directory = network.directory
    txs = [make_transaction(directory, who, Chaincode.CM, "ve.alert", {"kind": "k", "detail": who}, ts)
           for who, ts in [("Bern", 5), ("Zurich", 3), ("Thun", 5), ("Uster", 1)]]
    for tx in txs:
        assert channel.submit(tx).accepted
    block = channel.cut_scheduled()
    expected = sorted(txs, key=lambda t: (t.timestamp, t.tx_id))
    assert [t.tx_id for t in block.transactions] == [t.tx_id for t in expected]


def test_submission_rejections(network):
    directory = network.directory
    fed = network.federal_channel()
    ext = network.external_channel()
    outsider = network.transact("federal", "ESP1", Chaincode.CM, "ve.alert", {"kind": "k", "detail": "x"})
    assert (outsider.accepted, outsider.reason) == (False, "NotAMember")
    tx = make_transaction(directory, "Zurich", Chaincode.CM, "ve.alert", {"kind": "k", "detail": "x"}, 0)
    forged = dataclasses.replace(tx, args={"kind": "k", "detail": "y"})
    assert fed.submit(forged).reason == "BadSignature"
    rp = make_transaction(directory, "Zurich", Chaincode.RP, "rp.check", {}, 0)
    assert ext.submit(rp).reason == "ChaincodeNotOnChannel"
    assert fed.submit(tx).accepted
    assert fed.submit(tx).reason == "DuplicateTransaction"


def test_contract_rejection_is_committed_but_inert(network):
    fed = network.federal_channel()
    before = {c: dict(s) for c, s in fed.world_states.items()}
    receipt = network.transact("federal", "Uster", Chaincode.CM, "er.blacklist",
                               {"event": "E1", "municipality": "Uster", "commitments": ()})
    assert receipt.accepted
    network.commit()
    entry = fed.find_tx(receipt.tx_id)
    assert entry is not None and not entry.valid and entry.reason
    assert fed.world_states == before
    assert fed.replay_sound()


def test_state_changes_and_read_access(network):
    fed = network.federal_channel()
    alert(network, "Zurich", "hello")
    network.commit()
    assert fed.query_state(Chaincode.CM, "alerts", "Bern") == encode(1)
    with pytest.raises(NotAMember):
        fed.query_state(Chaincode.CM, "alerts", "ESP1")
    fed.grant_read("auditor")
    assert fed.query_state(Chaincode.CM, "alerts", "auditor") == encode(1)


def test_cut_errors(network):
    fed = network.federal_channel()
    with pytest.raises(EmptyPool):
        fed.cut_block(fed.policy.scheduled_orderer(fed.height))
    alert(network, "Zurich", "x")
    with pytest.raises(WrongOrderer):
        fed.cut_block("Thun")


def test_results_chaincode_refused_with_outside_members(network):
    with pytest.raises(IncompatibleChaincode):
        create_channel("bad", ["Confederation", "ESP1"], [Chaincode.RP], network.directory,
                       network.policy, network.registry)


def test_tampered_block_is_localized(network):
    fed = network.federal_channel()
    for i in range(4):
        alert(network, "Bern", f"b{i}")
        network.commit()
    blocks = list(fed.blocks)
    victim = blocks[2]
    entry = victim.entries[0]
    swapped = dataclasses.replace(entry, valid=not entry.valid)
    blocks[2] = dataclasses.replace(victim, entries=(swapped,))
    report = verify_blocks(fed.channel_id, blocks, network.directory.bundle(), fed.policy)
    assert (report.ok, report.first_bad_height) == (False, 2)
    # re-hashing the block breaks the orderer signature instead
    blocks[2] = dataclasses.replace(blocks[2], block_hash=blocks[2].recompute_hash())
    report = verify_blocks(fed.channel_id, blocks, network.directory.bundle(), fed.policy)
    assert (report.ok, report.first_bad_height) == (False, 2)


def test_block_bytes_roundtrip_and_dump(network):
    fed = network.federal_channel()
    alert(network, "Zurich", "x")
    network.commit()
    raw = [b.to_bytes() for b in fed.blocks]
    assert [Block.from_bytes(r).block_hash for r in raw] == [b.block_hash for b in fed.blocks]
    assert verify_block_bytes(fed.channel_id, raw, network.directory.bundle(), fed.policy).ok
    dump = fed.dump()
    assert verify_dump(dump).ok
    broken = bytearray(dump)
    broken[-40] ^= 0x01
    assert not verify_dump(bytes(broken)).ok
    assert not verify_dump(b"garbage").ok


def test_channel_ids_bind_blocks(network):
    fed = network.federal_channel()
    raw = [b.to_bytes() for b in fed.blocks]
    assert not verify_block_bytes("canton-zurich", raw, network.directory.bundle(), fed.policy).ok


def test_dump_metadata_must_cover_the_chain(network):
    fed = network.federal_channel()
    alert(network, "Zurich", "x")
    network.commit()
    dump = fed.dump()
    renamed = dump.replace(encode("Zurich"), encode("Zurick"), 1)
    assert renamed != dump
    report = verify_dump(renamed)
    assert not report.ok and "Zurich" in report.detail


def test_dump_with_altered_certificate_fails(network):
    dump = network.federal_channel().dump()
    peer = network.directory.certificate("Uster-peer-1")
    flipped = bytearray(peer.issuer_signature)
    flipped[0] ^= 1
    tampered = dump.replace(peer.issuer_signature, bytes(flipped))
    assert tampered != dump
    assert "Uster-peer-1" in verify_dump(tampered).detail


def test_parsed_block_caches_match_reencoding(network):
    alert(network, "Zurich", "a")
    alert(network, "Bern", "b")
    network.commit()
    original = network.federal_channel().blocks[-1]
    raw = original.to_bytes()
    parsed = Block._parse(raw)
    assert parsed.recompute_hash() == original.block_hash
    for seeded, fresh in zip(parsed.entries, original.entries):
        assert seeded.digest() == sha256(encode(("entry", fresh)))
        assert seeded.tx.payload() == fresh.tx.payload()


def test_raw_hash_precheck_agrees_with_parsed_check(network):
    from proverum.ledger import _raw_hash_mismatch

    alert(network, "Zurich", "a")
    network.commit()
    raw = network.federal_channel().blocks[-1].to_bytes()
    assert not _raw_hash_mismatch(raw)
    for pos in range(0, len(raw), 7):
        mutant = bytearray(raw)
        mutant[pos] ^= 0x01
        mutant = bytes(mutant)
        if _raw_hash_mismatch(mutant):
            try:
                parsed = Block._parse(mutant)
            except Exception:
                continue
            assert parsed.recompute_hash() != parsed.block_hash
