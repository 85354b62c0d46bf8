import datetime as dt
import hashlib
import struct

import pytest

from proverum.citizen_registry import CitizenRecord, CitizenRegistry
from proverum.electoral_register import (
    ALL,
    BlacklistReason,
    EligibilityProof,
    RegisterOffice,
    RegisterStatus,
    commit,
    onchain_blacklisted,
    onchain_register,
    parse_register_export,
    verify_eligibility_proof,
)
from proverum.errors import NotInRegister, ParseError, UnknownCommitment

REF = dt.date(2020, 9, 27)


def frame(tag: bytes, body: bytes) -> bytes:
    return tag + struct.pack(">I", len(body)) + body


def s(text: str) -> bytes:
    return frame(b"s", text.encode())


def commitment_oracle(salt, muni, local_id, official, first, dob):
    identity = frame(b"l", s("voter") + s(muni) + s(local_id) + s(official) + s(first) + s(dob.isoformat()))
    return hashlib.sha256(salt + identity).digest()


@pytest.fixture
def office(network):
    registry = CitizenRegistry(network, "Uster")
    for i, (first, dob) in enumerate([("Alice", dt.date(1980, 5, 1)), ("Bruno", dt.date(1975, 1, 2)),
                                      ("Carla", dt.date(1990, 7, 3)), ("Dario", dt.date(2012, 1, 1))], 1):
        registry.create_citizen("Uster", CitizenRecord(f"Uster-{i:04d}", "Keller", first, dob, "CH", "Uster"))
    network.commit()
    return RegisterOffice(network, registry)


def test_commitment_matches_independent_encoding():
    record = CitizenRecord("Uster-0001", "Keller", "Alice", dt.date(1980, 5, 1), "CH", "Uster")
    salt = bytes(range(32))
    assert commit(salt, record) == commitment_oracle(salt, "Uster", "Uster-0001", "Keller", "Alice",
                                                     dt.date(1980, 5, 1))


def test_generate_publishes_only_commitments(network, office):
    register = office.generate_register("E1", REF)
    network.commit()
    assert len(register.commitments) == 3  # the minor is excluded
    assert register.recomputes()
    version, digest, root, commitments = onchain_register(network, "E1", "Uster", "Confederation")
    assert (version, digest, root, commitments) == (1, register.list_digest, register.merkle_root,
                                                    register.commitments)
    ext = network.external_channel().orderer_visible_bytes()
    assert b"Alice" not in ext and b"Uster-0001" not in ext
    # salts are private and unique
    salts = [e.salt for e in office.books["E1"].salts[1]]
    assert len(set(salts)) == 3 and all(len(x) == 32 for x in salts)


def test_export_roundtrip_and_parse_errors(office):
    register = office.generate_register("E1", REF)
    parsed = parse_register_export(register.export())
    assert parsed.commitments == register.commitments and parsed.recomputes()
    text = register.export()
    lines = text.splitlines()
    with pytest.raises(ParseError) as err:
        parse_register_export("\n".join(lines[:1] + ["zz"] + lines[1:]))
    assert err.value.line == 2
    with pytest.raises(ParseError):
        parse_register_export("\n".join(lines[:-1]))
    with pytest.raises(ParseError):
        parse_register_export(text + lines[0] + "\n")
    with pytest.raises(ParseError):
        parse_register_export("ab" * 31 + "\n" + "\n".join(lines[-2:]))
    # a dropped commitment still parses but no longer recomputes
    assert not parse_register_export("\n".join(lines[1:])).recomputes()


def test_eligibility_proofs(network, office):
    register = office.generate_register("E1", REF)
    network.commit()
    for local_id in ("Uster-0001", "Uster-0002", "Uster-0003"):
        proof = office.prove_eligibility("E1", local_id)
        assert verify_eligibility_proof(proof, register.merkle_root)
        sibling, side = proof.merkle_path[0]
        bad = bytes([sibling[0] ^ 1]) + sibling[1:]
        forged = EligibilityProof(proof.commitment, ((bad, side),) + proof.merkle_path[1:], proof.root, 1)
        assert not verify_eligibility_proof(forged, register.merkle_root)
    with pytest.raises(NotInRegister):
        office.prove_eligibility("E1", "Uster-0004")
    assert not verify_eligibility_proof(EligibilityProof(b"short", (), b"", 1), register.merkle_root)


def test_blacklist_and_single_reissue(network, office):
    first = office.generate_register("E1", REF)
    network.commit()
    old = office.active_commitment_of("E1", "Uster-0002")
    second = office.reissue("E1", "Uster-0002", BlacklistReason.THEFT_VOTER_LETTERBOX)
    network.commit()
    assert first.status is RegisterStatus.SUPERSEDED and second.version == 2
    assert office.is_blacklisted("E1", old) and onchain_blacklisted(network, "E1", old, "Confederation")
    new = office.active_commitment_of("E1", "Uster-0002")
    assert new != old and new in second.commitments
    assert office.electorate("E1") == 3
    assert office.one_active_commitment_violations("E1") == []
    # the superseded proof does not verify against the new root
    assert not verify_eligibility_proof(
        EligibilityProof(old, (), first.merkle_root, 1), second.merkle_root)
    assert onchain_register(network, "E1", "Uster", "Confederation")[0] == 2


def test_bulk_reissue_blacklists_everything(network, office):
    first = office.generate_register("E1", REF)
    network.commit()
    second = office.reissue("E1", ALL, BlacklistReason.THEFT_BEFORE_DISPATCH)
    network.commit()
    assert set(first.commitments).isdisjoint(second.commitments)
    assert office.valid_commitments("E1") == list(second.commitments)
    assert office.one_active_commitment_violations("E1") == []


def test_blacklisting_foreign_commitment_is_refused(office):
    office.generate_register("E1", REF)
    with pytest.raises(UnknownCommitment):
        office.blacklist("E1", [b"\x00" * 32])
