import dataclasses

import pytest

from proverum.errors import DuplicateAuthority, InvalidParent, UnknownIssuer
from proverum.pki import (
    Certificate,
    Directory,
    Purpose,
    Role,
    Signature,
    peer_label,
    sign,
    tx_key_label,
    verify,
    verify_certificate,
)
from proverum.rng import SeededRandomness


def test_default_topology_issues_two_peers_per_authority(network):
    d = network.directory
    assert len(d.authorities) == 9
    peers = [c for c in d.certificates.values() if c.purpose is Purpose.PEER_IDENTITY]
    assert len(peers) == 18
    for name in d.authorities:
        assert d.peers(name) == [peer_label(name, 0), peer_label(name, 1)]


def test_every_certificate_chains_to_its_own_root_in_one_hop(network):
    d = network.directory
    for cert in d.certificates.values():
        assert d.verify_certificate(cert)
        if not cert.is_root:
            assert cert.issuer in d.roots and d.roots[cert.issuer].is_root


def test_forged_and_reissued_certificates_fail(network):
    d = network.directory
    cert = d.certificate(tx_key_label("Zurich"))
    other = d.certificate(tx_key_label("Bern"))
    assert not verify_certificate(dataclasses.replace(cert, public_key=other.public_key), d.roots)
    assert not verify_certificate(dataclasses.replace(cert, issuer="Bern"), d.roots)
    # an intermediate CA is never accepted
    fake_ca = dataclasses.replace(cert, purpose=Purpose.CERTIFICATE_AUTHORITY)
    assert not verify_certificate(fake_ca, d.roots)
    # a self-signed root that is not registered is not trusted
    rogue = Directory(SeededRandomness(99))
    _, _, rogue_root = rogue.create_authority("Rogue", Role.CONFEDERATION)
    assert not verify_certificate(rogue_root, d.roots)


def test_signature_roundtrip_and_tampering(network):
    d = network.directory
    key = d.tx_key("Uster")
    cert = d.certificate(tx_key_label("Uster"))
    sig = sign(key, b"message")
    assert verify(cert, b"message", sig)
    assert not verify(cert, b"messagf", sig)
    assert not verify(d.certificate(tx_key_label("Thun")), b"message", sig)
    flipped = bytearray(sig.value)
    flipped[0] ^= 1
    assert not verify(cert, b"message", Signature(sig.signer, bytes(flipped)))
    assert not verify(cert, b"message", Signature(sig.signer, sig.value[:10]))
    assert not verify(None, b"message", sig)
    assert not verify(cert, b"message", None)


def test_certificate_bytes_roundtrip(network):
    cert = network.directory.certificate(tx_key_label("ESP1"))
    assert Certificate.from_bytes(cert.to_bytes()) == cert


def test_directory_errors():
    d = Directory(SeededRandomness(1))
    d.create_authority("C", Role.CONFEDERATION)
    with pytest.raises(DuplicateAuthority):
        d.create_authority("C", Role.CONFEDERATION)
    with pytest.raises(InvalidParent):
        d.create_authority("M", Role.MUNICIPALITY, "C")
    with pytest.raises(UnknownIssuer):
        d.issue_certificate("nobody", "x", Purpose.PEER_IDENTITY)
    with pytest.raises(ValueError):
        d.issue_certificate("C", "x", Purpose.CERTIFICATE_AUTHORITY)


def test_keys_are_seed_deterministic():
    a, b = Directory(SeededRandomness(5)), Directory(SeededRandomness(5))
    c = Directory(SeededRandomness(6))
    for d in (a, b, c):
        d.create_authority("C", Role.CONFEDERATION)
    assert a.roots["C"] == b.roots["C"]
    assert a.roots["C"].public_key != c.roots["C"].public_key
