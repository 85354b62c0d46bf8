"""Authorities as their own certificate authorities.

Every authority owns a self-signed root certificate and issues leaf
certificates (peer identity, transaction signing, publication) from it. Chains
are therefore at most two certificates deep. Signatures are Ed25519, which is
deterministic, so a seeded run always produces the same bytes.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Optional

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from .encoding import decode, encode
from .errors import DecodeError, DuplicateAuthority, InvalidParent, UnknownIssuer, UnknownAuthority
from .rng import SeededRandomness


class Role(str, Enum):
    CONFEDERATION = "Confederation"
    CANTON = "Canton"
    MUNICIPALITY = "Municipality"
    ESP = "ESP"
    SWISS_POST = "SwissPost"


GOVERNMENT_ROLES = frozenset({Role.CONFEDERATION, Role.CANTON, Role.MUNICIPALITY})


class Purpose(str, Enum):
    CERTIFICATE_AUTHORITY = "CertificateAuthority"
    PEER_IDENTITY = "PeerIdentity"
    TRANSACTION_SIGNING = "TransactionSigning"
    PUBLICATION = "Publication"


@dataclass(frozen=True)
class AuthorityId:
    name: str
    role: Role
    parent: Optional[str] = None

    @property
    def is_government(self) -> bool:
        return self.role in GOVERNMENT_ROLES


@dataclass(frozen=True)
class Signature:
    signer: str
    value: bytes

    def to_value(self):
        return (self.signer, self.value)

    @classmethod
    def from_value(cls, value) -> "Signature":
        try:
            signer, raw = value
        except (TypeError, ValueError) as exc:
            raise DecodeError("malformed signature") from exc
        if not isinstance(signer, str) or not isinstance(raw, bytes):
            raise DecodeError("malformed signature")
        return cls(signer, raw)


@dataclass(frozen=True)
class Certificate:
    subject: str
    public_key: bytes
    issuer: str
    purpose: Purpose
    issuer_signature: bytes

    def signed_payload(self) -> bytes:
        return encode(("certificate", self.subject, self.public_key, self.purpose))

    @property
    def is_root(self) -> bool:
        return self.purpose is Purpose.CERTIFICATE_AUTHORITY and self.issuer == self.subject

    def to_value(self):
        return (self.subject, self.public_key, self.issuer, self.purpose, self.issuer_signature)

    @classmethod
    def from_value(cls, value) -> "Certificate":
        try:
            subject, public_key, issuer, purpose, sig = value
            return cls(subject, public_key, issuer, Purpose(purpose), sig)
        except (TypeError, ValueError) as exc:
            raise DecodeError("malformed certificate") from exc

    def to_bytes(self) -> bytes:
        return encode(self)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Certificate":
        return cls.from_value(decode(data))

    def render(self) -> str:
        return (
            f"{self.subject}\t{self.purpose.value}\tissuer={self.issuer}\t"
            f"key={self.public_key.hex()}\tsig={self.issuer_signature.hex()}"
        )


class KeyPair:
    """Private signing key bound to the label of its certificate."""

    def __init__(self, label: str, private_key: Ed25519PrivateKey):
        self.label = label
        self._private = private_key
        self.public_key = private_key.public_key().public_bytes(
            serialization.Encoding.Raw, serialization.PublicFormat.Raw
        )

    @classmethod
    def from_seed(cls, label: str, seed: bytes) -> "KeyPair":
        return cls(label, Ed25519PrivateKey.from_private_bytes(seed))

    def sign_raw(self, message: bytes) -> bytes:
        return self._private.sign(message)

    def __repr__(self) -> str:
        return f"KeyPair({self.label!r}, {self.public_key.hex()[:16]}...)"


def sign(key: KeyPair, message: bytes) -> Signature:
    return Signature(key.label, key.sign_raw(message))


@functools.lru_cache(maxsize=1 << 17)
def _ed25519_ok(public_key: bytes, signature: bytes, message: bytes) -> bool:
    try:
        Ed25519PublicKey.from_public_bytes(public_key).verify(signature, message)
    except (InvalidSignature, ValueError):
        return False
    return True


def verify(cert: Optional[Certificate], message: bytes, signature: Optional[Signature]) -> bool:
    """True iff ``signature`` is ``cert``'s key over ``message``. Never raises."""
    try:
        if cert is None or signature is None:
            return False
        if signature.signer != cert.subject:
            return False
        if not isinstance(message, bytes) or not isinstance(signature.value, bytes):
            return False
        if len(signature.value) != 64 or len(cert.public_key) != 32:
            return False
        return _ed25519_ok(cert.public_key, signature.value, message)
    except Exception:  # malformed input of any shape is a rejection
        return False


def verify_certificate(cert: Certificate, roots: Mapping[str, Certificate]) -> bool:
    """Check ``cert`` chains to a registered root in at most two hops."""
    try:
        anchor = roots.get(cert.subject if cert.is_root else cert.issuer)
        return anchor is not None and _chains(cert, anchor)
    except Exception:
        return False


@functools.lru_cache(maxsize=4096)
def _chains(cert: Certificate, anchor: Certificate) -> bool:
    if cert.is_root:
        if anchor != cert:
            return False
    elif not anchor.is_root or cert.purpose is Purpose.CERTIFICATE_AUTHORITY:
        return False  # no intermediate CAs
    return _ed25519_ok(anchor.public_key, cert.issuer_signature, cert.signed_payload())


def peer_label(authority: str, index: int) -> str:
    return f"{authority}-peer-{index}"


def tx_key_label(authority: str) -> str:
    return f"{authority}/tx"


def publication_key_label(authority: str) -> str:
    return f"{authority}/pub"


class Directory:
    """Topology-wide registry of authorities, certificates and key material."""

    def __init__(self, randomness: SeededRandomness):
        self._rng = randomness
        self.authorities: dict[str, AuthorityId] = {}
        self.roots: dict[str, Certificate] = {}
        self.certificates: dict[str, Certificate] = {}
        self._keys: dict[str, KeyPair] = {}

    def _new_key(self, label: str) -> KeyPair:
        return KeyPair.from_seed(label, self._rng.randbytes("pki", 32))

    def create_authority(self, name: str, role: Role, parent: Optional[str] = None):
        role = Role(role)
        if name in self.authorities:
            raise DuplicateAuthority(name)
        _check_parent(role, parent, self.authorities)
        authority = AuthorityId(name, role, parent)
        key = self._new_key(name)
        unsigned = Certificate(name, key.public_key, name, Purpose.CERTIFICATE_AUTHORITY, b"")
        root = Certificate(
            name, key.public_key, name, Purpose.CERTIFICATE_AUTHORITY,
            key.sign_raw(unsigned.signed_payload()),
        )
        self.authorities[name] = authority
        self.roots[name] = root
        self.certificates[name] = root
        self._keys[name] = key
        return authority, key, root

    def issue_certificate(self, issuer: str, subject: str, purpose: Purpose):
        if issuer not in self.roots:
            raise UnknownIssuer(issuer)
        purpose = Purpose(purpose)
        if purpose is Purpose.CERTIFICATE_AUTHORITY:
            raise ValueError("leaf certificates cannot be certificate authorities")
        if subject in self.certificates:
            raise DuplicateAuthority(f"certificate subject {subject!r} already issued")
        key = self._new_key(subject)
        unsigned = Certificate(subject, key.public_key, issuer, purpose, b"")
        cert = Certificate(
            subject, key.public_key, issuer, purpose,
            self._keys[issuer].sign_raw(unsigned.signed_payload()),
        )
        self.certificates[subject] = cert
        self._keys[subject] = key
        return key, cert

    def verify_certificate(self, cert: Certificate) -> bool:
        return verify_certificate(cert, self.roots)

    def authority(self, name: str) -> AuthorityId:
        try:
            return self.authorities[name]
        except KeyError:
            raise UnknownAuthority(name) from None

    def certificate(self, label: str) -> Optional[Certificate]:
        return self.certificates.get(label)

    def key(self, label: str) -> KeyPair:
        try:
            return self._keys[label]
        except KeyError:
            raise UnknownAuthority(label) from None

    def tx_key(self, authority: str) -> KeyPair:
        return self.key(tx_key_label(authority))

    def publication_key(self, authority: str) -> KeyPair:
        return self.key(publication_key_label(authority))

    def peers(self, authority: str) -> list[str]:
        return sorted(
            c.subject for c in self.certificates.values()
            if c.issuer == authority and c.purpose is Purpose.PEER_IDENTITY
        )

    def of_role(self, role: Role) -> list[AuthorityId]:
        return [a for a in self.authorities.values() if a.role is role]

    def children(self, parent: str) -> list[AuthorityId]:
        return [a for a in self.authorities.values() if a.parent == parent]

    def bundle(self) -> "CertificateBundle":
        return CertificateBundle(dict(self.roots), dict(self.certificates))

    def provision(self, name: str, peers: int = 2) -> None:
        """Issue the standard leaf set: ``peers`` peer certs plus tx and publication keys."""
        for i in range(peers):
            self.issue_certificate(name, peer_label(name, i), Purpose.PEER_IDENTITY)
        self.issue_certificate(name, tx_key_label(name), Purpose.TRANSACTION_SIGNING)
        self.issue_certificate(name, publication_key_label(name), Purpose.PUBLICATION)


@dataclass(frozen=True)
class CertificateBundle:
    """Public certificate material only; safe to hand to outside verifiers."""

    roots: Mapping[str, Certificate]
    certificates: Mapping[str, Certificate]

    def certificate(self, label: str) -> Optional[Certificate]:
        cert = self.certificates.get(label)
        if cert is None or not verify_certificate(cert, self.roots):
            return None
        return cert

    def to_value(self):
        return tuple(self.certificates[k] for k in sorted(self.certificates))

    @classmethod
    def from_certificates(cls, certs: Iterable[Certificate]) -> "CertificateBundle":
        certs = list(certs)
        roots = {c.subject: c for c in certs if c.is_root}
        return cls(roots, {c.subject: c for c in certs})


def _check_parent(role: Role, parent: Optional[str], known: Mapping[str, AuthorityId]) -> None:
    expected = {
        Role.CONFEDERATION: None,
        Role.CANTON: Role.CONFEDERATION,
        Role.MUNICIPALITY: Role.CANTON,
        Role.ESP: None,
        Role.SWISS_POST: None,
    }[role]
    if expected is None:
        if parent is not None:
            raise InvalidParent(f"{role.value} takes no parent, got {parent!r}")
        return
    if parent is None:
        raise InvalidParent(f"{role.value} requires a {expected.value} parent")
    if parent not in known:
        raise InvalidParent(f"unknown parent {parent!r}")
    if known[parent].role is not expected:
        raise InvalidParent(
            f"{role.value} parent must be a {expected.value}, {parent!r} is {known[parent].role.value}"
        )
