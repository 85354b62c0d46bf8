import datetime as dt
import hashlib
import struct

import pytest
from hypothesis import given, strategies as st

from proverum.encoding import H, decode, encode, sha256
from proverum.errors import DecodeError
from proverum.pki import Role


def frame(tag: bytes, body: bytes) -> bytes:
    return tag + struct.pack(">I", len(body)) + body


def test_scalar_layout_matches_hand_framing():
    assert encode(b"\x01\x02") == b"b\x00\x00\x00\x02\x01\x02"
    assert encode("ab") == frame(b"s", b"ab")
    assert encode(-12) == frame(b"i", b"-12")
    assert encode(True) == frame(b"o", b"1")
    assert encode(None) == frame(b"n", b"")
    assert encode(dt.date(2001, 2, 3)) == frame(b"s", b"2001-02-03")


def test_sequence_and_mapping_layout():
    assert encode(("a", 1)) == frame(b"l", frame(b"s", b"a") + frame(b"i", b"1"))
    # keys are sorted, so insertion order does not matter
    assert encode({"b": 1, "a": 2}) == encode({"a": 2, "b": 1})
    assert encode({"a": 2, "b": 1}) == frame(b"m", encode("a") + encode(2) + encode("b") + encode(1))


def test_enum_encodes_as_value():
    assert encode(Role.CANTON) == encode("Canton")


def test_hash_helper():
    assert H("x", 1) == hashlib.sha256(encode(("x", 1))).digest()
    assert sha256(b"") == hashlib.sha256(b"").digest()


@pytest.mark.parametrize("raw", [
    b"",
    b"s\x00\x00\x00\x05abc",            # truncated body
    b"i\x00\x00\x00\x0201",              # non-canonical integer
    b"o\x00\x00\x00\x012",               # bad bool
    b"n\x00\x00\x00\x01x",               # non-empty none
    b"s\x00\x00\x00\x01a" + b"junk",     # trailing bytes
    b"z\x00\x00\x00\x00",                # unknown tag
    frame(b"m", encode("b") + encode(1) + encode("a") + encode(2)),  # unsorted keys
    frame(b"m", encode("a") + encode(1) + encode(b"a") + encode(2)),  # mixed key types
    frame(b"m", encode(("t",)) + encode(1)),                          # non-scalar key
])
def test_strict_decoding_rejects(raw):
    with pytest.raises(DecodeError):
        decode(raw)


values = st.recursive(
    st.none() | st.booleans() | st.integers() | st.binary(max_size=20) | st.text(max_size=20),
    lambda children: st.lists(children, max_size=4).map(tuple)
    | st.dictionaries(st.text(max_size=5), children, max_size=4),
    max_leaves=20,
)


@given(values)
def test_roundtrip(value):
    assert decode(encode(value)) == value


@given(st.binary(max_size=64))
def test_accepted_bytes_are_canonical(raw):
    try:
        value = decode(raw)
    except DecodeError:
        return
    assert encode(value) == raw
