"""Canonical binary encoding and hashing.

Every value that is hashed or signed anywhere in the simulator goes through
:func:`encode`. A value is written as ``tag (1 byte) | length (4 bytes, big
endian) | body``. Strings are UTF-8, integers are minimal decimal ASCII,
sequences are the concatenation of their encoded items in declared order and
mappings are sequences of ``(key, value)`` pairs sorted by key.

:func:`decode` is strict: ``encode(decode(b)) == b`` for every accepted ``b``,
so two different byte strings never decode to the same value.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import struct
from enum import Enum
from typing import Any, Mapping

from .errors import DecodeError

ZERO_HASH = bytes(32)

_BYTES = b"b"
_STR = b"s"
_INT = b"i"
_BOOL = b"o"
_NONE = b"n"
_LIST = b"l"
_MAP = b"m"

_HEADER = struct.Struct(">cI")


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def H(*fields: Any) -> bytes:
    """SHA-256 over the canonical encoding of ``fields``."""
    return sha256(encode(fields))


def hexs(data: bytes, n: int | None = None) -> str:
    text = data.hex()
    return text if n is None else text[:n]


def _frame(tag: bytes, body: bytes) -> bytes:
    return _HEADER.pack(tag, len(body)) + body


def frame_list(body: bytes) -> bytes:
    """Wrap already-encoded items as one encoded list."""
    return _frame(_LIST, body)


def encode(value: Any) -> bytes:
    kind = type(value)
    # exact-type fast path; subclasses such as str enums take the general route
    if kind is bytes:
        return _frame(_BYTES, value)
    if kind is str:
        return _frame(_STR, value.encode("utf-8"))
    if kind is tuple or kind is list:
        return _frame(_LIST, b"".join(map(encode, value)))
    if kind is int:
        return _frame(_INT, str(value).encode("ascii"))
    if value is None:
        return _frame(_NONE, b"")
    if isinstance(value, bool):
        return _frame(_BOOL, b"1" if value else b"0")
    if isinstance(value, Enum):
        return encode(value.value)
    if isinstance(value, int):
        return _frame(_INT, str(value).encode("ascii"))
    if isinstance(value, (bytes, bytearray, memoryview)):
        return _frame(_BYTES, bytes(value))
    if isinstance(value, str):
        return _frame(_STR, value.encode("utf-8"))
    if isinstance(value, _dt.date):
        return _frame(_STR, value.isoformat().encode("ascii"))
    if isinstance(value, Mapping):
        items = sorted(value.items(), key=lambda kv: kv[0])
        body = b"".join(encode(k) + encode(v) for k, v in items)
        return _frame(_MAP, body)
    if isinstance(value, (list, tuple)):
        return _frame(_LIST, b"".join(encode(v) for v in value))
    if hasattr(value, "to_value"):
        return encode(value.to_value())
    raise TypeError(f"cannot canonically encode {type(value).__name__}")


def _decode_at(data: bytes, pos: int, limit: int) -> tuple[Any, int]:
    # ``limit`` is the end of the enclosing container; nothing may extend past it
    if pos + 5 > limit:
        raise DecodeError("truncated header")
    tag, length = _HEADER.unpack_from(data, pos)
    start = pos + 5
    end = start + length
    if end > limit:
        raise DecodeError("truncated body")
    if tag == _LIST:
        items = []
        inner = start
        while inner < end:
            item, inner = _decode_at(data, inner, end)
            items.append(item)
        return tuple(items), end
    body = data[start:end]
    if tag == _BYTES:
        return body, end
    if tag == _STR:
        try:
            return body.decode("utf-8"), end
        except UnicodeDecodeError as exc:
            raise DecodeError("invalid utf-8") from exc
    if tag == _INT:
        text = body.decode("ascii", errors="replace")
        if not text or text != str(_parse_int(text)):
            raise DecodeError("non-canonical integer")
        return int(text), end
    if tag == _BOOL:
        if body == b"1":
            return True, end
        if body == b"0":
            return False, end
        raise DecodeError("invalid bool")
    if tag == _NONE:
        if body:
            raise DecodeError("non-empty none")
        return None, end
    if tag == _MAP:
        out: dict = {}
        inner = start
        prev = None
        while inner < end:
            key, inner = _decode_at(data, inner, end)
            val, inner = _decode_at(data, inner, end)
            if not isinstance(key, (str, bytes, int)) or isinstance(key, bool):
                raise DecodeError("map key must be a string, bytes or integer")
            if prev is not None and (type(prev) is not type(key) or not prev < key):
                raise DecodeError("map keys not strictly sorted")
            prev = key
            out[key] = val
        return out, end
    raise DecodeError(f"unknown tag {tag!r}")


def list_item_spans(data: bytes, pos: int = 0) -> list[tuple[int, int]]:
    """Absolute ``(start, end)`` offsets of the items of the list encoded at ``pos``, without decoding them."""
    unpack = _HEADER.unpack_from
    if pos + 5 > len(data):
        raise DecodeError("truncated header")
    tag, length = unpack(data, pos)
    end = pos + 5 + length
    if tag != _LIST or end > len(data):
        raise DecodeError("not an encoded list")
    spans, inner = [], pos + 5
    while inner < end:
        if inner + 5 > end:
            raise DecodeError("truncated header")
        item_end = inner + 5 + unpack(data, inner)[1]
        if item_end > end:
            raise DecodeError("truncated body")
        spans.append((inner, item_end))
        inner = item_end
    return spans


def _parse_int(text: str) -> int:
    try:
        return int(text)
    except ValueError as exc:
        raise DecodeError("invalid integer") from exc


def decode(data: bytes) -> Any:
    data = bytes(data)
    value, end = _decode_at(data, 0, len(data))
    if end != len(data):
        raise DecodeError("trailing bytes")
    return value
