"""Canonical byte encodings.

Two layers live here: ``pack``/``unpack`` for fixed-order length-prefixed
field lists (signed strings, signatures, certificates), and a small tagged
codec for whole wire messages so the network adversary can operate on real
bytes.
"""

from __future__ import annotations

import struct

_LEN = struct.Struct(">I")


class DecodeError(ValueError):
    """Raised when bytes do not parse under the canonical encoding."""


def int_to_bytes(value: int, length: int = 32) -> bytes:
    return value.to_bytes(length, "big")


def bytes_to_int(data: bytes) -> int:
    return int.from_bytes(data, "big")


def pack(*fields: bytes) -> bytes:
    out = bytearray()
    for field in fields:
        out += _LEN.pack(len(field))
        out += field
    return bytes(out)


def unpack(data: bytes, count: int | None = None) -> list[bytes]:
    fields = []
    pos = 0
    while pos < len(data):
        if pos + 4 > len(data):
            raise DecodeError("truncated length prefix")
        (size,) = _LEN.unpack_from(data, pos)
        pos += 4
        if pos + size > len(data):
            raise DecodeError("field overruns buffer")
        fields.append(data[pos:pos + size])
        pos += size
    if count is not None and len(fields) != count:
        raise DecodeError(f"expected {count} fields, got {len(fields)}")
    return fields


# Wire codec. Tags: N none, T/F bool, I int, B bytes, S str, L list, D dict.

def encode_wire(obj) -> bytes:
    out = bytearray()
    _encode(obj, out)
    return bytes(out)


def _encode(obj, out: bytearray) -> None:
    if obj is None:
        out += b"N"
    elif obj is True:
        out += b"T"
    elif obj is False:
        out += b"F"
    elif isinstance(obj, int):
        if obj < 0:
            raise TypeError("negative integers are not encodable")
        raw = obj.to_bytes(max(1, (obj.bit_length() + 7) // 8), "big")
        out += b"I" + _LEN.pack(len(raw)) + raw
    elif isinstance(obj, (bytes, bytearray)):
        out += b"B" + _LEN.pack(len(obj)) + bytes(obj)
    elif isinstance(obj, str):
        raw = obj.encode("utf-8")
        out += b"S" + _LEN.pack(len(raw)) + raw
    elif isinstance(obj, (list, tuple)):
        out += b"L" + _LEN.pack(len(obj))
        for item in obj:
            _encode(item, out)
    elif isinstance(obj, dict):
        out += b"D" + _LEN.pack(len(obj))
        for key, value in obj.items():
            if not isinstance(key, str):
                raise TypeError("dict keys must be str")
            _encode(key, out)
            _encode(value, out)
    else:
        raise TypeError(f"cannot encode {type(obj).__name__}")


def decode_wire(data: bytes):
    try:
        obj, pos = _decode(data, 0)
    except (IndexError, struct.error, UnicodeDecodeError) as exc:
        raise DecodeError(str(exc)) from exc
    if pos != len(data):
        raise DecodeError("trailing bytes after message")
    return obj


def _read_len(data: bytes, pos: int) -> tuple[int, int]:
    if pos + 4 > len(data):
        raise DecodeError("truncated length")
    return _LEN.unpack_from(data, pos)[0], pos + 4


def _decode(data: bytes, pos: int):
    tag = data[pos:pos + 1]
    pos += 1
    if tag == b"N":
        return None, pos
    if tag == b"T":
        return True, pos
    if tag == b"F":
        return False, pos
    if tag in (b"I", b"B", b"S"):
        size, pos = _read_len(data, pos)
        if pos + size > len(data):
            raise DecodeError("value overruns buffer")
        raw = data[pos:pos + size]
        pos += size
        if tag == b"I":
            return int.from_bytes(raw, "big"), pos
        if tag == b"B":
            return raw, pos
        return raw.decode("utf-8"), pos
    if tag == b"L":
        count, pos = _read_len(data, pos)
        items = []
        for _ in range(count):
            item, pos = _decode(data, pos)
            items.append(item)
        return items, pos
    if tag == b"D":
        count, pos = _read_len(data, pos)
        result = {}
        for _ in range(count):
            key, pos = _decode(data, pos)
            if not isinstance(key, str):
                raise DecodeError("non-string dict key")
            result[key], pos = _decode(data, pos)
        return result, pos
    raise DecodeError(f"unknown tag {tag!r}")
