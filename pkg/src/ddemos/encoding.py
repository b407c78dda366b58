"""Canonical byte encoding for everything that is signed or hashed.

Layout (all lengths and counts are 4-byte big-endian unsigned)::

    None          b"N"
    bool          b"T" | b"F"
    int           b"I" sign(1 byte: 0x00 or 0x01) len magnitude(big-endian)
    bytes         b"B" len data
    str           b"S" len utf-8
    list / tuple  b"L" count item*
    dict          b"D" count (key value)*    keys sorted by their own encoding

Floats are rejected.  Objects exposing ``canonical()`` are encoded through
the value it returns, which lets dataclasses fix their own field order.
"""

from __future__ import annotations

import hashlib
import struct
from functools import lru_cache
from typing import Any

_LEN = struct.Struct(">I")
_SMALL_INTS = [b"I\x00" + _LEN.pack(1 if i else 0) + (bytes([i]) if i else b"") for i in range(256)]
_STRS: dict = {}  # short strings (message tags, names) recur constantly


def _enc_str(text: str) -> bytes:
    hit = _STRS.get(text)
    if hit is None:
        data = text.encode("utf-8")
        hit = b"S" + _LEN.pack(len(data)) + data
        if len(text) <= 32 and len(_STRS) < 4096:
            _STRS[text] = hit
    return hit


def encode(obj: Any) -> bytes:
    cached = getattr(obj, "_canonical_bytes", None)
    if cached is not None:
        return cached
    out: list[bytes] = []
    _encode_into(obj, out)
    return b"".join(out) if len(out) != 1 else out[0]


@lru_cache(maxsize=None)
def _frozen(cls) -> bool:
    params = getattr(cls, "__dataclass_params__", None)
    return params is not None and params.frozen


def _encode_into(obj: Any, out: list[bytes]) -> None:
    t = type(obj)
    if t is int:
        if 0 <= obj < 256:
            out.append(_SMALL_INTS[obj])
            return
        mag = -obj if obj < 0 else obj
        data = mag.to_bytes((mag.bit_length() + 7) // 8, "big")
        out.append(b"I" + (b"\x01" if obj < 0 else b"\x00") + _LEN.pack(len(data)) + data)
    elif t is tuple or t is list:
        append = out.append
        pack = _LEN.pack
        append(b"L" + pack(len(obj)))
        for item in obj:
            # leaves are handled inline; this is the hot path for messages
            it = type(item)
            if it is bytes:
                append(b"B" + pack(len(item)) + item)
            elif it is int and 0 <= item < 256:
                append(_SMALL_INTS[item])
            elif it is str:
                append(_STRS.get(item) or _enc_str(item))
            elif item is None:
                append(b"N")
            else:
                _encode_into(item, out)
    elif t is bytes:
        out.append(b"B" + _LEN.pack(len(obj)) + obj)
    elif t is str:
        out.append(_enc_str(obj))
    elif obj is None:
        out.append(b"N")
    elif obj is True:
        out.append(b"T")
    elif obj is False:
        out.append(b"F")
    elif hasattr(obj, "canonical"):
        cached = getattr(obj, "_canonical_bytes", None)
        if cached is not None:
            out.append(cached)
            return
        sub: list[bytes] = []
        _encode_into(obj.canonical(), sub)
        data = b"".join(sub)
        if _frozen(t):
            # immutable, so the encoding can be remembered on the object
            object.__setattr__(obj, "_canonical_bytes", data)
        out.append(data)
    elif isinstance(obj, int):
        _encode_into(int(obj), out)
    elif isinstance(obj, (bytes, bytearray)):
        out.append(b"B" + _LEN.pack(len(obj)) + bytes(obj))
    elif isinstance(obj, (list, tuple)):
        _encode_into(tuple(obj), out)
    elif isinstance(obj, dict):
        items = sorted((encode(k), v) for k, v in obj.items())
        out.append(b"D" + _LEN.pack(len(items)))
        for key, value in items:
            out.append(key)
            _encode_into(value, out)
    else:
        raise TypeError(f"cannot canonically encode {type(obj).__name__}")


def decode(data: bytes) -> Any:
    """Inverse of :func:`encode` (lists come back as tuples)."""
    value, pos = _decode_at(data, 0)
    if pos != len(data):
        raise ValueError("trailing bytes after canonical value")
    return value


def _decode_at(data: bytes, pos: int) -> tuple[Any, int]:
    tag = data[pos:pos + 1]
    pos += 1
    if tag == b"N":
        return None, pos
    if tag == b"T":
        return True, pos
    if tag == b"F":
        return False, pos
    if tag == b"I":
        sign = data[pos]
        (length,) = _LEN.unpack_from(data, pos + 1)
        start = pos + 5
        mag = int.from_bytes(data[start:start + length], "big")
        return (-mag if sign else mag), start + length
    if tag in (b"B", b"S"):
        (length,) = _LEN.unpack_from(data, pos)
        start = pos + 4
        chunk = bytes(data[start:start + length])
        if len(chunk) != length:
            raise ValueError("truncated canonical value")
        return (chunk if tag == b"B" else chunk.decode("utf-8")), start + length
    if tag == b"L":
        (count,) = _LEN.unpack_from(data, pos)
        pos += 4
        items = []
        for _ in range(count):
            item, pos = _decode_at(data, pos)
            items.append(item)
        return tuple(items), pos
    if tag == b"D":
        (count,) = _LEN.unpack_from(data, pos)
        pos += 4
        result = {}
        for _ in range(count):
            key, pos = _decode_at(data, pos)
            value, pos = _decode_at(data, pos)
            result[key] = value
        return result, pos
    raise ValueError(f"unknown canonical tag {tag!r} at offset {pos - 1}")


def digest(obj: Any) -> bytes:
    return hashlib.sha256(encode(obj)).digest()


def to_hex(data: bytes) -> str:
    return bytes(data).hex()


def from_hex(text: str) -> bytes:
    return bytes.fromhex(text)
