"""Prime-order groups written multiplicatively.

Two implementations share one duck-typed surface (``op``, ``exp``, ``inv``,
``gexp``, ``hexp``, ``encode``, ``decode``):

* :class:`Secp256k1Group` -- the production group, backed by libsecp256k1.
* :class:`ModPGroup` -- the order-``q`` subgroup of ``Z_p^*`` for a safe prime
  ``p = 2q + 1``.  The bundled instance has ``q`` just under ``2**31`` so that
  discrete logs can be brute forced in tests.

The second generator ``h`` is always derived by hashing a public tag into the
group, so nobody knows ``log_g h``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache
from typing import Any

from coincurve import PublicKey

SECP256K1_ORDER = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141

# safe prime p = 2q + 1 with q prime, q < 2**31
TEST_Q = 2146435103
TEST_P = 4292870207

_H_TAG = b"ddemos/generator-h"


class Point:
    """A secp256k1 point; ``key is None`` is the point at infinity."""

    __slots__ = ("key", "enc")

    def __init__(self, key: PublicKey | None, enc: bytes | None = None):
        self.key = key
        if enc is None:
            enc = b"\x00" if key is None else key.format(compressed=True)
        self.enc = enc

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Point) and self.enc == other.enc

    def __hash__(self) -> int:
        return hash(self.enc)

    def __repr__(self) -> str:
        return f"Point({self.enc.hex()[:18]}...)"

    def canonical(self) -> bytes:
        return self.enc


class Secp256k1Group:
    name = "secp256k1"
    order = SECP256K1_ORDER

    def __init__(self) -> None:
        self.identity = Point(None)
        self.g = Point(PublicKey.from_secret((1).to_bytes(32, "big")))
        self.h = self._hash_to_point(_H_TAG)

    def _hash_to_point(self, tag: bytes) -> Point:
        counter = 0
        while True:
            x = hashlib.sha256(tag + counter.to_bytes(4, "big")).digest()
            try:
                return Point(PublicKey(b"\x02" + x))
            except ValueError:
                counter += 1

    def op(self, a: Point, b: Point) -> Point:
        if a.key is None:
            return b
        if b.key is None:
            return a
        try:
            return Point(PublicKey.combine_keys([a.key, b.key]))
        except ValueError:
            return self.identity

    def exp(self, a: Point, k: int) -> Point:
        k %= self.order
        if k == 0 or a.key is None:
            return self.identity
        return Point(a.key.multiply(k.to_bytes(32, "big")))

    def inv(self, a: Point) -> Point:
        if a.key is None:
            return a
        flipped = bytes([a.enc[0] ^ 1]) + a.enc[1:]
        return Point(PublicKey(flipped), flipped)

    def gexp(self, k: int) -> Point:
        k %= self.order
        if k == 0:
            return self.identity
        return Point(PublicKey.from_secret(k.to_bytes(32, "big")))

    def hexp(self, k: int) -> Point:
        return self.exp(self.h, k)

    def encode(self, a: Point) -> bytes:
        return a.enc

    def decode(self, data: bytes) -> Point:
        if data == b"\x00":
            return self.identity
        return Point(PublicKey(bytes(data)))

    def is_element(self, a: Any) -> bool:
        return isinstance(a, Point)


class ModPGroup:
    """Quadratic residues modulo a safe prime."""

    def __init__(self, p: int, q: int, name: str = "modp"):
        if p != 2 * q + 1:
            raise ValueError("p must equal 2q + 1")
        self.name = name
        self.p = p
        self.order = q
        self.identity = 1
        self.g = 4
        self.h = self._hash_to_element(_H_TAG)

    def _hash_to_element(self, tag: bytes) -> int:
        counter = 0
        while True:
            x = int.from_bytes(hashlib.sha256(tag + counter.to_bytes(4, "big")).digest(), "big")
            e = pow(x % self.p, 2, self.p)
            if e not in (0, 1, self.g):
                return e
            counter += 1

    def op(self, a: int, b: int) -> int:
        return a * b % self.p

    def exp(self, a: int, k: int) -> int:
        return pow(a, k % self.order, self.p)

    def inv(self, a: int) -> int:
        return pow(a, -1, self.p)

    def gexp(self, k: int) -> int:
        return pow(self.g, k % self.order, self.p)

    def hexp(self, k: int) -> int:
        return pow(self.h, k % self.order, self.p)

    def encode(self, a: int) -> bytes:
        return a.to_bytes((self.p.bit_length() + 7) // 8, "big")

    def decode(self, data: bytes) -> int:
        a = int.from_bytes(data, "big")
        if not self.is_element(a):
            raise ValueError("not an element of the subgroup")
        return a

    def is_element(self, a: Any) -> bool:
        return isinstance(a, int) and 0 < a < self.p and pow(a, self.order, self.p) == 1


@lru_cache(maxsize=None)
def get_group(name: str):
    if name == "secp256k1":
        return Secp256k1Group()
    if name == "test":
        return ModPGroup(TEST_P, TEST_Q, name="test")
    raise ValueError(f"unknown group {name!r}")


@dataclass(frozen=True)
class GroupParams:
    """Group context for commitments: the group plus the tally decoding bound."""

    group: Any
    max_tally: int

    def __post_init__(self) -> None:
        if self.max_tally < 1:
            raise ValueError("max_tally must be positive")

    @property
    def order(self) -> int:
        return self.group.order

    @property
    def g(self):
        return self.group.g

    @property
    def h(self):
        return self.group.h

    @classmethod
    def named(cls, name: str, max_tally: int) -> "GroupParams":
        return cls(get_group(name), max_tally)
