"""Shamir secret sharing with an honest, signing dealer.

Byte secrets (msk, receipts) are shared over the prime field ``2**255 - 19``;
commitment openings and prover state are shared over the group's scalar
field so that shares of different openings can be added index-wise and still
reconstruct the sum of the openings.

Every byte-secret share carries the dealer's signature over
``(context, index, value)``.  Reconstruction discards shares whose signature
does not verify before it looks at the values.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterable, Sequence

from ddemos.crypto.commitments import Opening
from ddemos.crypto.signatures import KeyPair, sign, verify_sig

BYTES_FIELD = 2**255 - 19
MAX_SECRET_BYTES = 30


class SharingError(ValueError):
    pass


class InsufficientShares(SharingError):
    """Fewer than the threshold of usable shares were supplied."""


# --- scalar Shamir --------------------------------------------------------


def split_scalar(secret: int, k: int, n: int, prime: int, rng: random.Random) -> list[tuple[int, int]]:
    """Return ``[(i, f(i)) for i in 1..n]`` for a random degree-``k-1`` ``f`` with ``f(0) = secret``."""
    if not 1 <= k <= n:
        raise SharingError(f"need 1 <= k <= n, got k={k}, n={n}")
    if n >= prime:
        raise SharingError("too many shares for the field")
    coeffs = [secret % prime] + [rng.randrange(prime) for _ in range(k - 1)]
    out = []
    for x in range(1, n + 1):
        acc = 0
        for c in reversed(coeffs):
            acc = (acc * x + c) % prime
        out.append((x, acc))
    return out


def lagrange_at_zero(indices: Sequence[int], prime: int) -> dict[int, int]:
    coeffs = {}
    for i in indices:
        num, den = 1, 1
        for j in indices:
            if j != i:
                num = num * (-j) % prime
                den = den * (i - j) % prime
        coeffs[i] = num * pow(den, -1, prime) % prime
    return coeffs


def interpolate_at_zero(points: Sequence[tuple[int, int]], prime: int) -> int:
    xs = [x for x, _ in points]
    if len(set(xs)) != len(xs):
        raise SharingError("duplicate share indices")
    lam = lagrange_at_zero(xs, prime)
    return sum(lam[x] * y for x, y in points) % prime


def interpolate_at(points: Sequence[tuple[int, int]], x0: int, prime: int) -> int:
    """Evaluate the interpolating polynomial through ``points`` at ``x0``."""
    total = 0
    for i, (xi, yi) in enumerate(points):
        num, den = 1, 1
        for j, (xj, _) in enumerate(points):
            if i != j:
                num = num * (x0 - xj) % prime
                den = den * (xi - xj) % prime
        total = (total + yi * num * pow(den, -1, prime)) % prime
    return total


# --- signed byte-secret shares --------------------------------------------


@dataclass(frozen=True)
class Share:
    index: int
    value: int
    context: bytes
    signature: bytes

    def payload(self):
        return ("share", self.context, self.index, self.value)

    def verify(self, dealer_public: bytes) -> bool:
        # multicast shares reach many nodes as the same object; check once
        memo = self.__dict__.get("_verified")
        if memo is not None and memo[0] == dealer_public:
            return memo[1]
        ok = verify_sig(dealer_public, self.payload(), self.signature)
        object.__setattr__(self, "_verified", (dealer_public, ok))
        return ok

    def canonical(self):
        return (self.index, self.value, self.context, self.signature)

    def to_dict(self) -> dict:
        return {"index": self.index, "value": hex(self.value),
                "context": self.context.hex(), "signature": self.signature.hex()}

    @classmethod
    def from_dict(cls, d) -> "Share":
        return cls(int(d["index"]), int(d["value"], 16),
                   bytes.fromhex(d["context"]), bytes.fromhex(d["signature"]))


def _secret_to_int(secret: bytes) -> int:
    if not secret:
        raise SharingError("secret must be non-empty")
    if len(secret) > MAX_SECRET_BYTES:
        raise SharingError(f"secret longer than {MAX_SECRET_BYTES} bytes")
    return int.from_bytes(b"\x01" + secret, "big")


def _int_to_secret(value: int) -> bytes:
    raw = value.to_bytes((value.bit_length() + 7) // 8, "big")
    if not raw or raw[0] != 1:
        raise SharingError("reconstructed value is not a valid secret encoding")
    return raw[1:]


def share_secret(secret: bytes, k: int, n: int, dealer: KeyPair, context: bytes,
                 rng: random.Random) -> list[Share]:
    points = split_scalar(_secret_to_int(secret), k, n, BYTES_FIELD, rng)
    shares = []
    for idx, val in points:
        sig = sign(dealer, ("share", context, idx, val))
        shares.append(Share(idx, val, context, sig))
    return shares


def usable_shares(shares: Iterable[Share], dealer_public: bytes | None = None,
                  context: bytes | None = None) -> list[Share]:
    """Filter to signature-valid shares, one per index, in first-seen order."""
    seen: dict[int, Share] = {}
    for s in shares:
        if s.index in seen:
            continue
        if context is not None and s.context != context:
            continue
        if dealer_public is not None and not s.verify(dealer_public):
            continue
        seen[s.index] = s
    return list(seen.values())


def reconstruct(shares: Iterable[Share], k: int, dealer_public: bytes | None = None,
                context: bytes | None = None) -> bytes:
    good = usable_shares(shares, dealer_public, context)
    if len(good) < k:
        raise InsufficientShares(f"{len(good)} usable shares, need {k}")
    value = interpolate_at_zero([(s.index, s.value) for s in good[:k]], BYTES_FIELD)
    return _int_to_secret(value)


# --- linear sharing of openings -------------------------------------------


@dataclass(frozen=True)
class OpeningShare:
    """Share ``index`` of every scalar in an :class:`Opening`."""

    index: int
    message: tuple[int, ...]
    randomizers: tuple[int, ...]

    def canonical(self):
        return (self.index, tuple(self.message), tuple(self.randomizers))

    def to_dict(self) -> dict:
        return {"index": self.index, "message": [hex(v) for v in self.message],
                "randomizers": [hex(v) for v in self.randomizers]}

    @classmethod
    def from_dict(cls, d) -> "OpeningShare":
        return cls(int(d["index"]), tuple(int(v, 16) for v in d["message"]),
                   tuple(int(v, 16) for v in d["randomizers"]))


def share_opening(o: Opening, h_t: int, n_t: int, q: int, rng: random.Random) -> list[OpeningShare]:
    cols = [split_scalar(v, h_t, n_t, q, rng) for v in o.message]
    rcols = [split_scalar(v, h_t, n_t, q, rng) for v in o.randomizers]
    return [
        OpeningShare(i + 1, tuple(c[i][1] for c in cols), tuple(c[i][1] for c in rcols))
        for i in range(n_t)
    ]


def add_opening_shares(a: OpeningShare, b: OpeningShare, q: int) -> OpeningShare:
    if a.index != b.index:
        raise SharingError(f"cannot add shares with indices {a.index} and {b.index}")
    if len(a.message) != len(b.message):
        raise SharingError("arity mismatch between opening shares")
    return OpeningShare(
        a.index,
        tuple((x + y) % q for x, y in zip(a.message, b.message)),
        tuple((x + y) % q for x, y in zip(a.randomizers, b.randomizers)),
    )


def sum_opening_shares(shares: Sequence[OpeningShare], index: int, m: int, q: int) -> OpeningShare:
    total = OpeningShare(index, (0,) * m, (0,) * m)
    for s in shares:
        total = add_opening_shares(total, s, q)
    return total


def reconstruct_opening(shares: Iterable[OpeningShare], k: int, q: int) -> Opening:
    by_index: dict[int, OpeningShare] = {}
    for s in shares:
        by_index.setdefault(s.index, s)
    if len(by_index) < k:
        raise InsufficientShares(f"{len(by_index)} opening shares, need {k}")
    chosen = list(by_index.values())[:k]
    lam = lagrange_at_zero([s.index for s in chosen], q)
    m = len(chosen[0].message)
    msg = tuple(sum(lam[s.index] * s.message[j] for s in chosen) % q for j in range(m))
    rnd = tuple(sum(lam[s.index] * s.randomizers[j] for s in chosen) % q for j in range(m))
    return Opening(msg, rnd)
