"""ECDSA signatures over secp256k1 (libsecp256k1 through coincurve).

Nonces are derived deterministically (RFC 6979), so signing is a pure
function of key and message and reruns reproduce transcripts bit for bit.
Verification is also pure, so results are memoised process-wide; every node
in a simulation checks the same UCERTs.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache

from coincurve import PrivateKey, PublicKey

from ddemos.encoding import encode


def _private(seed: bytes) -> PrivateKey:
    # the seed is almost always a valid scalar; rehash in the rare case it is not
    while True:
        try:
            return PrivateKey(seed)
        except ValueError:
            seed = hashlib.sha256(b"ddemos/sig-seed" + seed).digest()


@dataclass(frozen=True)
class KeyPair:
    seed: bytes
    public: bytes  # 33-byte compressed point

    @classmethod
    def from_seed(cls, seed: bytes) -> "KeyPair":
        if len(seed) != 32:
            raise ValueError("signing seed must be 32 bytes")
        return cls(seed, _private(seed).public_key.format(compressed=True))

    @classmethod
    def generate(cls, rng) -> "KeyPair":
        return cls.from_seed(rng.randbytes(32))

    def __repr__(self) -> str:
        return f"KeyPair(public={self.public.hex()[:16]}...)"


@lru_cache(maxsize=4096)
def _signing_key(seed: bytes) -> PrivateKey:
    return _private(seed)


@lru_cache(maxsize=4096)
def _public_key(public: bytes) -> PublicKey | None:
    try:
        return PublicKey(public)
    except (ValueError, TypeError):
        return None


def sign(key: KeyPair, message) -> bytes:
    """Sign ``message`` (bytes, or anything with a canonical encoding); DER output."""
    if not isinstance(message, bytes):
        message = encode(message)
    return _signing_key(key.seed).sign(message)


def verify_sig(public: bytes, message, signature: bytes) -> bool:
    if not isinstance(message, bytes):
        message = encode(message)
    if not isinstance(public, bytes) or not isinstance(signature, bytes):
        return False
    return _verify_cached(public, message, signature)


@lru_cache(maxsize=1 << 18)
def _verify_cached(public: bytes, message: bytes, signature: bytes) -> bool:
    if not 8 <= len(signature) <= 72:
        return False
    pk = _public_key(public)
    if pk is None:
        return False
    try:
        return bool(pk.verify(signature, message))
    except (ValueError, TypeError):
        return False


def clear_caches() -> None:
    """Forget memoised verifications (used to keep benchmark repeats cold)."""
    _verify_cached.cache_clear()
    _signing_key.cache_clear()
    _public_key.cache_clear()
