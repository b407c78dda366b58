"""Vote-code encryption under msk and salted hash commitments."""

from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass

from cryptography.hazmat.primitives import padding
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes


@dataclass(frozen=True)
class HashCommitment:
    digest: bytes  # 32 bytes
    salt: bytes  # 8 bytes

    def matches(self, value: bytes) -> bool:
        return hmac.compare_digest(hash_commit(value, self.salt).digest, self.digest)

    def canonical(self):
        return (self.digest, self.salt)


def hash_commit(value: bytes, salt: bytes) -> HashCommitment:
    if len(salt) != 8:
        raise ValueError("salt must be 64 bits")
    return HashCommitment(hashlib.sha256(value + salt).digest(), salt)


def enc_vote_code(code: bytes, msk: bytes, iv: bytes) -> bytes:
    """AES-128-CBC with PKCS7 padding; returns ``iv || ciphertext``.

    The IV is an argument so setup stays reproducible from its seed; callers
    must draw a fresh one per encryption.
    """
    if len(msk) != 16 or len(iv) != 16:
        raise ValueError("msk and iv must be 128 bits")
    padder = padding.PKCS7(128).padder()
    data = padder.update(code) + padder.finalize()
    enc = Cipher(algorithms.AES(msk), modes.CBC(iv)).encryptor()
    return iv + enc.update(data) + enc.finalize()


def dec_vote_code(ct: bytes, msk: bytes) -> bytes | None:
    """Decrypt; a wrong key usually shows up as bad padding (returns None).

    Garbage that happens to unpad cleanly is caught by the caller's per-line
    hash check.
    """
    if len(ct) < 32 or len(ct) % 16:
        return None
    dec = Cipher(algorithms.AES(msk), modes.CBC(ct[:16])).decryptor()
    data = dec.update(ct[16:]) + dec.finalize()
    unpadder = padding.PKCS7(128).unpadder()
    try:
        return unpadder.update(data) + unpadder.finalize()
    except ValueError:
        return None
