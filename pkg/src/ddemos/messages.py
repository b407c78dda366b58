"""Wire messages exchanged by election components.

All are frozen dataclasses with a ``canonical()`` form, so they can be
signed, hashed into the run digest, and compared byte-for-byte.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from ddemos.crypto.sharing import Share
from ddemos.crypto.signatures import verify_sig


def endorse_payload(serial: int, code: bytes):
    return ("endorse", serial, code)


@dataclass(frozen=True)
class UCert:
    """Uniqueness certificate: distinct VC signatures over ``(serial, code)``."""

    serial: int
    code: bytes
    sigs: tuple  # ((signer index, signature), ...)

    def canonical(self):
        return ("ucert", self.serial, self.code, self.sigs)

    def valid(self, vc_publics, threshold: int) -> bool:
        key = (tuple(vc_publics), threshold)
        memo = self.__dict__.get("_valid")
        if memo is not None and memo[0] == key:
            return memo[1]
        ok = self._check(vc_publics, threshold)
        object.__setattr__(self, "_valid", (key, ok))
        return ok

    def _check(self, vc_publics, threshold: int) -> bool:
        signers = set()
        payload = endorse_payload(self.serial, self.code)
        for idx, sig in self.sigs:
            if not isinstance(idx, int) or not 0 <= idx < len(vc_publics) or idx in signers:
                return False
            if not verify_sig(vc_publics[idx], payload, sig):
                return False
            signers.add(idx)
        return len(signers) >= threshold

    def to_dict(self) -> dict:
        return {"serial": self.serial, "code": self.code.hex(),
                "sigs": [[i, s.hex()] for i, s in self.sigs]}

    @classmethod
    def from_dict(cls, d) -> "UCert":
        return cls(int(d["serial"]), bytes.fromhex(d["code"]),
                   tuple((int(i), bytes.fromhex(s)) for i, s in d["sigs"]))


@dataclass(frozen=True)
class Vote:
    serial: int
    code: bytes

    def canonical(self):
        return ("VOTE", self.serial, self.code)


@dataclass(frozen=True)
class VoteReply:
    serial: int
    code: bytes
    receipt: bytes | None
    error: str | None = None

    def canonical(self):
        return ("VOTE-REPLY", self.serial, self.code, self.receipt, self.error)


@dataclass(frozen=True)
class Endorse:
    serial: int
    code: bytes

    def canonical(self):
        return ("ENDORSE", self.serial, self.code)


@dataclass(frozen=True)
class Endorsement:
    serial: int
    code: bytes
    signer: int
    sig: bytes

    def canonical(self):
        return ("ENDORSEMENT", self.serial, self.code, self.signer, self.sig)


@dataclass(frozen=True)
class VoteP:
    serial: int
    code: bytes
    share: Share | None
    ucert: UCert

    def canonical(self):
        return ("VOTE_P", self.serial, self.code, self.share, self.ucert)


@dataclass(frozen=True)
class Announce:
    """Batched ANNOUNCE: one ``(serial, code or None, ucert or None)`` per ballot."""

    entries: tuple

    def canonical(self):
        return ("ANNOUNCE", self.entries)


@dataclass(frozen=True)
class RecoverRequest:
    serials: tuple

    def canonical(self):
        return ("RECOVER-REQUEST", self.serials)


@dataclass(frozen=True)
class RecoverResponse:
    entries: tuple  # ((serial, code, ucert), ...)

    def canonical(self):
        return ("RECOVER-RESPONSE", self.entries)


@dataclass(frozen=True)
class BBPush:
    vote_set: tuple  # ((serial, code), ...) sorted by serial
    ucerts: tuple
    msk_share: Share | None

    def canonical(self):
        return ("BB-PUSH", self.vote_set, self.ucerts, self.msk_share)


@dataclass(frozen=True)
class ReadRequest:
    path: str
    nonce: int

    def canonical(self):
        return ("READ", self.path, self.nonce)


@dataclass(frozen=True)
class ReadReply:
    path: str
    nonce: int
    digest: bytes | None
    body: Any

    def canonical(self):
        # the body is identified by its digest; garbage bodies still hash
        return ("READ-REPLY", self.path, self.nonce, self.digest)


@dataclass(frozen=True)
class TrusteePostMsg:
    post: Any

    def canonical(self):
        return ("TRUSTEE-POST", self.post)


def ucert_ok(ucert: Any, serial: int, vc_publics, threshold: int) -> bool:
    return isinstance(ucert, UCert) and ucert.serial == serial and ucert.valid(vc_publics, threshold)
