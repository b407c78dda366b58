"""Three-move proofs that a vector commitment encrypts a unit vector.

Each component ``(A, B) = (g^r, g^e h^r)`` gets a Chaum-Pedersen OR proof
that ``e`` is 0 or 1, i.e. that ``log_g A = log_h (B / g^b)`` for some bit
``b``.  A final Chaum-Pedersen proof on the component-wise product shows that
the entries sum to 1.

The EA computes the first move.  The challenge is derived later from the
voters' coins, so the EA cannot finish the proof itself.  Instead every
response value is written as a linear form ``alpha + beta * c`` in the
challenge ``c``.  The pairs ``(alpha, beta)`` are Shamir-shared to the
trustees, and trustee ``l`` answers with ``[alpha]_l + c * [beta]_l``.  The
threshold reconstruction of those answers is exactly the honest response.

Response layout per commitment of arity ``m``: for component ``i``, entries
``3i, 3i+1, 3i+2`` hold ``(c0, z0, z1)``; the last entry holds the sum-proof
response ``z``.  ``c1`` is always ``c - c0``.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from typing import Sequence

from ddemos import encoding
from ddemos.crypto.commitments import Opening, VectorCommitment
from ddemos.crypto.groups import GroupParams
from ddemos.crypto.sharing import SharingError, lagrange_at_zero, split_scalar


class IncompleteProof(ValueError):
    """Verification was attempted on a proof that only has its first move."""


@dataclass(frozen=True)
class UnitVectorProof:
    announcements: tuple  # per component: ((a0, b0), (a1, b1))
    sum_announcement: tuple  # (a, b)
    challenge: int | None = None
    responses: tuple | None = None  # flat, length 3m + 1

    @property
    def phase(self) -> str:
        return "first-move-only" if self.responses is None else "complete"

    @property
    def arity(self) -> int:
        return len(self.announcements)

    def first_move(self) -> "UnitVectorProof":
        return UnitVectorProof(self.announcements, self.sum_announcement)

    def canonical(self):
        return (self.announcements, self.sum_announcement, self.challenge, self.responses)

    def to_dict(self, group) -> dict:
        enc = lambda x: group.encode(x).hex()  # noqa: E731
        return {
            "announcements": [[[enc(a0), enc(b0)], [enc(a1), enc(b1)]]
                              for (a0, b0), (a1, b1) in self.announcements],
            "sum_announcement": [enc(x) for x in self.sum_announcement],
            "challenge": None if self.challenge is None else hex(self.challenge),
            "responses": None if self.responses is None else [hex(v) for v in self.responses],
        }

    @classmethod
    def from_dict(cls, d, group) -> "UnitVectorProof":
        dec = lambda s: group.decode(bytes.fromhex(s))  # noqa: E731
        return cls(
            tuple(((dec(a0), dec(b0)), (dec(a1), dec(b1))) for (a0, b0), (a1, b1) in d["announcements"]),
            tuple(dec(x) for x in d["sum_announcement"]),
            None if d["challenge"] is None else int(d["challenge"], 16),
            None if d["responses"] is None else tuple(int(v, 16) for v in d["responses"]),
        )


@dataclass(frozen=True)
class ProverState:
    """Response values as linear forms ``alphas[i] + betas[i] * c``."""

    alphas: tuple[int, ...]
    betas: tuple[int, ...]

    def canonical(self):
        return (self.alphas, self.betas)


@dataclass(frozen=True)
class ProverStateShare:
    index: int
    alphas: tuple[int, ...]
    betas: tuple[int, ...]

    def canonical(self):
        return (self.index, self.alphas, self.betas)

    def to_dict(self) -> dict:
        return {"index": self.index, "alphas": [hex(v) for v in self.alphas],
                "betas": [hex(v) for v in self.betas]}

    @classmethod
    def from_dict(cls, d) -> "ProverStateShare":
        return cls(int(d["index"]), tuple(int(v, 16) for v in d["alphas"]),
                   tuple(int(v, 16) for v in d["betas"]))


def prove_first_move(c: VectorCommitment, o: Opening, params: GroupParams,
                     rng: random.Random) -> tuple[UnitVectorProof, ProverState]:
    """Run the prover's first move on witness ``o``.

    The prover does not check its witness.  For an entry other than 0 or 1 it
    still runs the real branch for ``b = 1`` and the resulting transcript
    fails verification.
    """
    grp = params.group
    q = grp.order
    anns, alphas, betas = [], [], []
    for (A, B), e, r in zip(c.ciphertexts, o.message, o.randomizers):
        b = 1 if e else 0
        w = rng.randrange(q)
        c_sim = rng.randrange(q)
        z_sim = rng.randrange(q)
        # simulated branch 1-b: a = g^z / A^c, b = h^z / (B / g^(1-b))^c
        target = grp.op(B, grp.inv(grp.gexp(1 - b)))
        sim = (grp.op(grp.gexp(z_sim), grp.inv(grp.exp(A, c_sim))),
               grp.op(grp.hexp(z_sim), grp.inv(grp.exp(target, c_sim))))
        real = (grp.gexp(w), grp.hexp(w))
        if b == 0:
            anns.append((real, sim))
            alphas += [(-c_sim) % q, (w - c_sim * r) % q, z_sim]
            betas += [1, r % q, 0]
        else:
            anns.append((sim, real))
            alphas += [c_sim, z_sim, (w - c_sim * r) % q]
            betas += [0, 0, r % q]
    w = rng.randrange(q)
    big_r = sum(o.randomizers) % q
    alphas.append(w)
    betas.append(big_r)
    proof = UnitVectorProof(tuple(anns), (grp.gexp(w), grp.hexp(w)))
    return proof, ProverState(tuple(alphas), tuple(betas))


def evaluate_responses(state: ProverState | ProverStateShare, challenge: int, q: int) -> tuple[int, ...]:
    return tuple((a + b * challenge) % q for a, b in zip(state.alphas, state.betas))


def assemble(first_move: UnitVectorProof, challenge: int, responses: Sequence[int]) -> UnitVectorProof:
    if len(responses) != 3 * first_move.arity + 1:
        raise ValueError("response vector has the wrong length")
    return UnitVectorProof(first_move.announcements, first_move.sum_announcement,
                           challenge, tuple(responses))


def finish_proof(first_move: UnitVectorProof, state: ProverState, challenge: int,
                 params: GroupParams) -> UnitVectorProof:
    q = params.order
    challenge %= q
    return assemble(first_move, challenge, evaluate_responses(state, challenge, q))


def share_prover_state(state: ProverState, h_t: int, n_t: int, q: int,
                       rng: random.Random) -> list[ProverStateShare]:
    acols = [split_scalar(v, h_t, n_t, q, rng) for v in state.alphas]
    bcols = [split_scalar(v, h_t, n_t, q, rng) for v in state.betas]
    return [
        ProverStateShare(i + 1, tuple(col[i][1] for col in acols), tuple(col[i][1] for col in bcols))
        for i in range(n_t)
    ]


def combine_response_shares(shares: Sequence[tuple[int, Sequence[int]]], k: int, q: int) -> tuple[int, ...]:
    """Interpolate trustee response shares ``(index, values)`` at zero."""
    by_index: dict[int, Sequence[int]] = {}
    for idx, vals in shares:
        by_index.setdefault(idx, vals)
    if len(by_index) < k:
        raise SharingError(f"{len(by_index)} response shares, need {k}")
    chosen = list(by_index.items())[:k]
    lam = lagrange_at_zero([i for i, _ in chosen], q)
    width = len(chosen[0][1])
    return tuple(sum(lam[i] * vals[j] for i, vals in chosen) % q for j in range(width))


def _dleq_holds(grp, A, target, ann, c: int, z: int) -> bool:
    a, b = ann
    return (grp.gexp(z) == grp.op(a, grp.exp(A, c))
            and grp.hexp(z) == grp.op(b, grp.exp(target, c)))


def verify_proof(c: VectorCommitment, proof: UnitVectorProof, params: GroupParams,
                 challenge: int | None = None) -> bool:
    """Check a complete proof against ``c``; ``challenge``, if given, must match."""
    if proof.responses is None or proof.challenge is None:
        raise IncompleteProof("proof has no challenge/response yet")
    grp = params.group
    q = grp.order
    m = c.arity
    if proof.arity != m or len(proof.responses) != 3 * m + 1:
        return False
    ch = proof.challenge % q
    if challenge is not None and challenge % q != ch:
        return False
    resp = proof.responses
    one_inv = grp.inv(grp.g)
    for i, ((A, B), (ann0, ann1)) in enumerate(zip(c.ciphertexts, proof.announcements)):
        c0, z0, z1 = resp[3 * i:3 * i + 3]
        c1 = (ch - c0) % q
        if not _dleq_holds(grp, A, B, ann0, c0, z0):
            return False
        if not _dleq_holds(grp, A, grp.op(B, one_inv), ann1, c1, z1):
            return False
    big_a = grp.identity
    big_b = grp.identity
    for A, B in c.ciphertexts:
        big_a = grp.op(big_a, A)
        big_b = grp.op(big_b, B)
    return _dleq_holds(grp, big_a, grp.op(big_b, one_inv), proof.sum_announcement, ch, resp[-1])


def derive_challenge(coins: Sequence[int], context: bytes, q: int) -> int:
    """Hash the serial-ordered coin string and a per-proof context to a scalar mod ``q``."""
    bits = "".join("1" if b else "0" for b in coins)
    data = encoding.encode(("ddemos/challenge", bits, bytes(context)))
    return int.from_bytes(hashlib.sha512(data).digest(), "big") % q
