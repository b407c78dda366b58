"""Lifted-ElGamal vector commitments to option encodings.

Component ``i`` of ``commit(e, r)`` is the pair ``(g^r_i, g^e_i * h^r_i)``.
Multiplying two commitments component-wise commits to the sum of the
encodings under the sum of the randomizers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from ddemos.crypto.groups import GroupParams


class CommitmentError(ValueError):
    pass


class InvalidOpening(CommitmentError):
    """The opening does not match the commitment."""


class DecodingOverflow(CommitmentError):
    """A committed exponent lies beyond the decoding bound ``max_tally``."""


def unit_vector(index: int, m: int) -> tuple[int, ...]:
    """Encoding of option ``index`` (0-based) among ``m`` options."""
    if not 0 <= index < m:
        raise ValueError(f"option index {index} out of range for m={m}")
    return tuple(1 if i == index else 0 for i in range(m))


def is_unit_vector(vector: Sequence[int]) -> bool:
    return sum(1 for v in vector if v == 1) == 1 and all(v in (0, 1) for v in vector)


def zero_vector(m: int) -> tuple[int, ...]:
    return (0,) * m


@dataclass(frozen=True)
class VectorCommitment:
    ciphertexts: tuple  # of (element, element) pairs

    @property
    def arity(self) -> int:
        return len(self.ciphertexts)

    def canonical(self):
        return tuple((a, b) for a, b in self.ciphertexts)

    def to_dict(self, group) -> list:
        return [[group.encode(a).hex(), group.encode(b).hex()] for a, b in self.ciphertexts]

    @classmethod
    def from_dict(cls, data, group) -> "VectorCommitment":
        return cls(tuple(
            (group.decode(bytes.fromhex(a)), group.decode(bytes.fromhex(b))) for a, b in data
        ))


@dataclass(frozen=True)
class Opening:
    message: tuple[int, ...]
    randomizers: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.message) != len(self.randomizers):
            raise CommitmentError("opening message and randomizers differ in length")

    def canonical(self):
        return (tuple(self.message), tuple(self.randomizers))

    def to_dict(self) -> dict:
        return {"message": list(self.message), "randomizers": [hex(r) for r in self.randomizers]}

    @classmethod
    def from_dict(cls, data) -> "Opening":
        return cls(tuple(int(v) for v in data["message"]),
                   tuple(int(r, 16) for r in data["randomizers"]))


def commit(encoding: Sequence[int], randomizers: Sequence[int], params: GroupParams) -> VectorCommitment:
    if len(encoding) != len(randomizers):
        raise CommitmentError(
            f"arity mismatch: {len(encoding)} entries, {len(randomizers)} randomizers")
    grp = params.group
    q = grp.order
    cts = []
    for e, r in zip(encoding, randomizers):
        if not 0 <= e < q:
            raise CommitmentError("encoding entry outside [0, group order)")
        cts.append((grp.gexp(r), grp.op(grp.gexp(e), grp.hexp(r))))
    return VectorCommitment(tuple(cts))


def identity_commitment(m: int, params: GroupParams) -> VectorCommitment:
    one = params.group.identity
    return VectorCommitment(((one, one),) * m)


def combine(c1: VectorCommitment, c2: VectorCommitment, params: GroupParams) -> VectorCommitment:
    if c1.arity != c2.arity:
        raise CommitmentError(f"arity mismatch: {c1.arity} vs {c2.arity}")
    op = params.group.op
    return VectorCommitment(tuple(
        (op(a1, a2), op(b1, b2)) for (a1, b1), (a2, b2) in zip(c1.ciphertexts, c2.ciphertexts)
    ))


def combine_openings(o1: Opening, o2: Opening, params: GroupParams) -> Opening:
    if len(o1.message) != len(o2.message):
        raise CommitmentError("arity mismatch between openings")
    q = params.order
    return Opening(
        tuple(a + b for a, b in zip(o1.message, o2.message)),
        tuple((a + b) % q for a, b in zip(o1.randomizers, o2.randomizers)),
    )


def fold(commitments: Sequence[VectorCommitment], m: int, params: GroupParams) -> VectorCommitment:
    total = identity_commitment(m, params)
    for c in commitments:
        total = combine(total, c, params)
    return total


def open_and_decode(c: VectorCommitment, o: Opening, params: GroupParams) -> tuple[int, ...]:
    """Check ``o`` against ``c`` and recover each committed exponent.

    Exponents are recovered by a linear scan over ``0..max_tally``.  Raises
    :class:`InvalidOpening` on any inconsistency and :class:`DecodingOverflow`
    when a consistent exponent exceeds the bound.
    """
    if c.arity != len(o.randomizers):
        raise InvalidOpening(f"arity mismatch: {c.arity} vs {len(o.randomizers)}")
    grp = params.group
    q = grp.order
    decoded = []
    for i, ((a, b), r) in enumerate(zip(c.ciphertexts, o.randomizers)):
        if a != grp.gexp(r):
            raise InvalidOpening(f"component {i}: randomizer does not match")
        plain = grp.op(b, grp.inv(grp.hexp(r)))
        value = _scan_dlog(grp, plain, params.max_tally)
        if value is None:
            if plain == grp.gexp(o.message[i]):
                raise DecodingOverflow(
                    f"component {i}: exponent exceeds max_tally={params.max_tally}")
            raise InvalidOpening(f"component {i}: message does not match")
        if value != o.message[i] % q:
            raise InvalidOpening(f"component {i}: message does not match")
        decoded.append(value)
    return tuple(decoded)


def _scan_dlog(grp, target, bound: int) -> int | None:
    acc = grp.identity
    for e in range(bound + 1):
        if acc == target:
            return e
        acc = grp.op(acc, grp.g)
    return None


def verify_opening(c: VectorCommitment, o: Opening, params: GroupParams) -> bool:
    try:
        open_and_decode(c, o, params)
    except CommitmentError:
        return False
    return True
