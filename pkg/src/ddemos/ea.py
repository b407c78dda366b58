"""Election Authority: one-shot generation of every component's init data.

``setup`` is a pure function of the parameters (including the seed).  It
returns only what each recipient legitimately holds; the EA signing key and
msk are local variables that go out of scope when it returns.

Within a ballot part, printed line ``j`` is always option ``j``.  Each VC,
BB and trustee sees the part's lines in a shuffled order: position ``p`` of
the shuffled list holds printed line ``perm[p]``.
"""

from __future__ import annotations

import json
import os
import random
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

from ddemos import encoding
from ddemos.crypto.commitments import Opening, VectorCommitment, commit, unit_vector
from ddemos.crypto.groups import GroupParams
from ddemos.crypto.proofs import ProverStateShare, UnitVectorProof, prove_first_move, share_prover_state
from ddemos.crypto.sharing import OpeningShare, Share, share_opening, share_secret
from ddemos.crypto.signatures import KeyPair, sign, verify_sig
from ddemos.crypto.symmetric import HashCommitment, enc_vote_code, hash_commit

PARTS = ("A", "B")
CODE_BYTES = 20
RECEIPT_BYTES = 8
MSK_CONTEXT = b"ddemos/msk"


class ParamError(ValueError):
    pass


class BundleError(ValueError):
    """An election bundle is missing pieces or is internally inconsistent."""


class IncompleteAudit(ValueError):
    """Openings needed for a setup audit are not (yet) available."""


def receipt_context(serial: int, part: str, pos: int) -> bytes:
    return encoding.encode(("receipt", serial, part, pos))


@dataclass(frozen=True)
class ElectionParams:
    n: int
    m: int
    options: tuple[str, ...] = ()
    n_v: int = 4
    f_v: int = 1
    n_b: int = 3
    f_b: int = 1
    n_t: int = 3
    h_t: int = 2
    t_end: int = 1000
    seed: int = 0
    group: str = "secp256k1"

    def __post_init__(self) -> None:
        if not self.options:
            object.__setattr__(self, "options", tuple(f"option-{i + 1}" for i in range(self.m)))
        else:
            object.__setattr__(self, "options", tuple(self.options))

    def validate(self) -> None:
        checks = [
            (self.n >= 1, "n >= 1"),
            (self.m >= 2, "m >= 2"),
            (len(self.options) == self.m, "len(options) == m"),
            (len(set(self.options)) == self.m, "option labels are distinct"),
            (self.f_v >= 0 and self.n_v >= 3 * self.f_v + 1, "N_v >= 3*f_v + 1"),
            (self.f_b >= 0 and self.n_b >= 2 * self.f_b + 1, "N_b >= 2*f_b + 1"),
            (1 <= self.h_t <= self.n_t, "1 <= h_t <= N_t"),
            (0 <= self.seed < 2**64, "seed is a 64-bit value"),
            (self.t_end >= 0, "T_end >= 0"),
            (self.group in ("secp256k1", "test"), "group is 'secp256k1' or 'test'"),
        ]
        for ok, rule in checks:
            if not ok:
                raise ParamError(f"invalid election parameters: {rule} violated")

    @property
    def group_params(self) -> GroupParams:
        return GroupParams.named(self.group, max(self.n, 1))

    def canonical(self):
        return (self.n, self.m, self.options, self.n_v, self.f_v, self.n_b, self.f_b,
                self.n_t, self.h_t, self.t_end, self.seed, self.group)

    def to_dict(self) -> dict:
        return {"n": self.n, "m": self.m, "options": list(self.options), "n_v": self.n_v,
                "f_v": self.f_v, "n_b": self.n_b, "f_b": self.f_b, "n_t": self.n_t,
                "h_t": self.h_t, "t_end": self.t_end, "seed": self.seed, "group": self.group}

    @classmethod
    def from_dict(cls, d: dict) -> "ElectionParams":
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        if "options" in known:
            known["options"] = tuple(known["options"])
        return cls(**known)


# --- ballots and per-recipient init data ----------------------------------


@dataclass(frozen=True)
class BallotLine:
    code: bytes
    option: str
    receipt: bytes

    def canonical(self):
        return (self.code, self.option, self.receipt)


@dataclass(frozen=True)
class Ballot:
    serial: int
    parts: dict  # part label -> tuple[BallotLine, ...] in option order

    def line(self, part: str, option_index: int) -> BallotLine:
        return self.parts[part][option_index]

    def canonical(self):
        return (self.serial, {p: self.parts[p] for p in PARTS})

    def to_dict(self) -> dict:
        return {"serial": self.serial, "parts": {
            p: [{"code": ln.code.hex(), "option": ln.option, "receipt": ln.receipt.hex()}
                for ln in self.parts[p]] for p in PARTS}}

    @classmethod
    def from_dict(cls, d) -> "Ballot":
        return cls(int(d["serial"]), {
            p: tuple(BallotLine(bytes.fromhex(x["code"]), x["option"], bytes.fromhex(x["receipt"]))
                     for x in d["parts"][p]) for p in PARTS})


@dataclass(frozen=True)
class PublicInfo:
    params: ElectionParams
    ea_public: bytes
    vc_publics: tuple[bytes, ...]
    trustee_publics: tuple[bytes, ...]

    def canonical(self):
        return (self.params, self.ea_public, self.vc_publics, self.trustee_publics)

    def to_dict(self) -> dict:
        return {"params": self.params.to_dict(), "ea_public": self.ea_public.hex(),
                "vc_publics": [k.hex() for k in self.vc_publics],
                "trustee_publics": [k.hex() for k in self.trustee_publics]}

    @classmethod
    def from_dict(cls, d) -> "PublicInfo":
        return cls(ElectionParams.from_dict(d["params"]), bytes.fromhex(d["ea_public"]),
                   tuple(bytes.fromhex(k) for k in d["vc_publics"]),
                   tuple(bytes.fromhex(k) for k in d["trustee_publics"]))


@dataclass(frozen=True)
class VCLine:
    commitment: HashCommitment
    receipt_share: Share

    def canonical(self):
        return (self.commitment, self.receipt_share)


@dataclass
class VCInit:
    index: int  # 1-based, doubles as the share index
    keypair: KeyPair
    msk_share: Share
    lines: dict  # serial -> part -> tuple[VCLine, ...]
    public: PublicInfo

    def canonical(self):
        return (self.index, self.keypair.seed, self.msk_share, self.lines, self.public)


@dataclass(frozen=True)
class BBLine:
    enc_code: bytes
    commitment: VectorCommitment
    proof: UnitVectorProof  # first move only

    def canonical(self):
        return (self.enc_code, self.commitment, self.proof)


@dataclass
class BBInit:
    h_msk: HashCommitment
    lines: dict  # serial -> part -> tuple[BBLine, ...]
    public: PublicInfo

    def canonical(self):
        return (self.h_msk, self.lines, self.public)


@dataclass(frozen=True)
class TrusteeLine:
    opening_share: OpeningShare
    zk_share: ProverStateShare
    signature: bytes

    def payload(self, serial: int, part: str, pos: int, commitment: VectorCommitment):
        return ("trustee-line", serial, part, pos, commitment, self.opening_share, self.zk_share)

    def canonical(self):
        return (self.opening_share, self.zk_share, self.signature)


@dataclass
class TrusteeInit:
    index: int
    keypair: KeyPair
    commitments: dict  # serial -> part -> tuple[VectorCommitment, ...]
    lines: dict  # serial -> part -> tuple[TrusteeLine, ...]
    public: PublicInfo

    def canonical(self):
        return (self.index, self.keypair.seed, self.commitments, self.lines, self.public)

    def line_is_authentic(self, serial: int, part: str, pos: int) -> bool:
        ln = self.lines[serial][part][pos]
        c = self.commitments[serial][part][pos]
        return verify_sig(self.public.ea_public, ln.payload(serial, part, pos, c), ln.signature)


@dataclass
class ElectionBundle:
    params: ElectionParams
    ballots: list[Ballot]
    vc_inits: list[VCInit]
    bb_init: BBInit
    trustee_inits: list[TrusteeInit]
    public: PublicInfo
    # test fixtures only: which (serial, part) pairs were tampered with at setup
    attack: dict | None = field(default=None)

    def ballot(self, serial: int) -> Ballot:
        for b in self.ballots:
            if b.serial == serial:
                return b
        raise KeyError(serial)

    @property
    def serials(self) -> list[int]:
        return sorted(self.bb_init.lines)

    def digest(self) -> bytes:
        return encoding.digest((self.ballots, self.vc_inits, self.bb_init, self.trustee_inits, self.public))

    def save(self, out_dir: str) -> None:
        save_bundle(self, out_dir)


# --- setup -----------------------------------------------------------------


def _fresh_code(rng: random.Random, used: set[bytes]) -> bytes:
    while True:
        code = rng.randbytes(CODE_BYTES)
        if code not in used:
            used.add(code)
            return code


def _tampered_option(attack: dict | None, serial: int, part: str, j: int) -> int:
    """Option actually committed for printed line ``j`` (differs only under attack)."""
    if not attack or attack.get("kind") != "modify":
        return j
    if serial not in attack.get("serials", ()) or part != attack.get("part", "A"):
        return j
    a, b = attack.get("swap", (0, 1))
    return b if j == a else a if j == b else j


def setup(params: ElectionParams, attack: dict | None = None) -> ElectionBundle:
    """Generate the full election bundle.

    ``attack`` builds a dishonest EA for audit fixtures.  Supported:
    ``{"kind": "modify", "serials": [...], "part": "A", "swap": [0, 1]}``
    commits the listed parts with two options exchanged, and
    ``{"kind": "clash", "serials": [a, b]}`` prints ballot ``b`` as a copy of
    ballot ``a``.
    """
    params.validate()
    if attack is not None and attack.get("kind") not in ("modify", "clash"):
        raise ParamError(f"unknown attack kind {attack.get('kind')!r}")
    rng = random.Random(params.seed)
    gp = params.group_params
    q = gp.order
    m = params.m

    ea_key = KeyPair.generate(rng)
    vc_keys = [KeyPair.generate(rng) for _ in range(params.n_v)]
    trustee_keys = [KeyPair.generate(rng) for _ in range(params.n_t)]
    public = PublicInfo(params, ea_key.public, tuple(k.public for k in vc_keys),
                        tuple(k.public for k in trustee_keys))

    msk = rng.randbytes(16)
    h_msk = hash_commit(msk, rng.randbytes(8))
    k_v = params.n_v - params.f_v
    msk_shares = share_secret(msk, k_v, params.n_v, ea_key, MSK_CONTEXT, rng)

    ballots: list[Ballot] = []
    vc_lines: list[dict] = [{} for _ in range(params.n_v)]
    bb_lines: dict = {}
    tr_commitments: list[dict] = [{} for _ in range(params.n_t)]
    tr_lines: list[dict] = [{} for _ in range(params.n_t)]

    for serial in range(1, params.n + 1):
        used: set[bytes] = set()
        printed = {}
        for part in PARTS:
            printed[part] = tuple(
                BallotLine(_fresh_code(rng, used), params.options[j], rng.randbytes(RECEIPT_BYTES))
                for j in range(m))
        ballots.append(Ballot(serial, printed))

        bb_lines[serial] = {}
        for i in range(params.n_v):
            vc_lines[i][serial] = {}
        for t in range(params.n_t):
            tr_commitments[t][serial] = {}
            tr_lines[t][serial] = {}

        for part in PARTS:
            perm = list(range(m))
            rng.shuffle(perm)
            bb_part, vc_part, trc_part, trl_part = [], [[] for _ in vc_keys], [], [[] for _ in trustee_keys]
            for pos, j in enumerate(perm):
                line = printed[part][j]
                hc = hash_commit(line.code, rng.randbytes(8))
                rshares = share_secret(line.receipt, k_v, params.n_v, ea_key,
                                       receipt_context(serial, part, pos), rng)
                for i in range(params.n_v):
                    vc_part[i].append(VCLine(hc, rshares[i]))

                e = unit_vector(_tampered_option(attack, serial, part, j), m)
                r = tuple(rng.randrange(q) for _ in range(m))
                c = commit(e, r, gp)
                o = Opening(e, r)
                first, state = prove_first_move(c, o, gp, rng)
                bb_part.append(BBLine(enc_vote_code(line.code, msk, rng.randbytes(16)), c, first))

                oshares = share_opening(o, params.h_t, params.n_t, q, rng)
                zshares = share_prover_state(state, params.h_t, params.n_t, q, rng)
                trc_part.append(c)
                for t in range(params.n_t):
                    payload = ("trustee-line", serial, part, pos, c, oshares[t], zshares[t])
                    trl_part[t].append(TrusteeLine(oshares[t], zshares[t], sign(ea_key, payload)))

            bb_lines[serial][part] = tuple(bb_part)
            for i in range(params.n_v):
                vc_lines[i][serial][part] = tuple(vc_part[i])
            for t in range(params.n_t):
                tr_commitments[t][serial][part] = tuple(trc_part)
                tr_lines[t][serial][part] = tuple(trl_part[t])

    if attack is not None and attack.get("kind") == "clash":
        a, b = attack["serials"]
        src = ballots[a - 1]
        ballots[b - 1] = Ballot(src.serial, dict(src.parts))

    vc_inits = [VCInit(i + 1, vc_keys[i], msk_shares[i], vc_lines[i], public) for i in range(params.n_v)]
    trustee_inits = [TrusteeInit(t + 1, trustee_keys[t], tr_commitments[t], tr_lines[t], public)
                     for t in range(params.n_t)]
    return ElectionBundle(params, ballots, vc_inits, BBInit(h_msk, bb_lines, public), trustee_inits,
                          public, attack)


# --- setup audits ----------------------------------------------------------


def audit_setup(serial: int, part: str, printed: Sequence[BallotLine], codes: Sequence[bytes | None],
                openings: Sequence[Opening | None], options: Sequence[str]) -> list[str]:
    """Compare a printed ballot part with its opened BB entries.

    ``codes[p]`` and ``openings[p]`` are the decrypted vote code and the
    published opening at shuffled position ``p``.  Returns a list of
    violations (empty means pass).
    """
    if len(openings) != len(printed) or any(o is None for o in openings):
        raise IncompleteAudit(f"serial {serial} part {part}: openings not published")
    by_code = {c: p for p, c in enumerate(codes) if c is not None}
    problems = []
    for line in printed:
        pos = by_code.get(line.code)
        if pos is None:
            problems.append(f"serial {serial} part {part}: printed code for {line.option!r} not on the BB")
            continue
        expected = unit_vector(options.index(line.option), len(options))
        if tuple(openings[pos].message) != expected:
            problems.append(
                f"serial {serial} part {part}: code for {line.option!r} opens to {tuple(openings[pos].message)}")
    return problems


def serial_clashes(ballots: Iterable[Ballot]) -> list[int]:
    """Serial numbers that appear on more than one printed ballot."""
    seen: dict[int, int] = {}
    for b in ballots:
        seen[b.serial] = seen.get(b.serial, 0) + 1
    return sorted(s for s, k in seen.items() if k > 1)


# --- bundle files ----------------------------------------------------------


def _kp_dict(kp: KeyPair) -> dict:
    return {"seed": kp.seed.hex(), "public": kp.public.hex()}


def _kp_load(d) -> KeyPair:
    kp = KeyPair.from_seed(bytes.fromhex(d["seed"]))
    if kp.public.hex() != d["public"]:
        raise BundleError("keypair public key does not match its seed")
    return kp


def _hc_dict(h: HashCommitment) -> list:
    return [h.digest.hex(), h.salt.hex()]


def _hc_load(d) -> HashCommitment:
    return HashCommitment(bytes.fromhex(d[0]), bytes.fromhex(d[1]))


def _per_part(lines: dict, fn) -> dict:
    return {str(s): {p: [fn(x) for x in lines[s][p]] for p in PARTS} for s in sorted(lines)}


def _per_part_load(d: dict, fn) -> dict:
    return {int(s): {p: tuple(fn(x) for x in d[s][p]) for p in PARTS} for s in d}


def vc_init_to_dict(v: VCInit) -> dict:
    return {"index": v.index, "keypair": _kp_dict(v.keypair), "msk_share": v.msk_share.to_dict(),
            "lines": _per_part(v.lines, lambda ln: {"hash": _hc_dict(ln.commitment),
                                                    "receipt_share": ln.receipt_share.to_dict()}),
            "public": v.public.to_dict()}


def vc_init_from_dict(d) -> VCInit:
    return VCInit(int(d["index"]), _kp_load(d["keypair"]), Share.from_dict(d["msk_share"]),
                  _per_part_load(d["lines"], lambda x: VCLine(_hc_load(x["hash"]),
                                                              Share.from_dict(x["receipt_share"]))),
                  PublicInfo.from_dict(d["public"]))


def bb_init_to_dict(b: BBInit) -> dict:
    grp = b.public.params.group_params.group
    return {"h_msk": _hc_dict(b.h_msk),
            "lines": _per_part(b.lines, lambda ln: {"enc_code": ln.enc_code.hex(),
                                                    "commitment": ln.commitment.to_dict(grp),
                                                    "proof": ln.proof.to_dict(grp)}),
            "public": b.public.to_dict()}


def bb_init_from_dict(d) -> BBInit:
    public = PublicInfo.from_dict(d["public"])
    grp = public.params.group_params.group
    return BBInit(_hc_load(d["h_msk"]),
                  _per_part_load(d["lines"], lambda x: BBLine(
                      bytes.fromhex(x["enc_code"]), VectorCommitment.from_dict(x["commitment"], grp),
                      UnitVectorProof.from_dict(x["proof"], grp))),
                  public)


def trustee_init_to_dict(t: TrusteeInit) -> dict:
    grp = t.public.params.group_params.group
    return {"index": t.index, "keypair": _kp_dict(t.keypair),
            "commitments": _per_part(t.commitments, lambda c: c.to_dict(grp)),
            "lines": _per_part(t.lines, lambda ln: {"opening_share": ln.opening_share.to_dict(),
                                                    "zk_share": ln.zk_share.to_dict(),
                                                    "signature": ln.signature.hex()}),
            "public": t.public.to_dict()}


def trustee_init_from_dict(d) -> TrusteeInit:
    public = PublicInfo.from_dict(d["public"])
    grp = public.params.group_params.group
    return TrusteeInit(int(d["index"]), _kp_load(d["keypair"]),
                       _per_part_load(d["commitments"], lambda c: VectorCommitment.from_dict(c, grp)),
                       _per_part_load(d["lines"], lambda x: TrusteeLine(
                           OpeningShare.from_dict(x["opening_share"]), ProverStateShare.from_dict(x["zk_share"]),
                           bytes.fromhex(x["signature"]))),
                       public)


def _dump(path: str, obj: Any) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True)


def save_bundle(bundle: ElectionBundle, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "ballots.jsonl"), "w") as fh:
        for b in bundle.ballots:
            fh.write(json.dumps(b.to_dict(), sort_keys=True) + "\n")
    for v in bundle.vc_inits:
        _dump(os.path.join(out_dir, f"vc_init_{v.index}.json"), vc_init_to_dict(v))
    _dump(os.path.join(out_dir, "bb_init.json"), bb_init_to_dict(bundle.bb_init))
    for t in bundle.trustee_inits:
        _dump(os.path.join(out_dir, f"trustee_init_{t.index}.json"), trustee_init_to_dict(t))
    pub = bundle.public.to_dict()
    if bundle.attack is not None:
        pub["fixture_attack"] = bundle.attack
    _dump(os.path.join(out_dir, "public.json"), pub)


def load_bundle(in_dir: str) -> ElectionBundle:
    try:
        with open(os.path.join(in_dir, "public.json")) as fh:
            pub_d = json.load(fh)
        public = PublicInfo.from_dict(pub_d)
        params = public.params
        with open(os.path.join(in_dir, "ballots.jsonl")) as fh:
            ballots = [Ballot.from_dict(json.loads(line)) for line in fh if line.strip()]
        vc_inits = []
        for i in range(1, params.n_v + 1):
            with open(os.path.join(in_dir, f"vc_init_{i}.json")) as fh:
                vc_inits.append(vc_init_from_dict(json.load(fh)))
        with open(os.path.join(in_dir, "bb_init.json")) as fh:
            bb = bb_init_from_dict(json.load(fh))
        trustees = []
        for t in range(1, params.n_t + 1):
            with open(os.path.join(in_dir, f"trustee_init_{t}.json")) as fh:
                trustees.append(trustee_init_from_dict(json.load(fh)))
    except (OSError, KeyError, ValueError, TypeError) as exc:
        raise BundleError(f"cannot load bundle from {in_dir}: {exc}") from exc
    bundle = ElectionBundle(params, ballots, vc_inits, bb, trustees, public, pub_d.get("fixture_attack"))
    check_bundle(bundle)
    return bundle


def check_bundle(bundle: ElectionBundle) -> None:
    """Cheap structural consistency checks; raises :class:`BundleError`."""
    p = bundle.params
    try:
        p.validate()
    except ParamError as exc:
        raise BundleError(str(exc)) from exc
    if len(bundle.ballots) != p.n:
        raise BundleError(f"expected {p.n} ballots, found {len(bundle.ballots)}")
    serials = sorted(bundle.bb_init.lines)
    if serials != list(range(1, p.n + 1)):
        raise BundleError("BB init serials are not 1..n")
    for v in bundle.vc_inits:
        if v.public != bundle.public or sorted(v.lines) != serials:
            raise BundleError(f"VC init {v.index} disagrees with the public data")
        if v.keypair.public != bundle.public.vc_publics[v.index - 1]:
            raise BundleError(f"VC init {v.index} key does not match the public key list")
    for t in bundle.trustee_inits:
        if t.public != bundle.public or sorted(t.lines) != serials:
            raise BundleError(f"trustee init {t.index} disagrees with the public data")
    for s in serials:
        for part in PARTS:
            if len(bundle.bb_init.lines[s][part]) != p.m:
                raise BundleError(f"serial {s} part {part}: wrong number of BB lines")
