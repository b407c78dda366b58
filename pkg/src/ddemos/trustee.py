"""Trustees: turn the published vote set into opening shares and proof responses.

Each trustee reads the BB by majority, classifies every ballot, and posts
one signed :class:`TrusteePost` holding

* opening shares for every line of each unused part,
* response shares that complete the proofs of every line of each used part,
* ``T_l``, the sum of its opening shares over the voted commitments
  (``E_tally``), which opens their product ``E_sum`` to the tally.
"""

from __future__ import annotations

from dataclasses import dataclass

from ddemos.crypto.proofs import derive_challenge, evaluate_responses
from ddemos.crypto.sharing import OpeningShare, sum_opening_shares
from ddemos.crypto.signatures import sign, verify_sig
from ddemos.ea import PARTS, TrusteeInit
from ddemos.encoding import digest, encode
from ddemos.messages import ReadReply, ReadRequest, TrusteePostMsg
from ddemos.netsim import Node


class TrusteeRefusal(RuntimeError):
    """The transcript has no quorum-published vote set."""


def trustee_name(index: int) -> str:
    return f"trustee{index}"


def proof_context(serial: int, part: str, pos: int) -> bytes:
    return encode(("proof", serial, part, pos))


@dataclass(frozen=True)
class BallotStatus:
    serial: int
    kind: str  # "voted" | "unvoted" | "invalid"
    part: str | None = None
    pos: int | None = None
    reason: str = ""


def classify_ballots(vote_set, codes: dict) -> dict[int, BallotStatus]:
    """Place every vote-set entry on its (part, position).

    A ballot with both parts used, or with more than one voted code in a
    part, is invalid and is discarded from the tally and from the openings.
    """
    hits: dict[int, list] = {s: [] for s in codes}
    for serial, code in vote_set:
        if serial not in codes:
            continue
        for part in PARTS:
            for pos, c in enumerate(codes[serial][part]):
                if c is not None and c == code:
                    hits[serial].append((part, pos))
    out = {}
    for serial in sorted(codes):
        h = sorted(set(hits[serial]))
        parts = {p for p, _ in h}
        if not h:
            out[serial] = BallotStatus(serial, "unvoted")
        elif len(parts) > 1:
            out[serial] = BallotStatus(serial, "invalid", reason="both parts used")
        elif len(h) > 1:
            out[serial] = BallotStatus(serial, "invalid", reason="more than one voted code in a part")
        else:
            out[serial] = BallotStatus(serial, "voted", h[0][0], h[0][1])
    return out


def derive_coins(status: dict[int, BallotStatus]) -> tuple[int, ...]:
    """One bit per ballot in serial order: 1 if part B was used, else 0."""
    return tuple(1 if status[s].kind == "voted" and status[s].part == "B" else 0 for s in sorted(status))


def challenge_for(coins, serial: int, part: str, pos: int, q: int) -> int:
    return derive_challenge(coins, proof_context(serial, part, pos), q)


@dataclass(frozen=True)
class TrusteePost:
    index: int
    vote_set_digest: bytes
    openings: tuple  # ((serial, part, pos, OpeningShare), ...)
    responses: tuple  # ((serial, part, pos, (values...)), ...)
    tally_share: OpeningShare
    signature: bytes = b""

    def payload(self):
        return ("trustee-post", self.index, self.vote_set_digest, self.openings, self.responses,
                self.tally_share)

    def canonical(self):
        return self.payload() + (self.signature,)

    def verify(self, trustee_publics) -> bool:
        if not isinstance(self.index, int) or not 1 <= self.index <= len(trustee_publics):
            return False
        return verify_sig(trustee_publics[self.index - 1], self.payload(), self.signature)

    def to_dict(self) -> dict:
        return {"index": self.index, "vote_set_digest": self.vote_set_digest.hex(),
                "openings": [[s, p, i, o.to_dict()] for s, p, i, o in self.openings],
                "responses": [[s, p, i, [hex(v) for v in vals]] for s, p, i, vals in self.responses],
                "tally_share": self.tally_share.to_dict(), "signature": self.signature.hex()}

    @classmethod
    def from_dict(cls, d) -> "TrusteePost":
        return cls(int(d["index"]), bytes.fromhex(d["vote_set_digest"]),
                   tuple((int(s), p, int(i), OpeningShare.from_dict(o)) for s, p, i, o in d["openings"]),
                   tuple((int(s), p, int(i), tuple(int(v, 16) for v in vals))
                         for s, p, i, vals in d["responses"]),
                   OpeningShare.from_dict(d["tally_share"]), bytes.fromhex(d["signature"]))


def compute_posts(tinit: TrusteeInit, view) -> TrusteePost:
    """Build this trustee's post from a majority-read ``(vote_set, codes)`` view."""
    if view is None or view[0] is None or view[1] is None:
        raise TrusteeRefusal("no published vote set")
    vote_set, codes = view
    params = tinit.public.params
    q = params.group_params.order
    status = classify_ballots(vote_set, codes)
    coins = derive_coins(status)
    openings, responses, tally = [], [], []
    for serial in sorted(status):
        st = status[serial]
        if st.kind == "invalid":
            continue
        lines = tinit.lines[serial]
        for part in PARTS:
            if st.kind == "voted" and part == st.part:
                for pos, ln in enumerate(lines[part]):
                    ch = challenge_for(coins, serial, part, pos, q)
                    responses.append((serial, part, pos, evaluate_responses(ln.zk_share, ch, q)))
                tally.append(lines[part][st.pos].opening_share)
            else:
                for pos, ln in enumerate(lines[part]):
                    openings.append((serial, part, pos, ln.opening_share))
    t_share = sum_opening_shares(tally, tinit.index, params.m, q)
    post = TrusteePost(tinit.index, digest(vote_set), tuple(openings), tuple(responses), t_share)
    return TrusteePost(post.index, post.vote_set_digest, post.openings, post.responses, post.tally_share,
                       sign(tinit.keypair, post.payload()))


class TrusteeNode(Node):
    """Polls the BB nodes by majority read, then posts to every BB node."""

    kind = "trustee"

    def __init__(self, tinit: TrusteeInit, start_at: int, poll_every: int = 20, max_polls: int = 200,
                 read_timeout: int = 15, divergence_budget: int = 10):
        super().__init__(trustee_name(tinit.index))
        p = tinit.public.params
        self.tinit = tinit
        self.f_b = p.f_b
        self.bbs = [f"bb{i}" for i in range(1, p.n_b + 1)]
        self.start_at = start_at
        self.poll_every = poll_every
        self.max_polls = max_polls
        self.read_timeout = read_timeout
        self.divergence_budget = divergence_budget
        self.nonce = 0
        self.replies: dict = {}
        self.polls = 0
        self.divergent = 0
        self.post: TrusteePost | None = None
        self.outcome = "waiting"

    def start(self, ctx) -> None:
        ctx.set_timer(self.start_at, ("poll",))

    def poll(self, ctx) -> None:
        if self.post is not None or self.outcome != "waiting":
            return
        if self.polls >= self.max_polls:
            self.outcome = "gave-up"
            return
        self.polls += 1
        self.nonce += 1
        self.replies = {}
        ctx.multicast(self.bbs, ReadRequest("/codes", self.nonce))
        ctx.set_timer_after(self.read_timeout, ("deadline", self.nonce))

    def on_timer(self, ctx, tag) -> None:
        if tag[0] == "poll":
            self.poll(ctx)
        elif tag[0] == "deadline" and tag[1] == self.nonce and self.post is None:
            self.conclude(ctx, final=True)

    def on_message(self, ctx, src, msg) -> None:
        if not isinstance(msg, ReadReply) or src not in self.bbs or msg.nonce != self.nonce:
            return
        if self.post is not None or src in self.replies:
            return
        self.replies[src] = msg
        self.conclude(ctx, final=len(self.replies) == len(self.bbs))

    def conclude(self, ctx, final: bool) -> None:
        from ddemos.bb import NoQuorum, majority_value

        responses = [(r.digest, r.body) for r in self.replies.values()]
        try:
            view = majority_value(responses, self.f_b)
        except NoQuorum:
            if not final:
                return
            if len(self.replies) == len(self.bbs) and all(r.digest is not None for r in self.replies.values()):
                self.divergent += 1
                if self.divergent >= self.divergence_budget:
                    self.outcome = "no-quorum"
                    return
            self.nonce += 1  # ignore stragglers of this attempt
            ctx.set_timer_after(self.poll_every, ("poll",))
            return
        if view is None:
            if final:
                self.nonce += 1
                ctx.set_timer_after(self.poll_every, ("poll",))
            return
        self.post = compute_posts(self.tinit, view)
        self.outcome = "posted"
        ctx.multicast(self.bbs, TrusteePostMsg(self.post))

    def state(self):
        return (self.tinit.index, self.outcome, self.post)


__all__ = ["TrusteeRefusal", "TrusteePost", "TrusteeNode", "BallotStatus", "classify_ballots",
           "derive_coins", "compute_posts", "proof_context", "challenge_for", "trustee_name"]

