"""Bulletin Board node, its published transcript, and majority reads.

BB nodes never talk to each other.  Each one independently

1. accepts the final vote set once ``f_v + 1`` VC nodes sent identical sets,
2. reconstructs ``msk`` from ``N_v - f_v`` dealer-signed shares, checks it
   against ``H_msk`` and decrypts every vote code,
3. combines ``h_t`` trustee posts into the tally, the openings of unused
   parts and the completed proofs of used parts.

Readers query every node and keep the answer reported by ``f_b + 1`` of
them.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from itertools import combinations
from typing import Any, Callable, Sequence

from ddemos.crypto.commitments import CommitmentError, Opening, fold, open_and_decode
from ddemos.crypto.proofs import UnitVectorProof, assemble, combine_response_shares
from ddemos.crypto.sharing import InsufficientShares, SharingError, reconstruct, reconstruct_opening
from ddemos.crypto.symmetric import dec_vote_code
from ddemos.ea import MSK_CONTEXT, PARTS, BBInit, bb_init_from_dict, bb_init_to_dict
from ddemos.encoding import digest, encode
from ddemos.messages import BBPush, ReadReply, ReadRequest, TrusteePostMsg, UCert, ucert_ok
from ddemos.netsim import Node
from ddemos.trustee import TrusteePost, challenge_for, classify_ballots, derive_coins

READ_PATHS = ("/init", "/vote-set", "/codes", "/result", "/transcript")


class NoQuorum(RuntimeError):
    """No answer was reported identically by ``f_b + 1`` BB nodes."""


def body_digest(body: Any) -> bytes | None:
    return None if body is None else hashlib.sha256(encode(body)).digest()


def majority_value(responses: Sequence[tuple], f_b: int):
    """Pick the body reported by at least ``f_b + 1`` responders.

    ``responses`` holds ``(digest, body)`` pairs.  A pair whose body does
    not hash to its digest is ignored.  ``None`` digests mean "not published
    yet" and can themselves form the majority.
    """
    counts: dict = {}
    bodies: dict = {}
    for dg, body in responses:
        if dg is not None:
            try:
                if body_digest(body) != dg:
                    continue
            except TypeError:
                continue
        counts[dg] = counts.get(dg, 0) + 1
        bodies.setdefault(dg, body)
        if counts[dg] >= f_b + 1:
            return bodies[dg]
    raise NoQuorum(f"no value reported by {f_b + 1} nodes among {len(responses)} responses")


def majority_read(query: str, endpoints: Sequence[Callable[[str], tuple]], f_b: int, budget: int = 10):
    """Query every endpoint, retrying on divergence up to ``budget`` attempts.

    Each endpoint is a callable returning ``(digest, body)`` for ``query``;
    an endpoint that raises counts as a missing reply.
    """
    for _ in range(max(1, budget)):
        responses = []
        for ep in endpoints:
            try:
                responses.append(ep(query))
            except Exception:  # an unreachable or broken node is just a missing reply
                continue
        try:
            return majority_value(responses, f_b)
        except NoQuorum:
            continue
    raise NoQuorum(f"{query}: no majority after {budget} attempts")


def bb_name(index: int) -> str:
    return f"bb{index}"


# --- published transcript --------------------------------------------------


@dataclass
class BBTranscript:
    """Everything one BB node publishes, in auditor-ready form."""

    bb_init: BBInit
    vote_set: tuple | None = None  # ((serial, code), ...)
    ucerts: tuple = ()
    msk: bytes | None = None
    codes: dict | None = None  # serial -> part -> tuple of codes in BB order
    posts: tuple = ()
    tally: tuple | None = None
    tally_opening: Opening | None = None
    openings: dict = field(default_factory=dict)  # (serial, part) -> tuple[Opening]
    proofs: dict = field(default_factory=dict)  # (serial, part) -> tuple[UnitVectorProof]
    coins: tuple | None = None
    flags: tuple = ()

    @property
    def params(self):
        return self.bb_init.public.params

    @property
    def phase(self) -> str:
        if self.tally is not None:
            return "tallied"
        if self.codes is not None and self.vote_set is not None:
            return "codes-revealed"
        return "init"

    def canonical(self):
        # The agreed view only.  Which valid UCERTs and trustee posts a node
        # happened to use, and its local flags, legitimately differ between
        # honest nodes, so they are carried in the file but not hashed.
        return (self.bb_init, self.vote_set, self.msk, self.codes, self.tally, self.tally_opening,
                tuple(sorted(self.openings.items())), tuple(sorted(self.proofs.items())), self.coins)

    def digest(self) -> bytes:
        return hashlib.sha256(encode(self)).digest()

    def to_dict(self) -> dict:
        grp = self.params.group_params.group
        hx = lambda b: None if b is None else b.hex()  # noqa: E731
        return {
            "phase": self.phase,
            "bb_init": bb_init_to_dict(self.bb_init),
            "vote_set": None if self.vote_set is None else [[s, c.hex()] for s, c in self.vote_set],
            "ucerts": [u.to_dict() for u in self.ucerts],
            "msk": hx(self.msk),
            "codes": None if self.codes is None else {
                str(s): {p: [hx(c) for c in self.codes[s][p]] for p in PARTS} for s in sorted(self.codes)},
            "posts": [p.to_dict() for p in self.posts],
            "tally": None if self.tally is None else list(self.tally),
            "tally_opening": None if self.tally_opening is None else self.tally_opening.to_dict(),
            "openings": [[s, p, [o.to_dict() for o in ops]] for (s, p), ops in sorted(self.openings.items())],
            "proofs": [[s, p, [pr.to_dict(grp) for pr in prs]] for (s, p), prs in sorted(self.proofs.items())],
            "coins": None if self.coins is None else list(self.coins),
            "flags": list(self.flags),
        }

    @classmethod
    def from_dict(cls, d) -> "BBTranscript":
        bb_init = bb_init_from_dict(d["bb_init"])
        grp = bb_init.public.params.group_params.group
        fx = lambda h: None if h is None else bytes.fromhex(h)  # noqa: E731
        return cls(
            bb_init=bb_init,
            vote_set=None if d["vote_set"] is None else tuple((int(s), bytes.fromhex(c)) for s, c in d["vote_set"]),
            ucerts=tuple(UCert.from_dict(u) for u in d["ucerts"]),
            msk=fx(d["msk"]),
            codes=None if d["codes"] is None else {
                int(s): {p: tuple(fx(c) for c in v[p]) for p in PARTS} for s, v in d["codes"].items()},
            posts=tuple(TrusteePost.from_dict(p) for p in d["posts"]),
            tally=None if d["tally"] is None else tuple(int(v) for v in d["tally"]),
            tally_opening=None if d["tally_opening"] is None else Opening.from_dict(d["tally_opening"]),
            openings={(int(s), p): tuple(Opening.from_dict(o) for o in ops) for s, p, ops in d["openings"]},
            proofs={(int(s), p): tuple(UnitVectorProof.from_dict(x, grp) for x in prs) for s, p, prs in d["proofs"]},
            coins=None if d["coins"] is None else tuple(int(c) for c in d["coins"]),
            flags=tuple(d["flags"]),
        )

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True)

    @classmethod
    def load(cls, path: str) -> "BBTranscript":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _well_formed_set(vote_set) -> bool:
    if not isinstance(vote_set, tuple):
        return False
    last = None
    for entry in vote_set:
        if not (isinstance(entry, tuple) and len(entry) == 2 and isinstance(entry[0], int)
                and isinstance(entry[1], bytes)):
            return False
        if last is not None and entry[0] <= last:
            return False
        last = entry[0]
    return True


def combine_posts(t: BBTranscript, posts: Sequence[TrusteePost]) -> bool:
    """Fill the tally, openings and proofs of ``t`` from trustee posts.

    Tries ``h_t``-subsets in index order until the reconstructed opening of
    ``E_sum`` is consistent.  Returns False if no subset works yet.
    """
    p = t.params
    gp = p.group_params
    q = gp.order
    status = classify_ballots(t.vote_set, t.codes)
    coins = derive_coins(status)
    voted = [t.bb_init.lines[s][st.part][st.pos].commitment for s, st in sorted(status.items())
             if st.kind == "voted"]
    e_sum = fold(voted, p.m, gp)
    ordered = sorted({x.index: x for x in posts}.values(), key=lambda x: x.index)
    for subset in combinations(ordered, p.h_t):
        try:
            opening = reconstruct_opening([x.tally_share for x in subset], p.h_t, q)
            tally = open_and_decode(e_sum, opening, gp)
        except (CommitmentError, SharingError):
            continue
        shares: dict = {}
        for x in subset:
            for serial, part, pos, osh in x.openings:
                shares.setdefault((serial, part), {}).setdefault(pos, []).append(osh)
        openings = {}
        for key, per_pos in shares.items():
            if len(per_pos) != p.m or any(len(v) < p.h_t for v in per_pos.values()):
                continue
            openings[key] = tuple(reconstruct_opening(per_pos[i], p.h_t, q) for i in range(p.m))
        resp: dict = {}
        for x in subset:
            for serial, part, pos, vals in x.responses:
                resp.setdefault((serial, part), {}).setdefault(pos, []).append((x.index, vals))
        proofs = {}
        for (serial, part), per_pos in resp.items():
            if len(per_pos) != p.m or any(len(v) < p.h_t for v in per_pos.values()):
                continue
            lines = t.bb_init.lines[serial][part]
            done = []
            for i in range(p.m):
                ch = challenge_for(coins, serial, part, i, q)
                done.append(assemble(lines[i].proof.first_move(), ch,
                                     combine_response_shares(per_pos[i], p.h_t, q)))
            proofs[(serial, part)] = tuple(done)
        t.tally, t.tally_opening = tally, opening
        t.openings, t.proofs, t.coins = openings, proofs, coins
        t.posts = tuple(subset)
        return True
    return False


class BBNode(Node):
    kind = "bb"

    def __init__(self, index: int, bb_init: BBInit):
        super().__init__(bb_name(index))
        self.index = index
        p = bb_init.public.params
        self.p = p
        self.public = bb_init.public
        self.t = BBTranscript(bb_init)
        self.vc_names = {f"vc{i}": i for i in range(1, p.n_v + 1)}
        self.trustee_names = {f"trustee{i}": i for i in range(1, p.n_t + 1)}
        self.sets: dict = {}  # vc index -> (set bytes, vote set, ucerts)
        self.msk_shares: dict = {}
        self.posts: dict = {}
        self.flags: list = []
        self.status = "collecting"
        self._cache: dict = {}
        self.metrics = {"rejected_writes": 0, "resubmissions": 0, "bad_shares": 0, "bad_posts": 0}

    # -- writes ----------------------------------------------------------------

    def on_message(self, ctx, src, msg) -> None:
        if isinstance(msg, ReadRequest):
            self.on_read(ctx, src, msg)
        elif isinstance(msg, BBPush):
            if src not in self.vc_names:
                self.metrics["rejected_writes"] += 1
                return
            self.on_vote_set(self.vc_names[src], msg)
        elif isinstance(msg, TrusteePostMsg):
            if src not in self.trustee_names:
                self.metrics["rejected_writes"] += 1
                return
            self.on_trustee_post(self.trustee_names[src], msg.post)
        else:
            self.metrics["rejected_writes"] += 1

    def on_vote_set(self, sender: int, msg: BBPush) -> None:
        if _well_formed_set(msg.vote_set):
            key = encode(msg.vote_set)
            prev = self.sets.get(sender)
            if prev is not None and prev[0] != key:
                self.metrics["resubmissions"] += 1
                self.flags.append(f"vc{sender} resubmitted a different vote set")
            self.sets[sender] = (key, msg.vote_set, msg.ucerts if isinstance(msg.ucerts, tuple) else ())
            self._try_publish_set()
        self.on_msk_share(sender, msg.msk_share)

    def _try_publish_set(self) -> None:
        if self.t.vote_set is not None:
            return
        tally: dict = {}
        for sender in sorted(self.sets):
            key = self.sets[sender][0]
            tally.setdefault(key, []).append(sender)
        for key, senders in tally.items():
            if len(senders) >= self.p.f_v + 1:
                vote_set = self.sets[senders[0]][1]
                ucerts = self.sets[senders[0]][2]
                for s in senders:
                    if self._ucerts_ok(self.sets[s][1], self.sets[s][2]):
                        ucerts = self.sets[s][2]
                        break
                self.t.vote_set = vote_set
                self.t.ucerts = tuple(ucerts)
                self._changed()
                self._decrypt()
                return

    def _ucerts_ok(self, vote_set, ucerts) -> bool:
        if len(ucerts) != len(vote_set):
            return False
        thr = self.p.n_v - self.p.f_v
        return all(ucert_ok(u, s, self.public.vc_publics, thr) and u.code == c
                   for (s, c), u in zip(vote_set, ucerts))

    def on_msk_share(self, sender: int, share) -> None:
        if self.t.msk is not None or self.status == "aborted" or share is None:
            return
        try:
            ok = share.index == sender and share.context == MSK_CONTEXT and share.verify(self.public.ea_public)
        except AttributeError:
            ok = False
        if not ok:
            self.metrics["bad_shares"] += 1
            return
        self.msk_shares.setdefault(sender, share)
        k = self.p.n_v - self.p.f_v
        if len(self.msk_shares) < k:
            return
        try:
            msk = reconstruct(list(self.msk_shares.values()), k)
        except (InsufficientShares, SharingError):
            msk = None
        if msk is None or not self.t.bb_init.h_msk.matches(msk):
            self.status = "aborted"
            self.flags.append("corrupted-shares: reconstructed msk does not match H_msk")
            self._changed()
            return
        self.t.msk = msk
        self.t.codes = {
            s: {part: tuple(dec_vote_code(ln.enc_code, msk) for ln in self.t.bb_init.lines[s][part])
                for part in PARTS}
            for s in sorted(self.t.bb_init.lines)
        }
        self._changed()
        self._decrypt()

    def _decrypt(self) -> None:
        if self.t.vote_set is not None and self.t.codes is not None and self.status == "collecting":
            self.status = "codes-revealed"
            self._try_tally()

    def on_trustee_post(self, sender: int, post) -> None:
        if not isinstance(post, TrusteePost) or post.index != sender or not post.verify(self.public.trustee_publics):
            self.metrics["bad_posts"] += 1
            return
        if self.t.vote_set is not None and post.vote_set_digest != digest(self.t.vote_set):
            self.metrics["bad_posts"] += 1
            self.flags.append(f"trustee{sender} posted for a different vote set")
            return
        self.posts.setdefault(sender, post)
        self._try_tally()

    def _try_tally(self) -> None:
        if self.status != "codes-revealed" or len(self.posts) < self.p.h_t:
            return
        posts = [x for x in self.posts.values() if x.vote_set_digest == digest(self.t.vote_set)]
        if len(posts) < self.p.h_t:
            return
        if combine_posts(self.t, posts):
            self.status = "tallied"
        elif len(posts) == self.p.n_t:
            self.flags.append("trustee openings inconsistent with E_sum")
        self._changed()

    # -- reads -------------------------------------------------------------------

    def _changed(self) -> None:
        self.t.flags = tuple(self.flags)
        self._cache = {}

    def read(self, path: str):
        """``(digest, body)`` for a read path; ``(None, None)`` while unpublished."""
        if path in self._cache:
            return self._cache[path]
        t = self.t
        if path == "/init":
            body = t.bb_init
        elif path == "/vote-set":
            body = None if t.vote_set is None else (t.vote_set, t.ucerts)
        elif path == "/codes":
            body = (t.vote_set, t.codes) if self.status in ("codes-revealed", "tallied") else None
        elif path == "/result":
            body = t.tally
        elif path == "/transcript":
            body = t
        else:
            body = None
        out = (body_digest(body), body)
        self._cache[path] = out
        return out

    def on_read(self, ctx, src, msg: ReadRequest) -> None:
        dg, body = self.read(msg.path)
        ctx.send(src, ReadReply(msg.path, msg.nonce, dg, body))

    def transcript(self) -> BBTranscript:
        return self.t

    def state(self):
        return (self.index, self.status, self.t.vote_set, self.t.tally, tuple(self.flags))


class GarbageBBNode(BBNode):
    """Answers every read with random bytes and exports a garbage transcript."""

    def __init__(self, index: int, bb_init: BBInit, seed: int = 0):
        super().__init__(index, bb_init)
        self.honest = False
        self.rng = random.Random(encode(("garbage-bb", seed, index)))

    def on_read(self, ctx, src, msg: ReadRequest) -> None:
        junk = self.rng.randbytes(32)
        ctx.send(src, ReadReply(msg.path, msg.nonce, hashlib.sha256(junk).digest() if self.rng.random() < 0.5
                                else self.rng.randbytes(32), junk))

    def read(self, path: str):
        junk = self.rng.randbytes(32)
        return hashlib.sha256(junk).digest(), junk

    def transcript(self) -> BBTranscript:
        t = BBTranscript(self.t.bb_init)
        t.vote_set = ((1, self.rng.randbytes(20)),)
        t.flags = ("garbage",)
        return t


class SilentBBNode(BBNode):
    def __init__(self, index: int, bb_init: BBInit, seed: int = 0):
        super().__init__(index, bb_init)
        self.honest = False

    def on_message(self, ctx, src, msg) -> None:
        return

    def read(self, path: str):
        raise ConnectionError(f"{self.name} does not answer")


__all__ = ["NoQuorum", "BBTranscript", "BBNode", "GarbageBBNode", "SilentBBNode", "majority_value",
           "majority_read", "body_digest", "combine_posts", "READ_PATHS"]
