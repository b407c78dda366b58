"""Vote Collector node.

Voting phase (while the local clock is before ``T_end``)::

    voter --VOTE--> responder --ENDORSE--> all VCs --ENDORSEMENT--> responder
    responder: N_v - f_v signatures form a UCERT, ballot becomes Pending
    responder --VOTE_P(share, UCERT)--> all VCs; each adopts Pending and
    discloses its own share once; N_v - f_v valid shares give the receipt.

Vote-set consensus (from ``T_end + barrier``): every node multicasts one
batched ANNOUNCE, adopts any valid (code, UCERT) it learns until it has
heard from ``N_v - f_v`` nodes, then proposes ``1`` for exactly the ballots
whose code it knows.  Ballots decided ``1`` with an unknown code are
recovered with RECOVER-REQUEST.  The final set and the node's msk share go
to every BB node.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Any

from ddemos.consensus import BatchConsensus, BatchMsg
from ddemos.crypto.sharing import InsufficientShares, Share, SharingError, reconstruct
from ddemos.crypto.signatures import sign, verify_sig
from ddemos.ea import PARTS, VCInit
from ddemos.messages import (Announce, BBPush, Endorse, Endorsement, RecoverRequest, RecoverResponse,
                             UCert, Vote, VoteP, VoteReply, endorse_payload, ucert_ok)
from ddemos.netsim import Node

NOT_VOTED, PENDING, VOTED = "NotVoted", "Pending", "Voted"


def vc_name(index: int) -> str:
    return f"vc{index}"


def bb_name(index: int) -> str:
    return f"bb{index}"


@dataclass
class BallotRecord:
    serial: int
    status: str = NOT_VOTED
    code: bytes | None = None
    ucert: UCert | None = None
    where: tuple | None = None  # (part, pos) of ``code``
    endorsed: bytes | None = None
    shares: dict = field(default_factory=dict)  # share index -> Share
    receipt: bytes | None = None
    disclosed: bool = False
    waiters: list = field(default_factory=list)
    responder_for: bytes | None = None
    endorsements: dict = field(default_factory=dict)  # signer -> sig

    def canonical(self):
        return (self.serial, self.status, self.code, self.ucert, self.receipt)


_BALLOT_MSGS = frozenset((Vote, Endorse, Endorsement, VoteP))
_HANDLERS = {Vote: "on_vote", Endorse: "on_endorse", Endorsement: "on_endorsement", VoteP: "on_vote_p",
             Announce: "on_announce", BatchMsg: "on_consensus", RecoverRequest: "on_recover_request",
             RecoverResponse: "on_recover_response"}


class VCNode(Node):
    kind = "vc"

    def __init__(self, init: VCInit, barrier: int, t_end: int | None = None, seed: int = 0,
                 end_phase: bool = True):
        super().__init__(vc_name(init.index))
        p = init.public.params
        self.init = init
        self.index = init.index
        self.params = p
        self.n_v, self.f_v = p.n_v, p.f_v
        self.quorum = p.n_v - p.f_v
        self.t_end = p.t_end if t_end is None else t_end
        self.barrier = barrier
        self.end_phase = end_phase
        self.vc_publics = init.public.vc_publics
        self.peers = [vc_name(i) for i in range(1, p.n_v + 1)]
        self._peer_index = {name: i for i, name in enumerate(self.peers, 1)}
        self.bbs = [bb_name(i) for i in range(1, p.n_b + 1)]
        self.records: dict[int, BallotRecord] = {s: BallotRecord(s) for s in init.lines}
        self._lookup_cache: dict = {}
        self.consensus = BatchConsensus(self.index - 1, p.n_v, p.f_v, seed=seed)
        self.announced = False
        self.announce_from: set = set()
        self.proposed = False
        self.inputs: dict = {}
        self.recovering: set = set()
        self.vote_set: tuple | None = None
        self.pushed = False
        self.metrics = {"conflicting_endorse": 0, "rejected_votes": 0, "bad_ucerts": 0,
                        "bad_shares": 0, "recover_discarded": 0, "late_announce": 0}

    # -- helpers -------------------------------------------------------------

    def locate(self, serial: int, code: Any) -> tuple | None:
        """``(part, pos)`` of the line whose hash commitment opens to ``code``."""
        if serial not in self.records or not isinstance(code, bytes):
            return None
        key = (serial, code)
        if key in self._lookup_cache:
            return self._lookup_cache[key]
        found = None
        lines = self.init.lines[serial]
        for part in PARTS:
            for pos, ln in enumerate(lines[part]):
                if hashlib.sha256(code + ln.commitment.salt).digest() == ln.commitment.digest:
                    found = (part, pos)
                    break
            if found:
                break
        self._lookup_cache[key] = found
        return found

    def in_hours(self, ctx) -> bool:
        return 0 <= ctx.local < self.t_end

    def valid_ucert(self, ucert: Any, serial: int, code: bytes | None = None) -> bool:
        if not ucert_ok(ucert, serial, self.vc_publics, self.quorum):
            return False
        if code is not None and ucert.code != code:
            return False
        return self.locate(serial, ucert.code) is not None

    def my_share(self, rec: BallotRecord) -> Share:
        part, pos = rec.where
        return self.init.lines[rec.serial][part][pos].receipt_share

    def work_key(self, msg):
        if type(msg) in _BALLOT_MSGS:
            return ("ballot", msg.serial)
        return "post"

    def sender_index(self, src: str) -> int | None:
        return self._peer_index.get(src)

    # -- lifecycle -----------------------------------------------------------

    def start(self, ctx) -> None:
        if self.end_phase:
            ctx.set_timer(self.t_end + self.barrier, "announce")

    def on_timer(self, ctx, tag) -> None:
        if tag == "announce":
            self.send_announce(ctx)

    def on_message(self, ctx, src, msg) -> None:
        handler = _HANDLERS.get(type(msg))
        if handler is not None:
            getattr(self, handler)(ctx, src, msg)

    # -- voting ----------------------------------------------------------------

    def on_vote(self, ctx, src, msg: Vote) -> None:
        if not self.in_hours(ctx):
            ctx.send(src, VoteReply(msg.serial, msg.code, None, "election closed"))
            return
        rec = self.records.get(msg.serial)
        if rec is None:
            ctx.send(src, VoteReply(msg.serial, msg.code, None, "unknown serial"))
            return
        where = self.locate(msg.serial, msg.code)
        if where is None:
            ctx.send(src, VoteReply(msg.serial, msg.code, None, "invalid vote code"))
            return
        if rec.status == VOTED:
            if rec.code == msg.code:
                ctx.send(src, VoteReply(msg.serial, msg.code, rec.receipt))
            else:
                self.metrics["rejected_votes"] += 1
                ctx.send(src, VoteReply(msg.serial, msg.code, None, "ballot already used"))
            return
        if rec.status == PENDING:
            if rec.code == msg.code:
                if src not in rec.waiters:
                    rec.waiters.append(src)
            else:
                self.metrics["rejected_votes"] += 1
                ctx.send(src, VoteReply(msg.serial, msg.code, None, "ballot already used"))
            return
        if rec.endorsed is not None and rec.endorsed != msg.code:
            self.metrics["rejected_votes"] += 1
            ctx.send(src, VoteReply(msg.serial, msg.code, None, "ballot already used"))
            return
        if src not in rec.waiters:
            rec.waiters.append(src)
        if rec.responder_for != msg.code:
            rec.responder_for = msg.code
            rec.endorsements = {}
            ctx.multicast([p for p in self.peers if p != self.name], Endorse(msg.serial, msg.code))
            # our own endorsement needs no round trip through the network
            if self.endorse_ok(rec, msg.code):
                rec.endorsements[self.index - 1] = sign(self.init.keypair, endorse_payload(msg.serial, msg.code))
                if len(rec.endorsements) >= self.quorum:
                    ucert = UCert(msg.serial, msg.code, tuple(sorted(rec.endorsements.items())))
                    self.become_pending(ctx, rec, msg.code, ucert)

    def endorse_ok(self, rec: BallotRecord, code: bytes) -> bool:
        if rec.endorsed is None:
            rec.endorsed = code
        return rec.endorsed == code

    def on_endorse(self, ctx, src, msg: Endorse) -> None:
        if self.sender_index(src) is None or not self.in_hours(ctx):
            return
        rec = self.records.get(msg.serial)
        if rec is None or self.locate(msg.serial, msg.code) is None:
            return
        if not self.endorse_ok(rec, msg.code):
            self.metrics["conflicting_endorse"] += 1
            return
        sig = sign(self.init.keypair, endorse_payload(msg.serial, msg.code))
        ctx.send(src, Endorsement(msg.serial, msg.code, self.index - 1, sig))

    def on_endorsement(self, ctx, src, msg: Endorsement) -> None:
        j = self.sender_index(src)
        if j is None or not self.in_hours(ctx):
            return
        rec = self.records.get(msg.serial)
        if rec is None or rec.status != NOT_VOTED or rec.responder_for != msg.code:
            return
        if msg.signer != j - 1 or msg.signer in rec.endorsements:
            return
        if j != self.index and not verify_sig(self.vc_publics[msg.signer],
                                              endorse_payload(msg.serial, msg.code), msg.sig):
            return
        rec.endorsements[msg.signer] = msg.sig
        if len(rec.endorsements) >= self.quorum:
            ucert = UCert(msg.serial, msg.code, tuple(sorted(rec.endorsements.items())))
            self.become_pending(ctx, rec, msg.code, ucert)

    def become_pending(self, ctx, rec: BallotRecord, code: bytes, ucert: UCert) -> None:
        rec.status = PENDING
        rec.code = code
        rec.ucert = ucert
        rec.where = self.locate(rec.serial, code)
        self.disclose(ctx, rec)
        self.try_reconstruct(ctx, rec)

    def disclose(self, ctx, rec: BallotRecord) -> None:
        if rec.disclosed:
            return
        rec.disclosed = True
        share = self.my_share(rec)
        rec.shares.setdefault(share.index, share)
        ctx.multicast([p for p in self.peers if p != self.name], VoteP(rec.serial, rec.code, share, rec.ucert))

    def on_vote_p(self, ctx, src, msg: VoteP) -> None:
        j = self.sender_index(src)
        if j is None or not self.in_hours(ctx):
            return
        rec = self.records.get(msg.serial)
        if rec is None:
            return
        if rec.code is not None and rec.code != msg.code:
            return
        if rec.code is None:
            if not self.valid_ucert(msg.ucert, msg.serial, msg.code):
                self.metrics["bad_ucerts"] += 1
                return
            self.become_pending(ctx, rec, msg.code, msg.ucert)
        elif rec.status == PENDING and not rec.disclosed:
            self.disclose(ctx, rec)
        if rec.status == VOTED:
            return  # receipt already known; spare shares are not needed
        share = msg.share
        if isinstance(share, Share) and share.index == j and share.index not in rec.shares:
            # same line, same context as our own share of it
            if share.context == self.my_share(rec).context and share.verify(self.init.public.ea_public):
                rec.shares[share.index] = share
            else:
                self.metrics["bad_shares"] += 1
        self.try_reconstruct(ctx, rec)

    def try_reconstruct(self, ctx, rec: BallotRecord) -> None:
        if rec.status != PENDING or len(rec.shares) < self.quorum:
            return
        try:
            receipt = reconstruct(list(rec.shares.values()), self.quorum)
        except (InsufficientShares, SharingError):
            return
        rec.receipt = receipt
        rec.status = VOTED
        for w in rec.waiters:
            ctx.send(w, VoteReply(rec.serial, rec.code, receipt))
        rec.waiters = []

    # -- vote-set consensus ------------------------------------------------------

    def announce_entries(self) -> tuple:
        out = []
        for s in sorted(self.records):
            rec = self.records[s]
            if rec.code is not None and rec.ucert is not None:
                out.append((s, rec.code, rec.ucert))
            else:
                out.append((s, None, None))
        return tuple(out)

    def send_announce(self, ctx) -> None:
        if self.announced:
            return
        self.announced = True
        ctx.multicast(self.peers, Announce(self.announce_entries()))

    def on_announce(self, ctx, src, msg: Announce) -> None:
        j = self.sender_index(src)
        if j is None or j in self.announce_from:
            return
        if self.proposed:
            self.metrics["late_announce"] += 1
            return
        self.announce_from.add(j)
        if isinstance(msg.entries, tuple):
            for entry in msg.entries:
                if not (isinstance(entry, tuple) and len(entry) == 3):
                    continue
                serial, code, ucert = entry
                rec = self.records.get(serial) if isinstance(serial, int) else None
                if rec is None or code is None or rec.code is not None:
                    continue
                if self.valid_ucert(ucert, serial, code):
                    self.adopt(rec, code, ucert)
                else:
                    self.metrics["bad_ucerts"] += 1
        self.maybe_propose(ctx)

    def adopt(self, rec: BallotRecord, code: bytes, ucert: UCert) -> None:
        # learned after T_end: no share disclosure, no receipt
        rec.code = code
        rec.ucert = ucert
        rec.where = self.locate(rec.serial, code)

    def proposal(self) -> dict:
        return {s: (1 if rec.code is not None else 0) for s, rec in self.records.items()}

    def maybe_propose(self, ctx) -> None:
        if self.proposed or not self.announced or len(self.announce_from) < self.quorum:
            return
        self.proposed = True
        self.inputs = self.proposal()
        self.emit_consensus(ctx, self.consensus.propose(self.inputs))
        self.check_decided(ctx)

    def emit_consensus(self, ctx, outs) -> None:
        for dest, msg in outs:
            if dest is None:
                ctx.multicast(self.peers, msg)
            else:
                ctx.send(vc_name(dest + 1), msg)

    def on_consensus(self, ctx, src, msg: BatchMsg) -> None:
        j = self.sender_index(src)
        if j is None:
            return
        self.emit_consensus(ctx, self.consensus.on_message(j - 1, msg))
        self.check_decided(ctx)

    def check_decided(self, ctx) -> None:
        if self.vote_set is not None or self.recovering or not self.proposed:
            return
        if not self.consensus.all_decided(self.records):
            return
        decisions = self.consensus.decisions
        missing = tuple(s for s in sorted(self.records) if decisions[s] == 1 and self.records[s].code is None)
        if missing:
            self.recovering = set(missing)
            ctx.multicast([p for p in self.peers if p != self.name], RecoverRequest(missing))
            return
        self.finish(ctx)

    def on_recover_request(self, ctx, src, msg: RecoverRequest) -> None:
        if self.sender_index(src) is None or not isinstance(msg.serials, tuple):
            return
        entries = []
        for s in msg.serials:
            rec = self.records.get(s) if isinstance(s, int) else None
            if rec is not None and rec.code is not None and rec.ucert is not None:
                entries.append((s, rec.code, rec.ucert))
        if entries:
            ctx.send(src, RecoverResponse(tuple(entries)))

    def on_recover_response(self, ctx, src, msg: RecoverResponse) -> None:
        if self.sender_index(src) is None or not self.recovering or not isinstance(msg.entries, tuple):
            return
        for entry in msg.entries:
            if not (isinstance(entry, tuple) and len(entry) == 3):
                self.metrics["recover_discarded"] += 1
                continue
            serial, code, ucert = entry
            if serial not in self.recovering:
                continue
            if self.valid_ucert(ucert, serial, code):
                self.adopt(self.records[serial], code, ucert)
                self.recovering.discard(serial)
            else:
                self.metrics["recover_discarded"] += 1
        if not self.recovering:
            self.finish(ctx)

    def finish(self, ctx) -> None:
        decisions = self.consensus.decisions
        voted = [s for s in sorted(self.records) if decisions[s] == 1]
        self.vote_set = tuple((s, self.records[s].code) for s in voted)
        ucerts = tuple(self.records[s].ucert for s in voted)
        self.push_to_bb(ctx, self.vote_set, ucerts)

    def push_to_bb(self, ctx, vote_set: tuple, ucerts: tuple) -> None:
        if self.pushed:
            return
        self.pushed = True
        ctx.multicast(self.bbs, BBPush(vote_set, ucerts, self.init.msk_share))

    def state(self):
        return (self.index, tuple(self.records[s] for s in sorted(self.records)), self.vote_set,
                self.consensus.state())
