"""Built-in adversary policies for corrupted VC and BB nodes.

Each policy names what corrupted VCs do, what corrupted BBs do, and which
delivery schedule the network adversary uses:

=================  ====================  ==========  ===============  ==================================
policy             VC behaviour          BB          schedule         stresses
=================  ====================  ==========  ===============  ==================================
honest             -                     -           as configured    baseline
silent-vc          never answers         silent      as configured    liveness, [d]-patience
equivocating-vc    endorses everything,  garbage     as configured    UCERT exclusivity, set agreement
                   conflicting messages
share-withholder   never discloses       silent      as configured    receipt quorum, msk quorum
                   shares
garbage-bb         never answers         garbage     as configured    majority reads
delay-maximizer    never answers         silent      boundary sweep   timing bounds
recover-liar       bogus ANNOUNCE and    garbage     as configured    RECOVER validation
                   RECOVER-RESPONSE
=================  ====================  ==========  ===============  ==================================
"""

from __future__ import annotations

import random

from ddemos.consensus import BOT, ECHO, INITIAL, READY, BatchMsg
from ddemos.crypto.signatures import sign
from ddemos.encoding import encode
from ddemos.messages import (Announce, BBPush, Endorse, Endorsement, RecoverRequest, RecoverResponse, UCert,
                             VoteP, endorse_payload)
from ddemos.netsim import Node
from ddemos.vc import VCNode, vc_name

POLICIES = {
    "honest": (None, None, None),
    "silent-vc": ("silent", "silent", None),
    "equivocating-vc": ("equivocating", "garbage", None),
    "share-withholder": ("withholder", "silent", None),
    "garbage-bb": ("silent", "garbage", None),
    "delay-maximizer": ("silent", "silent", "boundary"),
    "recover-liar": ("recover-liar", "garbage", None),
}


def policy_schedule(policy: str, configured: str, seed: int) -> str:
    """The delay-maximizer cycles through min, max, alternating and random schedules."""
    if POLICIES[policy][2] == "boundary":
        return ("min", "max", "alternating", "random")[seed % 4]
    return configured


class SilentVC(Node):
    kind = "vc"

    def __init__(self, init, *args, **kwargs):
        super().__init__(vc_name(init.index))
        self.honest = False
        self.vote_set = None

    def state(self):
        return ("silent", self.name)


def _spray(ctx, me: int, peers: list, instances: list, rnd: int, step: int, rng: random.Random) -> None:
    vals = (0, 1, BOT) if step == 3 else (0, 1)
    for dst in peers:
        ctx.send(dst, BatchMsg(INITIAL, me, rnd, step, tuple((i, rng.choice(vals)) for i in instances)))
        for tag in (ECHO, READY):
            for o in range(len(peers)):
                ctx.send(dst, BatchMsg(tag, o, rnd, step, tuple((i, rng.choice(vals)) for i in instances)))


class EquivocatingVC(VCNode):
    """Endorses every code, races a second code for each ballot, and lies at the end.

    The node is given the printed ballots (``knowledge``), the strongest
    position an adversary could be in, so that it can try to push a second
    valid code for each ballot it sees.
    """

    def __init__(self, init, barrier, t_end=None, seed=0, knowledge=None, **kw):
        super().__init__(init, barrier, t_end, seed, **kw)
        self.honest = False
        self.rng = random.Random(encode(("equivocating", seed, init.index)))
        self.knowledge = knowledge or {}
        self.rival: dict = {}  # serial -> (code, endorsements)
        self.formed: list = []  # every UCERT this node managed to assemble
        self._spoken: set = set()

    def honest_peers(self):
        return [p for p in self.peers if p != self.name]

    def on_endorse(self, ctx, src, msg: Endorse) -> None:
        if self.sender_index(src) is None or self.locate(msg.serial, msg.code) is None:
            return
        sig = sign(self.init.keypair, endorse_payload(msg.serial, msg.code))
        ctx.send(src, Endorsement(msg.serial, msg.code, self.index - 1, sig))
        self.race(ctx, msg.serial, msg.code)

    def race(self, ctx, serial: int, code: bytes) -> None:
        if serial in self.rival or serial not in self.knowledge:
            return
        others = [ln.code for part in self.knowledge[serial].parts.values() for ln in part if ln.code != code]
        if not others:
            return
        rival = self.rng.choice(others)
        own = sign(self.init.keypair, endorse_payload(serial, rival))
        self.rival[serial] = (rival, {self.index - 1: own})
        targets = [p for p in self.honest_peers() if self.rng.random() < 0.7]
        ctx.multicast(targets, Endorse(serial, rival))

    def on_endorsement(self, ctx, src, msg: Endorsement) -> None:
        r = self.rival.get(msg.serial)
        if r is not None and msg.code == r[0]:
            j = self.sender_index(src)
            if j is not None and msg.signer == j - 1:
                r[1][msg.signer] = msg.sig
                if len(r[1]) == self.quorum:
                    u = UCert(msg.serial, msg.code, tuple(sorted(r[1].items())))
                    self.formed.append(u)
                    ctx.multicast(self.honest_peers(), VoteP(msg.serial, msg.code, None, u))
            return
        super().on_endorsement(ctx, src, msg)
        rec = self.records.get(msg.serial)
        if rec is not None and rec.ucert is not None and rec.ucert not in self.formed:
            self.formed.append(rec.ucert)

    def send_announce(self, ctx) -> None:
        if self.announced:
            return
        self.announced = True
        honest = self.announce_entries()
        for p in self.peers:
            mine = tuple(e if self.rng.random() < 0.5 else (e[0], None, None) for e in honest)
            ctx.send(p, Announce(mine))
        self.proposed = True
        self.spray(ctx, 1, 1)

    def spray(self, ctx, rnd: int, step: int) -> None:
        if (rnd, step) in self._spoken or rnd > 50:
            return
        self._spoken.add((rnd, step))
        _spray(ctx, self.index - 1, self.peers, sorted(self.records), rnd, step, self.rng)

    def on_consensus(self, ctx, src, msg: BatchMsg) -> None:
        if src == self.name or not isinstance(msg, BatchMsg):
            return
        self.spray(ctx, msg.round, msg.step)
        self.spray(ctx, *((msg.round, msg.step + 1) if msg.step < 3 else (msg.round + 1, 1)))
        if not self.pushed:
            self.push_divergent(ctx)

    def push_divergent(self, ctx) -> None:
        self.pushed = True
        known = [(s, r.code) for s, r in sorted(self.records.items()) if r.code is not None]
        for bb in self.bbs:
            subset = tuple(e for e in known if self.rng.random() < 0.5)
            ctx.send(bb, BBPush(subset, (), self.init.msk_share))

    def check_decided(self, ctx) -> None:
        return


class ShareWithholderVC(VCNode):
    """Takes part in endorsement but never discloses a receipt share or its msk share."""

    def __init__(self, init, barrier, t_end=None, seed=0, **kw):
        super().__init__(init, barrier, t_end, seed, **kw)
        self.honest = False

    def disclose(self, ctx, rec) -> None:
        rec.disclosed = True

    def push_to_bb(self, ctx, vote_set, ucerts) -> None:
        if self.pushed:
            return
        self.pushed = True
        ctx.multicast(self.bbs, BBPush(vote_set, ucerts, None))


class RecoverLiarVC(VCNode):
    """Announces and "recovers" made-up codes under forged UCERTs, and votes 1 everywhere."""

    def __init__(self, init, barrier, t_end=None, seed=0, **kw):
        super().__init__(init, barrier, t_end, seed, **kw)
        self.honest = False
        self.rng = random.Random(encode(("recover-liar", seed, init.index)))

    def bogus(self, serial: int) -> tuple:
        rec = self.records[serial]
        code = rec.code if rec.code is not None and self.rng.random() < 0.3 else self.rng.randbytes(20)
        sigs = tuple((i, self.rng.randbytes(64)) for i in range(self.quorum))
        if self.rng.random() < 0.5:
            # one genuine signature plus duplicates of it: still short of a quorum of signers
            own = sign(self.init.keypair, endorse_payload(serial, code))
            sigs = tuple((self.index - 1, own) for _ in range(self.quorum))
        return (serial, code, UCert(serial, code, sigs))

    def announce_entries(self) -> tuple:
        return tuple(self.bogus(s) for s in sorted(self.records))

    def proposal(self) -> dict:
        return {s: 1 for s in self.records}

    def send_announce(self, ctx) -> None:
        super().send_announce(ctx)
        others = [p for p in self.peers if p != self.name]
        ctx.multicast(others, RecoverResponse(tuple(self.bogus(s) for s in sorted(self.records))))

    def on_recover_request(self, ctx, src, msg: RecoverRequest) -> None:
        if self.sender_index(src) is None or not isinstance(msg.serials, tuple):
            return
        ctx.send(src, RecoverResponse(tuple(self.bogus(s) for s in msg.serials if s in self.records)))


VC_BEHAVIOURS = {
    "silent": SilentVC,
    "equivocating": EquivocatingVC,
    "withholder": ShareWithholderVC,
    "recover-liar": RecoverLiarVC,
}

__all__ = ["POLICIES", "VC_BEHAVIOURS", "policy_schedule", "SilentVC", "EquivocatingVC",
           "ShareWithholderVC", "RecoverLiarVC"]
