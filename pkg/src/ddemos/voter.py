"""Voter client: the [d]-patient voting loop."""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from ddemos.ea import Ballot
from ddemos.encoding import encode
from ddemos.messages import Vote, VoteReply
from ddemos.netsim import Node


def compute_t_wait(n_v: int, t_comp: int, drift: int, delta: int) -> int:
    """Patience that guarantees a receipt from an honest VC: ``(2N_v+4)T_comp + 12Δ + 6δ``."""
    if min(n_v, t_comp, drift, delta) < 0:
        raise ValueError("inputs must be non-negative")
    return (2 * n_v + 4) * t_comp + 12 * drift + 6 * delta


@dataclass(frozen=True)
class VoterIntent:
    serial: int
    part: str
    option: int  # index into the option list
    start: int = 0

    def to_dict(self) -> dict:
        return {"serial": self.serial, "part": self.part, "option": self.option, "start": self.start}

    @classmethod
    def from_dict(cls, d) -> "VoterIntent":
        return cls(int(d["serial"]), str(d["part"]), int(d["option"]), int(d.get("start", 0)))


@dataclass
class VoterSession:
    ballot: Ballot
    part: str
    option: int
    patience: int
    blacklist: list = field(default_factory=list)
    attempts: list = field(default_factory=list)  # (vc, local send time, outcome)
    outcome: str = "pending"  # pending | receipt | exhausted
    receipt: bytes | None = None
    started: int | None = None
    finished: int | None = None

    @property
    def code(self) -> bytes:
        return self.ballot.line(self.part, self.option).code

    @property
    def expected_receipt(self) -> bytes:
        return self.ballot.line(self.part, self.option).receipt

    @property
    def failed_attempts(self) -> int:
        return sum(1 for a in self.attempts if a[2] == "timeout")

    @property
    def latency(self) -> int | None:
        if self.started is None or self.finished is None:
            return None
        return self.finished - self.started


def voter_name(serial: int, copy: int = 0) -> str:
    return f"voter{serial}" if copy == 0 else f"voter{serial}.{copy}"


class VoterNode(Node):
    """Submits one vote code and keeps retrying at fresh VCs until a valid receipt."""

    kind = "voter"

    def __init__(self, session: VoterSession, vc_names, start: int, seed: int = 0, copy: int = 0):
        super().__init__(voter_name(session.ballot.serial, copy))
        self.session = session
        self.vc_names = list(vc_names)
        self.start_at = start
        self.rng = random.Random(encode(("voter", seed, session.ballot.serial, copy)))
        self.current: str | None = None
        self.attempt = 0

    def start(self, ctx) -> None:
        ctx.set_timer(self.start_at, ("begin",))

    def try_next(self, ctx) -> None:
        s = self.session
        choices = [v for v in self.vc_names if v not in s.blacklist]
        if not choices:
            s.outcome = "exhausted"
            s.finished = ctx.local
            return
        self.current = self.rng.choice(choices)
        self.attempt += 1
        s.attempts.append([self.current, ctx.local, "sent"])
        ctx.send(self.current, Vote(s.ballot.serial, s.code))
        ctx.set_timer_after(s.patience, ("timeout", self.attempt))

    def on_timer(self, ctx, tag) -> None:
        s = self.session
        if s.outcome != "pending":
            return
        if tag[0] == "begin":
            s.started = ctx.local
            self.try_next(ctx)
        elif tag[0] == "timeout" and tag[1] == self.attempt:
            s.attempts[-1][2] = "timeout"
            s.blacklist.append(self.current)
            self.try_next(ctx)

    def on_message(self, ctx, src, msg) -> None:
        s = self.session
        if not isinstance(msg, VoteReply) or s.outcome != "pending":
            return
        if msg.serial != s.ballot.serial or msg.code != s.code or msg.receipt is None:
            return  # error replies are ignored; patience decides
        if msg.receipt == s.expected_receipt:
            s.outcome = "receipt"
            s.receipt = msg.receipt
            s.finished = ctx.local
            ctx.cancel_timer(("timeout", self.attempt))
            if s.attempts:
                s.attempts[-1][2] = "receipt" if src == self.current else s.attempts[-1][2]

    def state(self):
        s = self.session
        return (s.ballot.serial, s.part, s.option, s.outcome, s.receipt, tuple(s.blacklist))


__all__ = ["compute_t_wait", "VoterIntent", "VoterSession", "VoterNode", "voter_name"]
