"""Asynchronous binary Byzantine consensus for ``n >= 3f + 1`` nodes.

Every protocol message is disseminated with Bracha's reliable broadcast
(INITIAL / ECHO / READY), so all honest nodes see the same value from a
given origin for a given (round, step).  On top of that runs Bracha's
three-step randomized consensus:

1. broadcast ``v``; on ``K = n - f`` valid values set ``v`` to their majority
2. broadcast ``v``; if more than ``n/2`` of ``K`` valid values equal ``w``,
   set ``v = (D, w)``, otherwise ``v = BOT``
3. broadcast ``v``; with at least ``2f + 1`` ``(D, w)`` decide ``w``; with at
   least ``f + 1`` set ``v = w``; otherwise ``v`` is a local coin flip.

A delivered message only counts once it is *valid*: some ``K``-subset of
valid messages from the previous step would have let an honest sender
compute that value.  Step-3 values are encoded as ``0``/``1`` for ``(D, w)``
and ``2`` for ``BOT``.

After deciding in round ``r`` a node runs round ``r + 1`` to the end (which
lets every other honest node decide) and then stops initiating messages.  It
keeps echoing for rounds up to that point.

Instances are pure state machines.  Outputs are ``(dest, message)`` pairs
with ``dest=None`` meaning every node, the sender included.
"""

from __future__ import annotations

import hashlib
from collections import defaultdict
from dataclasses import dataclass
from typing import Any, Hashable, Iterable

from ddemos.encoding import encode

INITIAL = "INITIAL"
ECHO = "ECHO"
READY = "READY"
TAGS = (INITIAL, ECHO, READY)
BOT = 2


class BufferOverflow(RuntimeError):
    pass


@dataclass(frozen=True)
class ConsensusMsg:
    tag: str
    instance: Any
    origin: int
    round: int
    step: int
    value: int

    def canonical(self):
        return ("bc", self.tag, self.instance, self.origin, self.round, self.step, self.value)


@dataclass(frozen=True)
class BatchMsg:
    """Several instances' messages that share (tag, origin, round, step)."""

    tag: str
    origin: int
    round: int
    step: int
    entries: tuple  # ((instance, value), ...)

    def canonical(self):
        return ("bcb", self.tag, self.origin, self.round, self.step, self.entries)

    def unpack(self) -> list[ConsensusMsg]:
        return [ConsensusMsg(self.tag, iid, self.origin, self.round, self.step, v) for iid, v in self.entries]


def local_coin(seed: int, node: int, instance: Any, rnd: int) -> int:
    return hashlib.sha256(encode(("coin", seed, node, instance, rnd))).digest()[0] & 1


def _majority(c0: int, c1: int) -> int:
    return 1 if c1 > c0 else 0


class BinaryConsensus:
    """One consensus instance as seen by node ``node`` (0-based)."""

    def __init__(self, node: int, n: int, f: int, instance: Any = 0, seed: int = 0):
        if n < 3 * f + 1:
            raise ValueError(f"need n >= 3f + 1, got n={n}, f={f}")
        self.node, self.n, self.f = node, n, f
        self.instance = instance
        self.seed = seed
        self.K = n - f
        self.echo_threshold = (n + f + 2) // 2
        self.round = 0
        self.step = 0
        self.value: int | None = None
        self.decided: int | None = None
        self.decided_round: int | None = None
        self.halt_round: int | None = None
        self.halted = False
        self.dropped = 0

        self._echoed: set = set()
        self._readied: set = set()
        self._echo_from: dict = defaultdict(set)  # (o, r, s) -> senders
        self._ready_from: dict = defaultdict(set)
        self._echo_count: dict = defaultdict(int)  # (o, r, s, v)
        self._ready_count: dict = defaultdict(int)
        self._delivered: dict = {}
        self._pending: dict = defaultdict(dict)  # (r, s) -> origin -> value
        self._valid: dict = defaultdict(dict)
        self._deferred: list = []  # INITIALs more than one round ahead

    # -- public interface --------------------------------------------------

    @property
    def proposed(self) -> bool:
        return self.round > 0

    def propose(self, value: int) -> list:
        if value not in (0, 1):
            raise ValueError("binary consensus input must be 0 or 1")
        if self.proposed:
            return []
        self.round, self.step, self.value = 1, 1, value
        out = self._broadcast(1, 1, value)
        out += self._advance()
        return out

    def on_message(self, sender: int, msg: ConsensusMsg) -> list:
        if not self._well_formed(sender, msg):
            self.dropped += 1
            return []
        if self.halt_round is not None and msg.round > self.halt_round:
            return []
        key = (msg.origin, msg.round, msg.step)
        out: list = []
        if msg.tag == INITIAL:
            if sender != msg.origin:
                self.dropped += 1
                return []
            if msg.round > max(self.round, 1) + 1:
                self._deferred.append(msg)
                return []
            if key not in self._echoed:
                self._echoed.add(key)
                out.append((None, ConsensusMsg(ECHO, self.instance, *key, msg.value)))
        elif msg.tag == ECHO:
            if sender in self._echo_from[key]:
                return []
            self._echo_from[key].add(sender)
            ck = key + (msg.value,)
            self._echo_count[ck] += 1
            if self._echo_count[ck] >= self.echo_threshold and key not in self._readied:
                self._readied.add(key)
                out.append((None, ConsensusMsg(READY, self.instance, *key, msg.value)))
        else:
            if sender in self._ready_from[key]:
                return []
            self._ready_from[key].add(sender)
            ck = key + (msg.value,)
            self._ready_count[ck] += 1
            cnt = self._ready_count[ck]
            if cnt >= self.f + 1 and key not in self._readied:
                self._readied.add(key)
                out.append((None, ConsensusMsg(READY, self.instance, *key, msg.value)))
            if cnt >= 2 * self.f + 1 and key not in self._delivered:
                self._delivered[key] = msg.value
                self._pending[(msg.round, msg.step)][msg.origin] = msg.value
                self._revalidate()
                out += self._advance()
        return out

    def state(self):
        return (self.instance, self.round, self.step, self.value, self.decided, self.halted)

    # -- internals ---------------------------------------------------------

    def _well_formed(self, sender: int, msg: ConsensusMsg) -> bool:
        if not isinstance(msg, ConsensusMsg) or msg.tag not in TAGS:
            return False
        if not (0 <= sender < self.n and isinstance(msg.origin, int) and 0 <= msg.origin < self.n):
            return False
        if not (isinstance(msg.round, int) and msg.round >= 1 and msg.step in (1, 2, 3)):
            return False
        allowed = (0, 1, BOT) if msg.step == 3 else (0, 1)
        return msg.value in allowed

    def _broadcast(self, rnd: int, step: int, value: int) -> list:
        return [(None, ConsensusMsg(INITIAL, self.instance, self.node, rnd, step, value))]

    def _is_valid(self, rnd: int, step: int, v: int) -> bool:
        K, f = self.K, self.f
        if step == 1:
            if rnd == 1:
                return True
            prev = self._valid.get((rnd - 1, 3), {})
            if len(prev) < K:
                return False
            vals = list(prev.values())
            d0, d1 = vals.count(0), vals.count(1)
            bot = len(vals) - d0 - d1
            if (d0, d1)[v] >= f + 1:
                return True
            return min(d0, f) + min(d1, f) + bot >= K
        if step == 2:
            prev = self._valid.get((rnd, 1), {})
            vals = list(prev.values())
            c0, c1 = vals.count(0), vals.count(1)
            for k1 in range(max(0, K - c0), min(c1, K) + 1):
                if _majority(K - k1, k1) == v:
                    return True
            return False
        prev = self._valid.get((rnd, 2), {})
        vals = list(prev.values())
        c0, c1 = vals.count(0), vals.count(1)
        half = self.n // 2
        if c0 + c1 < K:
            return False
        if v == BOT:
            return min(c0, half) + min(c1, half) >= K
        return (c0, c1)[v] >= half + 1

    def _revalidate(self) -> None:
        changed = True
        while changed:
            changed = False
            for (rnd, step) in sorted(self._pending):
                pend = self._pending[(rnd, step)]
                for origin in list(pend):
                    v = pend[origin]
                    if self._is_valid(rnd, step, v):
                        del pend[origin]
                        self._valid[(rnd, step)][origin] = v
                        changed = True

    def _advance(self) -> list:
        out: list = []
        while self.proposed and not self.halted:
            got = self._valid.get((self.round, self.step), {})
            if len(got) < self.K:
                break
            first = list(got.values())[: self.K]
            r = self.round
            if self.step == 1:
                self.value = _majority(first.count(0), first.count(1))
                self.step = 2
                out += self._broadcast(r, 2, self.value)
            elif self.step == 2:
                c0, c1 = first.count(0), first.count(1)
                self.value = 0 if c0 > self.n / 2 else 1 if c1 > self.n / 2 else BOT
                self.step = 3
                out += self._broadcast(r, 3, self.value)
            else:
                d = (first.count(0), first.count(1))
                w = 0 if d[0] >= d[1] else 1
                if d[w] >= 2 * self.f + 1:
                    if self.decided is None:
                        self.decided, self.decided_round = w, r
                        self.halt_round = r + 1
                    self.value = w
                elif d[w] >= self.f + 1:
                    self.value = w
                else:
                    self.value = local_coin(self.seed, self.node, self.instance, r)
                if self.halt_round is not None and r + 1 > self.halt_round:
                    self.halted = True
                    break
                self.round, self.step = r + 1, 1
                out += self._broadcast(r + 1, 1, self.value)
                out += self._release_deferred()
        return out

    def _release_deferred(self) -> list:
        out: list = []
        keep = []
        for msg in self._deferred:
            if msg.round <= self.round + 1:
                key = (msg.origin, msg.round, msg.step)
                if key not in self._echoed:
                    self._echoed.add(key)
                    out.append((None, ConsensusMsg(ECHO, self.instance, *key, msg.value)))
            else:
                keep.append(msg)
        self._deferred = keep
        return out


def pack(outputs: Iterable) -> list:
    """Group per-instance outputs into :class:`BatchMsg` per (dest, tag, origin, round, step)."""
    groups: dict = {}
    for dest, msg in outputs:
        key = (dest, msg.tag, msg.origin, msg.round, msg.step)
        groups.setdefault(key, []).append((msg.instance, msg.value))
    return [(dest, BatchMsg(tag, o, r, s, tuple(entries))) for (dest, tag, o, r, s), entries in groups.items()]


class BatchConsensus:
    """Many binary consensus instances sharing message rounds.

    Messages for instances this node has not proposed for yet are buffered
    and replayed after :meth:`propose`.  ``buffer_cap`` bounds that buffer.
    """

    def __init__(self, node: int, n: int, f: int, seed: int = 0, buffer_cap: int | None = None,
                 record: bool = False):
        self.node, self.n, self.f, self.seed = node, n, f, seed
        self.instances: dict[Hashable, BinaryConsensus] = {}
        self.buffer_cap = buffer_cap
        self._buffer: list = []
        self.dropped = 0
        self.trace: list | None = [] if record else None

    def propose(self, values: dict) -> list:
        out: list = []
        for iid in sorted(values):
            if iid in self.instances:
                continue
            inst = BinaryConsensus(self.node, self.n, self.f, iid, self.seed)
            self.instances[iid] = inst
            if self.trace is not None:
                self.trace.append(("propose", iid, values[iid]))
            out += inst.propose(values[iid])
        keep = []
        for sender, msg in self._buffer:
            if msg.instance in self.instances:
                out += self._deliver(sender, msg)
            else:
                keep.append((sender, msg))
        self._buffer = keep
        return pack(out)

    def on_message(self, sender: int, batch: BatchMsg) -> list:
        if not isinstance(batch, BatchMsg) or not isinstance(batch.entries, tuple):
            self.dropped += 1
            return []
        out: list = []
        for msg in batch.unpack():
            if msg.instance in self.instances:
                out += self._deliver(sender, msg)
            else:
                if self.buffer_cap is not None and len(self._buffer) >= self.buffer_cap:
                    raise BufferOverflow(f"node {self.node}: more than {self.buffer_cap} buffered messages")
                self._buffer.append((sender, msg))
        return pack(out)

    def _deliver(self, sender: int, msg: ConsensusMsg) -> list:
        if self.trace is not None:
            self.trace.append(("msg", sender, msg))
        return self.instances[msg.instance].on_message(sender, msg)

    @property
    def decisions(self) -> dict:
        return {iid: inst.decided for iid, inst in self.instances.items() if inst.decided is not None}

    def all_decided(self, iids: Iterable) -> bool:
        return all(iid in self.instances and self.instances[iid].decided is not None for iid in iids)

    def state(self):
        return tuple(self.instances[i].state() for i in sorted(self.instances))


def replay_unbatched(trace: list, node: int, n: int, f: int, seed: int = 0) -> dict:
    """Feed a recorded batch trace into independent per-instance machines."""
    insts: dict = {}
    for event in trace:
        if event[0] == "propose":
            _, iid, v = event
            insts[iid] = BinaryConsensus(node, n, f, iid, seed)
            insts[iid].propose(v)
        else:
            _, sender, msg = event
            insts[msg.instance].on_message(sender, msg)
    return {iid: inst.decided for iid, inst in insts.items()}
