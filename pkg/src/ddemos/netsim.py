"""Deterministic discrete-event network and clock simulator.

Time is an integer tick.  Events are processed in ``(tick, seq)`` order
where ``seq`` is a global insertion counter, so a run is a pure function of
its configuration, its nodes and its seed.

Model
-----
* Each handler invocation costs ``t_comp`` ticks.  Work is serialized per
  ``(node, work_key)``; a node may process different ballots concurrently
  but never two events for the same ballot at once.  A delivery that finds
  its key busy is re-queued at the tick the key frees up.  Messages a
  handler sends depart when it finishes.
* Delivery delay of a message is chosen by the schedule policy in
  ``[1, delta]`` (liveness mode) or ``[1, safety_max_delay]`` with drops and
  duplicates (safety mode).  A dropped transmission is retried every
  ``delta`` ticks, so every message is eventually delivered.  Messages to
  oneself take zero ticks.
* Every node has a local clock ``tick + offset``.  The offset does a random
  walk with steps in ``{-1, 0, +1}`` clamped to ``[-drift, drift]``, which
  keeps local clocks monotone.  Timers are set in local time.
* Bulletin-board nodes may never send to each other; the transport raises
  :class:`TransportViolation` if one tries.
"""

from __future__ import annotations

import gc
import hashlib
import heapq
import json
import random
from dataclasses import asdict, dataclass, field
from typing import Any, Hashable

from ddemos.encoding import encode

SCHEDULES = ("random", "min", "max", "alternating")
MODES = ("liveness", "safety")


class TransportViolation(RuntimeError):
    pass


class ConformanceError(ValueError):
    """The configuration exceeds the fault model and no override was given."""


@dataclass
class SimConfig:
    seed: int = 0
    delta: int = 5
    drift: int = 2
    t_comp: int = 1
    mode: str = "liveness"
    schedule: str = "random"
    drop_rate: float = 0.0
    dup_rate: float = 0.0
    safety_max_delay: int | None = None
    barrier: int | None = None
    max_ticks: int = 2_000_000
    log_events: bool = True

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.schedule not in SCHEDULES:
            raise ValueError(f"schedule must be one of {SCHEDULES}")
        if self.delta < 1 or self.drift < 0 or self.t_comp < 0:
            raise ValueError("need delta >= 1, drift >= 0, t_comp >= 0")
        if self.mode == "liveness" and (self.drop_rate or self.dup_rate):
            raise ValueError("drops and duplicates are only allowed in safety mode")

    @property
    def end_barrier(self) -> int:
        return 2 * self.drift + self.delta if self.barrier is None else self.barrier

    @property
    def max_delay(self) -> int:
        if self.mode == "liveness":
            return self.delta
        return self.safety_max_delay if self.safety_max_delay is not None else 4 * self.delta

    def to_dict(self) -> dict:
        return asdict(self)


class Node:
    """Base class for simulated participants."""

    kind = "node"

    def __init__(self, name: str):
        self.name = name
        self.honest = True

    def start(self, ctx: "Context") -> None:
        pass

    def on_message(self, ctx: "Context", src: str, msg: Any) -> None:
        pass

    def on_timer(self, ctx: "Context", tag: Any) -> None:
        pass

    def work_key(self, msg: Any) -> Hashable:
        return None

    def state(self) -> Any:
        return None

    def state_digest(self) -> bytes:
        return hashlib.sha256(encode(self.state())).digest()


class Context:
    """Handle passed to a node while it processes one event."""

    __slots__ = ("sim", "node", "now", "outbox", "_local")

    def __init__(self, sim: "Simulator", node: Node, now: int):
        self.sim = sim
        self.node = node
        self.now = now
        self.outbox: list = []
        self._local = None

    @property
    def local(self) -> int:
        if self._local is None:
            self._local = self.sim.local_time(self.node.name, self.now)
        return self._local

    def send(self, dst: str, msg: Any) -> None:
        self.outbox.append((dst, msg))

    def multicast(self, dsts, msg: Any) -> None:
        for d in dsts:
            self.outbox.append((d, msg))

    def set_timer(self, local_at: int, tag: Any) -> None:
        self.sim.set_timer(self.node.name, local_at, tag, not_before=self.now + self.sim.config.t_comp)

    def set_timer_after(self, local_delay: int, tag: Any) -> None:
        self.set_timer(self.local + local_delay, tag)

    def cancel_timer(self, tag: Any) -> None:
        """Drop a pending timer with this tag; it will not fire or appear in the transcript."""
        self.sim._cancelled.add((self.node.name, tag))


_STEPS = (-1, 0, 0, 0, 1)
_SEG = 3  # the offset moves at most once every 2**_SEG ticks


class _Clock:
    """Random-walk clock offset, clamped to ``[-bound, bound]``.

    The walk takes one step per segment of ``2**_SEG`` ticks, so local time
    never runs backwards and stays within the drift bound.
    """

    __slots__ = ("offsets", "rng", "bound")

    def __init__(self, rng: random.Random, bound: int):
        self.rng = rng
        self.bound = bound
        self.offsets = [rng.randint(-bound, bound)]

    def offset(self, t: int) -> int:
        i = t >> _SEG
        offs = self.offsets
        if len(offs) <= i:
            lo, hi = -self.bound, self.bound
            cur = offs[-1]
            for step in self.rng.choices(_STEPS, k=i + 1 - len(offs) + 16):
                cur += step
                cur = lo if cur < lo else hi if cur > hi else cur
                offs.append(cur)
        return offs[i]


class Simulator:
    def __init__(self, config: SimConfig):
        self.config = config
        self.rng = random.Random(encode(("sched", config.seed)))
        self.nodes: dict[str, Node] = {}
        self._clocks: dict[str, _Clock] = {}
        self._queue: list = []
        self._seq = 0
        self._busy: dict = {}
        self._alt = False
        self.now = 0
        self._digest = hashlib.sha256()
        self._msg_cache: dict = {}
        self._cancelled: set = set()
        self.events: list = []
        self.metrics: dict[str, Any] = {
            "delivered": 0, "sent": 0, "dropped": 0, "duplicated": 0, "retransmitted": 0,
            "max_honest_delay": 0, "max_drift_observed": 0, "by_type": {},
        }

    # -- wiring -------------------------------------------------------------

    def add_node(self, node: Node, start_at: int | None = 0) -> Node:
        if node.name in self.nodes:
            raise ValueError(f"duplicate node name {node.name!r}")
        self.nodes[node.name] = node
        crng = random.Random(encode(("clock", self.config.seed, node.name)))
        self._clocks[node.name] = _Clock(crng, self.config.drift)
        if start_at is not None:
            self._push(start_at, "init", (node.name,))
        return node

    def local_time(self, name: str, tick: int | None = None) -> int:
        t = self.now if tick is None else tick
        return t + self._clocks[name].offset(t)

    def global_for_local(self, name: str, local_at: int, not_before: int) -> int:
        t = max(not_before, local_at - self.config.drift)
        clock = self._clocks[name]
        while t + clock.offset(t) < local_at:
            t += 1
        return t

    def set_timer(self, name: str, local_at: int, tag: Any, not_before: int) -> None:
        self._push(self.global_for_local(name, local_at, not_before), "timer", (name, tag))

    # -- queue ----------------------------------------------------------------

    def _push(self, tick: int, kind: str, data: tuple) -> None:
        self._seq += 1
        heapq.heappush(self._queue, (tick, self._seq, kind, data))

    def _delay(self) -> int:
        lo, hi = 1, self.config.max_delay
        pol = self.config.schedule
        if pol == "random":
            return lo + int(self.rng.random() * (hi - lo + 1))
        if pol == "min":
            return lo
        if pol == "max":
            return hi
        self._alt = not self._alt
        return lo if self._alt else hi

    def _transmit(self, src: str, dst: str, msg: Any, depart: int, first_sent: int) -> None:
        if src == dst:
            self._push(depart, "deliver", (src, dst, msg, first_sent))
            return
        cfg = self.config
        if cfg.mode == "safety" and cfg.drop_rate and self.rng.random() < cfg.drop_rate:
            self.metrics["dropped"] += 1
            self._push(depart + cfg.delta, "retransmit", (src, dst, msg, first_sent))
            return
        self._push(depart + self._delay(), "deliver", (src, dst, msg, first_sent))
        if cfg.mode == "safety" and cfg.dup_rate and self.rng.random() < cfg.dup_rate:
            self.metrics["duplicated"] += 1
            self._push(depart + self._delay(), "deliver", (src, dst, msg, first_sent))

    def _flush(self, ctx: Context, src: str, depart: int) -> None:
        outbox = ctx.outbox
        if not outbox:
            return
        nodes = self.nodes
        from_bb = nodes[src].kind == "bb"
        plain = self.config.mode == "liveness"
        sent = 0
        for dst, msg in outbox:
            dnode = nodes.get(dst)
            if dnode is None:
                self.metrics["unroutable"] = self.metrics.get("unroutable", 0) + 1
                continue
            if from_bb and dnode.kind == "bb":
                raise TransportViolation(f"{src} attempted to contact {dst}")
            sent += 1
            if plain and src != dst:
                self._seq += 1
                heapq.heappush(self._queue, (depart + self._delay(), self._seq, "deliver", (src, dst, msg, depart)))
            else:
                self._transmit(src, dst, msg, depart, depart)
        self.metrics["sent"] += sent

    def _claim(self, name: str, key: Hashable, tick: int, requeue: tuple):
        """A Context for ``name`` at ``tick``, or None (event re-queued) while ``(name, key)`` is busy."""
        bk = (name, key)
        busy = self._busy
        free = busy.get(bk, 0)
        if free > tick:
            self._push(free, *requeue)
            return None
        busy[bk] = tick + self.config.t_comp
        return Context(self, self.nodes[name], tick)

    def _msg_digest(self, msg: Any) -> bytes:
        # multicast payloads are shared objects, so encode each one once
        hit = self._msg_cache.get(id(msg))
        if hit is not None and hit[0] is msg:
            return hit[1]
        d = encode(msg)
        self._msg_cache[id(msg)] = (msg, d)
        return d

    def _record(self, tick: int, kind: str, src: str, dst: str, msg: Any) -> None:
        body = self._msg_digest(msg)
        self._digest.update(b"%d|%s|%s|%s|%d|" % (tick, kind.encode(), src.encode(), dst.encode(), len(body)))
        self._digest.update(body)
        if self.config.log_events:
            self.events.append((tick, kind, src, dst, type(msg).__name__ if msg is not None else ""))

    # -- main loop ------------------------------------------------------------

    def run(self, until: int | None = None) -> None:
        # The event loop allocates many small acyclic objects; pausing the cyclic
        # collector for the duration roughly halves wall time on large runs.
        was_enabled = gc.isenabled()
        gc.disable()
        try:
            self._loop(until)
        finally:
            if was_enabled:
                gc.enable()

    def _loop(self, until: int | None) -> None:
        limit = self.config.max_ticks if until is None else until
        queue, nodes, metrics = self._queue, self.nodes, self.metrics
        by_type = metrics["by_type"]
        t_comp = self.config.t_comp
        while queue:
            tick = queue[0][0]
            if tick > limit:
                break
            _, _, kind, data = heapq.heappop(queue)
            self.now = tick
            if kind == "deliver" or kind == "queued":
                src, dst, msg, sent = data
                node = nodes[dst]
                if kind == "deliver" and src != dst and node.honest and nodes[src].honest:
                    # network delay: arrival minus first transmission attempt
                    # (waiting for the receiver's busy work key is computation)
                    lat = tick - sent
                    if lat > metrics["max_honest_delay"]:
                        metrics["max_honest_delay"] = lat
                ctx = self._claim(dst, node.work_key(msg), tick, ("queued", data))
                if ctx is None:
                    continue
                node.on_message(ctx, src, msg)
                self._flush(ctx, dst, tick + t_comp)
                self._record(tick, "deliver", src, dst, msg)
                metrics["delivered"] += 1
                tname = type(msg).__name__
                by_type[tname] = by_type.get(tname, 0) + 1
            elif kind == "timer":
                name, tag = data
                if data in self._cancelled:
                    self._cancelled.discard(data)
                    continue
                ctx = self._claim(name, None, tick, (kind, data))
                if ctx is None:
                    continue
                nodes[name].on_timer(ctx, tag)
                self._flush(ctx, name, tick + t_comp)
                self._record(tick, kind, name, name, tag)
            elif kind == "init":
                (name,) = data
                ctx = self._claim(name, None, tick, (kind, data))
                if ctx is None:
                    continue
                nodes[name].start(ctx)
                self._flush(ctx, name, tick + t_comp)
                self._record(tick, kind, name, name, None)
            elif kind == "retransmit":
                src, dst, msg, sent = data
                metrics["retransmitted"] += 1
                self._transmit(src, dst, msg, tick, sent)
        self.metrics["final_tick"] = self.now
        drift = 0
        for name, node in self.nodes.items():
            if node.honest:
                offs = self._clocks[name].offsets[:(self.now >> _SEG) + 1]
                drift = max(drift, max(abs(o) for o in offs))
        self.metrics["max_drift_observed"] = drift

    @property
    def digest(self) -> str:
        return self._digest.hexdigest()

    def transcript(self) -> "RunTranscript":
        return RunTranscript(
            digest=self.digest,
            events=list(self.events),
            node_digests={n: node.state_digest().hex() for n, node in sorted(self.nodes.items())},
            metrics=dict(self.metrics),
        )


@dataclass
class RunTranscript:
    digest: str
    events: list
    node_digests: dict
    metrics: dict
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"digest": self.digest, "events": [list(e) for e in self.events],
                "node_digests": self.node_digests, "metrics": self.metrics, "extra": self.extra}

    @classmethod
    def from_dict(cls, d) -> "RunTranscript":
        return cls(d["digest"], [tuple(e) for e in d["events"]], d["node_digests"], d["metrics"],
                   d.get("extra", {}))

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True, default=str)
