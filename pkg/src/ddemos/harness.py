"""Stand-alone consensus runs on the simulator, for property checks and demos."""

from __future__ import annotations

import random
from dataclasses import dataclass

from ddemos.consensus import BOT, INITIAL, BatchConsensus, BatchMsg, ConsensusMsg, pack
from ddemos.netsim import Node, SimConfig, Simulator


def _name(i: int) -> str:
    return f"c{i}"


class ConsensusNode(Node):
    kind = "consensus"

    def __init__(self, idx: int, n: int, f: int, inputs: dict, seed: int, record: bool = False):
        super().__init__(_name(idx))
        self.idx, self.n = idx, n
        self.inputs = inputs
        self.batch = BatchConsensus(idx, n, f, seed=seed, record=record)

    def _emit(self, ctx, outs) -> None:
        for dest, msg in outs:
            if dest is None:
                ctx.multicast([_name(j) for j in range(self.n)], msg)
            else:
                ctx.send(_name(dest), msg)

    def start(self, ctx) -> None:
        self._emit(ctx, self.batch.propose(self.inputs))

    def on_message(self, ctx, src, msg) -> None:
        self._emit(ctx, self.batch.on_message(int(src[1:]), msg))

    def state(self):
        return self.batch.state()


class ByzantineConsensusNode(Node):
    """Sends each peer its own random opinion for every step it hears about.

    With ``strategy="silent"`` it never sends anything.
    """

    kind = "consensus"

    def __init__(self, idx: int, n: int, instances, seed: int, strategy: str = "equivocate"):
        super().__init__(_name(idx))
        self.honest = False
        self.idx, self.n = idx, n
        self.instances = sorted(instances)
        self.rng = random.Random(seed * 7919 + idx)
        self.strategy = strategy
        self._spoken: set = set()
        self.colluders: set = {self.name}

    def _spray(self, ctx, rnd: int, step: int) -> None:
        if (rnd, step) in self._spoken or self.strategy == "silent":
            return
        self._spoken.add((rnd, step))
        vals = (0, 1, BOT) if step == 3 else (0, 1)
        for j in range(self.n):
            entries = tuple((iid, self.rng.choice(vals)) for iid in self.instances)
            ctx.send(_name(j), BatchMsg(INITIAL, self.idx, rnd, step, entries))
            # conflicting echoes and readies for everybody's broadcasts
            for tag in ("ECHO", "READY"):
                for o in range(self.n):
                    ent = tuple((iid, self.rng.choice(vals)) for iid in self.instances)
                    ctx.send(_name(j), BatchMsg(tag, o, rnd, step, ent))

    def start(self, ctx) -> None:
        self._spray(ctx, 1, 1)

    def on_message(self, ctx, src, msg) -> None:
        if src not in self.colluders and isinstance(msg, BatchMsg) and msg.round <= 50:
            self._spray(ctx, msg.round, msg.step)
            nxt = (msg.round, msg.step + 1) if msg.step < 3 else (msg.round + 1, 1)
            self._spray(ctx, *nxt)

    def state(self):
        return ("byzantine", self.idx)


@dataclass
class ConsensusRun:
    decisions: dict  # honest node index -> {instance: bit or None}
    digest: str
    metrics: dict
    nodes: dict


def run_consensus(n: int, f: int, inputs: dict, seed: int = 0, byzantine=(), strategy: str = "equivocate",
                  schedule: str = "random", delta: int = 5, record: bool = False,
                  max_ticks: int = 200_000) -> ConsensusRun:
    """``inputs`` maps each honest node index to ``{instance: bit}``."""
    sim = Simulator(SimConfig(seed=seed, delta=delta, drift=0, t_comp=0, schedule=schedule,
                              max_ticks=max_ticks, log_events=False))
    instances = sorted({iid for v in inputs.values() for iid in v})
    nodes = {}
    for i in range(n):
        if i in byzantine:
            nodes[i] = sim.add_node(ByzantineConsensusNode(i, n, instances, seed, strategy))
        else:
            nodes[i] = sim.add_node(ConsensusNode(i, n, f, inputs[i], seed, record=record))
    colluders = {_name(i) for i in byzantine}
    for i in byzantine:
        nodes[i].colluders = colluders
    sim.run()
    decisions = {
        i: {iid: (node.batch.instances[iid].decided if iid in node.batch.instances else None)
            for iid in instances}
        for i, node in nodes.items() if i not in byzantine
    }
    return ConsensusRun(decisions, sim.digest, sim.metrics, nodes)


__all__ = ["ConsensusNode", "ByzantineConsensusNode", "ConsensusRun", "run_consensus", "pack", "ConsensusMsg"]
