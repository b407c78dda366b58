"""Shared scaffolding: a fake handler context and a synchronous message pump."""

import random


class FakeCtx:
    def __init__(self, local=0, now=None):
        self.local = local
        self.now = local if now is None else now
        self.outbox = []
        self.timers = []
        self.cancelled = []

    def send(self, dst, msg):
        self.outbox.append((dst, msg))

    def multicast(self, dsts, msg):
        for d in dsts:
            self.outbox.append((d, msg))

    def set_timer(self, local_at, tag):
        self.timers.append((local_at, tag))

    def set_timer_after(self, delay, tag):
        self.timers.append((self.local + delay, tag))

    def cancel_timer(self, tag):
        self.cancelled.append(tag)


class Pump:
    """Deliver messages among ``nodes`` (name -> node) until quiet.

    Messages to names outside ``nodes`` are collected in ``self.external``.
    ``drop(src, dst, msg)`` may veto a delivery.
    """

    def __init__(self, nodes, local=0, seed=None, drop=None):
        self.nodes = nodes
        self.local = local
        self.rng = random.Random(seed) if seed is not None else None
        self.drop = drop
        self.queue = []
        self.external = []
        self.delivered = 0

    def inject(self, src, dst, msg):
        self.queue.append((src, dst, msg))

    def _collect(self, src, ctx):
        for dst, msg in ctx.outbox:
            if dst in self.nodes:
                self.queue.append((src, dst, msg))
            else:
                self.external.append((src, dst, msg))

    def fire(self, name, tag):
        ctx = FakeCtx(self.local)
        self.nodes[name].on_timer(ctx, tag)
        self._collect(name, ctx)

    def run(self, limit=1_000_000):
        while self.queue and self.delivered < limit:
            i = self.rng.randrange(len(self.queue)) if self.rng else 0
            src, dst, msg = self.queue.pop(i)
            if self.drop and self.drop(src, dst, msg):
                continue
            self.delivered += 1
            ctx = FakeCtx(self.local)
            self.nodes[dst].on_message(ctx, src, msg)
            self._collect(dst, ctx)
        return self
