import random

import pytest

from ddemos.consensus import (
    BOT, ECHO, INITIAL, BatchConsensus, BatchMsg, BinaryConsensus, BufferOverflow, ConsensusMsg,
    replay_unbatched,
)
from ddemos.harness import run_consensus


def _drive(n, f, inputs, seed, byz=None, max_steps=200_000):
    """Deliver messages between BinaryConsensus machines in a random order.

    ``byz`` (one node index) floods every honest node with random INITIALs,
    ECHOs and READYs for whatever step it sees.
    """
    rng = random.Random(seed)
    nodes = {i: BinaryConsensus(i, n, f, "x", seed) for i in inputs}
    pending = []

    def emit(src, outs):
        for dest, msg in outs:
            for d in (nodes if dest is None else [dest]):
                if d in nodes:
                    pending.append((src, d, msg))

    for i, v in inputs.items():
        emit(i, nodes[i].propose(v))
    spoken = set()
    steps = 0
    while pending and steps < max_steps:
        steps += 1
        src, dst, msg = pending.pop(rng.randrange(len(pending)))
        emit(dst, nodes[dst].on_message(src, msg))
        if byz is not None and (msg.round, msg.step) not in spoken and msg.round < 30:
            spoken.add((msg.round, msg.step))
            vals = (0, 1, BOT) if msg.step == 3 else (0, 1)
            for d in nodes:
                for tag, origin in [(INITIAL, byz)] + [(t, o) for t in (ECHO, "READY") for o in range(n)]:
                    pending.append((byz, d, ConsensusMsg(tag, "x", origin, msg.round, msg.step, rng.choice(vals))))
    return {i: nd.decided for i, nd in nodes.items()}


@pytest.mark.parametrize("bit", [0, 1])
def test_unanimous_input_decides_it(bit):
    for seed in range(10):
        assert set(_drive(4, 1, {i: bit for i in range(4)}, seed).values()) == {bit}


def test_mixed_inputs_with_byzantine_agree():
    seen = set()
    for seed in range(150):
        dec = _drive(4, 1, {0: 1, 1: 0, 2: 0}, seed, byz=3)
        vals = set(dec.values())
        assert len(vals) == 1 and None not in vals, (seed, dec)
        seen |= vals
    assert seen <= {0, 1}


def test_unanimous_with_byzantine_keeps_input():
    for seed in range(50):
        assert set(_drive(4, 1, {0: 1, 1: 1, 2: 1}, seed, byz=3).values()) == {1}


def test_n_too_small_rejected():
    with pytest.raises(ValueError):
        BinaryConsensus(0, 3, 1)
    with pytest.raises(ValueError):
        BinaryConsensus(0, 4, 1).propose(2)


def test_malformed_and_duplicate_messages_dropped():
    node = BinaryConsensus(0, 4, 1, "x")
    node.propose(1)
    before = node.state()
    node.on_message(9, ConsensusMsg(INITIAL, "x", 9, 1, 1, 0))  # unknown sender
    node.on_message(1, ConsensusMsg(INITIAL, "x", 2, 1, 1, 0))  # INITIAL forged for another origin
    node.on_message(1, ConsensusMsg(INITIAL, "x", 1, 1, 1, 7))  # bad value
    assert node.dropped == 3 and node.state() == before
    out1 = node.on_message(1, ConsensusMsg(INITIAL, "x", 1, 1, 1, 0))
    out2 = node.on_message(1, ConsensusMsg(INITIAL, "x", 1, 1, 1, 0))
    assert out1 and out2 == []


def test_decisions_irrevocable_under_redelivery():
    rng = random.Random(3)
    nodes = {i: BinaryConsensus(i, 4, 1, "x", 3) for i in range(4)}
    log, pending = [], []
    for i in nodes:
        pending += [(i, d, m) for dest, m in nodes[i].propose(1) for d in (nodes if dest is None else [dest])]
    while pending:
        src, dst, msg = pending.pop(rng.randrange(len(pending)))
        log.append((src, dst, msg))
        pending += [(dst, d, m) for dest, m in nodes[dst].on_message(src, msg)
                    for d in (nodes if dest is None else [dest])]
    decided = {i: n.decided for i, n in nodes.items()}
    assert set(decided.values()) == {1}
    for src, dst, msg in log:
        nodes[dst].on_message(src, msg)
    assert {i: n.decided for i, n in nodes.items()} == decided


def test_batch_buffers_unknown_instances_and_cap():
    b = BatchConsensus(0, 4, 1)
    msg = BatchMsg(INITIAL, 1, 1, 1, (("s7", 1),))
    assert b.on_message(1, msg) == []
    out = b.propose({"s7": 1})
    assert out  # own INITIAL plus the echo of the buffered one
    capped = BatchConsensus(0, 4, 1, buffer_cap=1)
    capped.on_message(1, msg)
    with pytest.raises(BufferOverflow):
        capped.on_message(2, BatchMsg(INITIAL, 2, 1, 1, (("s7", 0),)))
    assert BatchConsensus(0, 4, 1).on_message(1, "junk") == []


@pytest.mark.parametrize("n,f,byz", [(4, 1, (3,)), (7, 2, (5, 6))])
def test_harness_agreement_and_batch_equivalence(n, f, byz):
    for seed in range(4):
        inputs = {i: {k: (i * 7 + k + seed) % 2 for k in range(6)} for i in range(n) if i not in byz}
        run = run_consensus(n, f, inputs, seed=seed, byzantine=byz, record=True)
        per_node = list(run.decisions.values())
        assert all(d == per_node[0] for d in per_node)
        assert None not in per_node[0].values()
        for i, node in run.nodes.items():
            if i in byz:
                continue
            assert replay_unbatched(node.batch.trace, i, n, f, seed) == run.decisions[i]


def test_harness_deterministic():
    inputs = {i: {0: i % 2, 1: 1} for i in range(3)}
    a = run_consensus(4, 1, inputs, seed=11, byzantine=(3,))
    b = run_consensus(4, 1, inputs, seed=11, byzantine=(3,))
    assert a.digest == b.digest and a.decisions == b.decisions
