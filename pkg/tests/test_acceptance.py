"""Acceptance suite.  Each test prints one PASS/FAIL line for its criterion.

Run on its own with ``pytest -m acceptance -s``; the lines also appear in a
plain ``pytest -v`` run because they are written with capture disabled.
"""

import itertools
import math
import random
import time

import pytest

from ddemos.auditor import audit
from ddemos.bench import bench_bundle
from ddemos.consensus import replay_unbatched
from ddemos.crypto.commitments import Opening, combine, combine_openings, commit, fold, open_and_decode, unit_vector
from ddemos.crypto.groups import GroupParams
from ddemos.crypto.proofs import finish_proof, prove_first_move, verify_proof
from ddemos.crypto.sharing import InsufficientShares, reconstruct, share_secret
from ddemos.crypto.signatures import KeyPair
from ddemos.encoding import encode
from ddemos.ea import ElectionParams, save_bundle, setup
from ddemos.harness import run_consensus
from ddemos.messages import UCert
from ddemos.netsim import SCHEDULES
from ddemos.scenario import Scenario, intents_from_counts, run_election
from ddemos.voter import VoterIntent, compute_t_wait

pytestmark = pytest.mark.acceptance

SAFETY_POLICIES = ["equivocating-vc", "share-withholder", "garbage-bb", "recover-liar"]


@pytest.fixture
def report(capsys):
    def emit(num, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {num}: {detail}")
        return ok
    return emit


@pytest.fixture(scope="module")
def small_bundle():
    return setup(ElectionParams(n=4, m=2, group="test", seed=4, t_end=200))


def _valid_ucerts(run):
    quorum = run.params.n_v - run.params.f_v
    pubs = run.vcs["vc1"].vc_publics
    found = []
    for vc in run.vcs.values():
        found.extend(getattr(vc, "formed", []))
        for rec in getattr(vc, "records", {}).values():
            if isinstance(rec.ucert, UCert):
                found.append(rec.ucert)
    return [u for u in found if u.valid(pubs, quorum)]


# 1 ---------------------------------------------------------------------------


def test_c1_end_to_end_correctness(report):
    t0 = time.perf_counter()
    bundle = setup(ElectionParams(n=100, m=4, group="secp256k1", seed=1, t_end=600))
    counts = [31, 7, 40, 22]
    run = run_election(bundle, Scenario(intents=intents_from_counts(counts, "AB", spacing=2)), seed=1)
    tally = run.tally
    wall = time.perf_counter() - t0
    rep = audit(run.published(), run.delegated())
    ok = tuple(tally) == tuple(counts) and wall < 60 and rep.ok
    assert report(1, ok, f"n=100 m=4 secp256k1 tally={tuple(tally)} intended={tuple(counts)} "
                         f"audit={rep.status} wall={wall:.1f}s (<60s)")


# 2 + 3 -----------------------------------------------------------------------


@pytest.fixture(scope="module")
def safety_runs(small_bundle):
    """Per policy: (runs, receipt violations, vote-set disagreements)."""
    out = {}
    for policy in SAFETY_POLICIES:
        runs = violations = disagreements = 0
        for seed in range(500):
            intents = intents_from_counts([2, 2], "AB" if seed % 2 else "BA", spacing=seed % 3)
            run = run_election(small_bundle, Scenario(intents=intents, policy=policy, log_events=False), seed=seed)
            assert len(run.corrupt_vc) == 1 and len(run.corrupt_bb) == 1
            runs += 1
            sets = {encode(vs) for vs in run.vote_sets.values()}
            if len(sets) != 1 or None in run.vote_sets.values():
                disagreements += 1
            vs = next(iter(run.vote_sets.values()))
            t = run.published()
            bad = any((serial, code) not in vs or (serial, code) not in t.vote_set
                      for serial, code in run.receipts)
            if bad or t.tally != run.intended_tally(vs):
                violations += 1
        out[policy] = (runs, violations, disagreements)
    return out


def test_c2_safety(safety_runs, report):
    ok = all(r >= 500 and v == 0 for r, v, _ in safety_runs.values())
    detail = ", ".join(f"{p}: {r} runs {v} violations" for p, (r, v, _) in safety_runs.items())
    assert report(2, ok, f"f_v=1 f_b=1; {detail}")


def test_c3_vote_set_agreement(safety_runs, report):
    ok = all(d == 0 for _, _, d in safety_runs.values())
    total = sum(r for r, _, _ in safety_runs.values())
    bad = sum(d for _, _, d in safety_runs.values())
    assert report(3, ok, f"honest VC vote sets byte-identical in {total - bad}/{total} runs")


# 4 ---------------------------------------------------------------------------


def test_c4_liveness(report):
    p = ElectionParams(n=8, m=2, group="test", seed=2, t_end=400)
    bundle = setup(p)
    t_wait = compute_t_wait(p.n_v, 1, 2, 5)
    latest = p.t_end - (p.f_v + 1) * t_wait
    policies = ["silent-vc", "honest", "equivocating-vc", "share-withholder", "garbage-bb", "delay-maximizer",
                "recover-liar"]
    runs = voters = got = retried = 0
    for seed in range(210):
        rng = random.Random(seed)
        intents = [VoterIntent(s, rng.choice("AB"), rng.randrange(2), rng.randrange(latest)) for s in range(1, 9)]
        sc = Scenario(intents=intents, policy=policies[seed % len(policies)], t_comp=1, drift=2, delta=5,
                      patience=t_wait, mode="liveness", voting_only=True, log_events=False)
        run = run_election(bundle, sc, seed=seed)
        runs += 1
        voters += len(run.sessions)
        got += sum(s.outcome == "receipt" and s.receipt == s.expected_receipt for s in run.sessions)
        retried += sum(s.failed_attempts > 0 for s in run.sessions)
    ok = t_wait == 66 and runs >= 200 and got == voters
    assert report(4, ok, f"T_wait={t_wait}, starts < T_end-{(p.f_v + 1) * t_wait}; receipts {got}/{voters} "
                         f"over {runs} runs incl. silent-vc ({retried} voters retried)")


# 5 ---------------------------------------------------------------------------


def test_c5_retry_probability(report):
    bundle = setup(ElectionParams(n=100, m=2, n_v=7, f_v=2, group="test", seed=5, t_end=3000))
    sessions = two_fail = 0
    seed = 0
    while sessions < 10_000:
        rng = random.Random(seed)
        intents = [VoterIntent(s, rng.choice("AB"), rng.randrange(2), rng.randrange(50)) for s in range(1, 101)]
        run = run_election(bundle, Scenario(intents=intents, policy="silent-vc", voting_only=True,
                                            log_events=False), seed=seed)
        assert len(run.corrupt_vc) == 2
        sessions += len(run.sessions)
        two_fail += sum(s.failed_attempts >= 2 for s in run.sessions)
        seed += 1
    p = 1 / 21
    bound = p + 3 * math.sqrt(p * (1 - p) / sessions)
    freq = two_fail / sessions
    assert report(5, freq <= bound, f"N_v=7 f_v=2 silent; >=2 failed attempts {two_fail}/{sessions} = {freq:.4f} "
                                    f"<= {bound:.4f} (1/21 + 3 sigma)")


# 6 ---------------------------------------------------------------------------


def test_c6_audit_detection(report):
    # Every ballot carries one modification attack on a random part; each
    # ballot is an independent single-attack trial, judged by the auditor.
    trials = detected = mismatched = 0
    ballots_per_run = 200
    seed = 0
    while trials < 10_000:
        rng = random.Random(1000 + seed)
        attacked = rng.choice("AB")
        bundle = setup(ElectionParams(n=ballots_per_run, m=2, group="test", seed=seed, t_end=1500),
                       {"kind": "modify", "serials": list(range(1, ballots_per_run + 1)), "part": attacked,
                        "swap": [0, 1]})
        parts = [rng.choice("AB") for _ in range(ballots_per_run)]
        intents = [VoterIntent(s, parts[s - 1], rng.randrange(2), (s - 1) // 4) for s in range(1, ballots_per_run + 1)]
        run = run_election(bundle, Scenario(intents=intents, log_events=False), seed=seed)
        rep = audit(run.published(), run.delegated())
        flagged = {e["serial"] for e in rep.entries if e["check"] == "g"}
        for s in range(1, ballots_per_run + 1):
            hit = s in flagged
            detected += hit
            mismatched += hit != (parts[s - 1] != attacked)
        trials += ballots_per_run
        seed += 1
    rate = detected / trials
    # A ten-ballot attack escapes only if every one of the ten voters used the
    # tampered part; draw 10^4 such attacks from the observed per-ballot rule.
    rng = random.Random(6)
    escaped = sum(all(rng.random() >= rate for _ in range(10)) for _ in range(10_000))
    esc_rate = escaped / 10_000
    ok = abs(rate - 0.5) <= 0.05 and mismatched == 0 and esc_rate <= 0.003
    assert report(6, ok, f"single attack detected {detected}/{trials} = {rate:.4f} (0.5 +- 0.05), "
                         f"rule mismatches {mismatched}; 10-ballot undetected {esc_rate:.4f} (<= 0.003)")


# 7 ---------------------------------------------------------------------------


def test_c7_ucert_exclusivity(small_bundle, report):
    schedules = list(SCHEDULES)
    clashes = ucerts = 0
    for seed in range(500):
        rng = random.Random(seed)
        intents = [VoterIntent(s, rng.choice("AB"), rng.randrange(2), rng.randrange(5)) for s in range(1, 5)]
        sc = Scenario(intents=intents, policy="equivocating-vc", schedule=schedules[seed % len(schedules)],
                      mode="safety" if seed % 2 else "liveness", drop_rate=0.1 if seed % 2 else 0.0,
                      log_events=False)
        run = run_election(small_bundle, sc, seed=seed)
        per_serial = {}
        for u in _valid_ucerts(run):
            per_serial.setdefault(u.serial, set()).add(u.code)
            ucerts += 1
        clashes += sum(len(c) > 1 for c in per_serial.values())
    assert report(7, clashes == 0, f"500 adversarial schedules, {ucerts} valid UCERTs seen, "
                                   f"{clashes} serials with two codes")


# 8 ---------------------------------------------------------------------------


def _consensus_inputs(honest, rng, instances=5):
    # instance 0 unanimous 0, instance 1 unanimous 1, the rest random
    out = {}
    for i in honest:
        out[i] = {0: 0, 1: 1}
        out[i].update({k: rng.randrange(2) for k in range(2, instances)})
    return out


def test_c8_consensus(report):
    summary = []
    ok = True
    for n, f in [(4, 1), (7, 2)]:
        good = 0
        for seed in range(500):
            rng = random.Random(seed)
            byz = tuple(range(n - f, n))
            honest = [i for i in range(n) if i not in byz]
            inputs = _consensus_inputs(honest, rng)
            run = run_consensus(n, f, inputs, seed=seed, byzantine=byz,
                                strategy="silent" if seed % 4 == 3 else "equivocate",
                                schedule=SCHEDULES[seed % len(SCHEDULES)], record=True)
            decs = list(run.decisions.values())
            agree = all(d == decs[0] for d in decs) and None not in decs[0].values()
            valid = all(any(inputs[i][k] == v for i in honest) for k, v in decs[0].items())
            unanimous = decs[0][0] == 0 and decs[0][1] == 1
            batched = all(replay_unbatched(run.nodes[i].batch.trace, i, n, f, seed) == run.decisions[i]
                          for i in honest)
            good += agree and valid and unanimous and batched
        summary.append(f"({n},{f}) {good}/500")
        ok = ok and good == 500
    assert report(8, ok, "agreement, validity, unanimous-input and batched==unbatched: " + ", ".join(summary))


# 9 ---------------------------------------------------------------------------


def test_c9_crypto_suite(report):
    tg = GroupParams.named("test", 9)
    rng = random.Random(9)
    q = tg.order

    def rand_commit(vec):
        o = Opening(tuple(vec), tuple(rng.randrange(q) for _ in vec))
        return commit(o.message, o.randomizers, tg), o

    homo = 0
    for _ in range(1000):
        a = [rng.randrange(3) for _ in range(3)]
        b = [rng.randrange(3) for _ in range(3)]
        (ca, oa), (cb, ob) = rand_commit(a), rand_commit(b)
        homo += open_and_decode(combine(ca, cb, tg), combine_openings(oa, ob, tg), tg) == tuple(
            x + y for x, y in zip(a, b))

    dealer = KeyPair.from_seed(bytes(range(32)))
    subsets = subsets_ok = 0
    for k, n in [(3, 4), (2, 3)]:
        secret = bytes(rng.randrange(256) for _ in range(8))
        shares = share_secret(secret, k, n, dealer, b"acc", rng)
        for sub in itertools.combinations(shares, k):
            subsets += 1
            subsets_ok += reconstruct(sub, k, dealer.public, b"acc") == secret
        for sub in itertools.combinations(shares, k - 1):
            with pytest.raises(InsufficientShares):
                reconstruct(sub, k, dealer.public)

    complete = rejected = 0
    bad_witnesses = [(2, 0, 0), (1, 1, 0), (0, 0, 0), (1, 0, 2), (0, 2, 0)]
    for trial in range(1000):
        c, o = rand_commit(unit_vector(rng.randrange(3), 3))
        fm, st = prove_first_move(c, o, tg, rng)
        complete += verify_proof(c, finish_proof(fm, st, rng.randrange(q), tg), tg)
        c, o = rand_commit(bad_witnesses[trial % len(bad_witnesses)])
        fm, st = prove_first_move(c, o, tg, rng)
        rejected += not verify_proof(c, finish_proof(fm, st, rng.randrange(q), tg), tg)

    pairs = [rand_commit(unit_vector(0, 3)) for _ in range(3)] + [rand_commit(unit_vector(2, 3)) for _ in range(5)]
    total_o = pairs[0][1]
    for _, o in pairs[1:]:
        total_o = combine_openings(total_o, o, tg)
    fixture = open_and_decode(fold([c for c, _ in pairs], 3, tg), total_o, tg)

    ok = homo == 1000 and subsets_ok == subsets == 7 and complete == 1000 and rejected == 1000 and fixture == (3, 0, 5)
    assert report(9, ok, f"homomorphism {homo}/1000, k-subsets {subsets_ok}/{subsets}, ZK complete {complete}/1000, "
                         f"invalid rejected {rejected}/1000, fixture {fixture}")


# 10 --------------------------------------------------------------------------


def test_c10_bench_throughput(tmp_path, report):
    rates = {}
    for m in (2, 10):
        d = tmp_path / f"m{m}"
        save_bundle(setup(ElectionParams(n=300, m=m, group="test", seed=10, t_end=4000)), str(d))
        rates[m] = bench_bundle(str(d), repeats=3)["votes_per_s"]
    ratio = max(rates.values()) / min(rates.values())
    ok = min(rates.values()) >= 1000 and ratio < 2
    assert report(10, ok, f"votes/s m=2 {rates[2]:.0f}, m=10 {rates[10]:.0f} (>= 1000), ratio {ratio:.2f} (< 2)")
