"""Throughput of the in-simulator vote-collection path.

Every ballot of the bundle is cast once, ``concurrency`` voters starting per
tick, with the end-of-election phase switched off.  Each repeat reloads the
bundle from disk and clears the signature cache, so nothing verified in one
repeat is remembered by the next.  Only ``run_election`` is timed.
"""

from __future__ import annotations

import statistics
import time

from ddemos.crypto.signatures import clear_caches
from ddemos.ea import load_bundle
from ddemos.scenario import Scenario, run_election
from ddemos.voter import VoterIntent


def bench_intents(n: int, m: int, concurrency: int = 4) -> list[VoterIntent]:
    return [VoterIntent(s, "AB"[s % 2], s % m, (s - 1) // concurrency) for s in range(1, n + 1)]


def bench_bundle(bundle_dir: str, repeats: int = 3, concurrency: int = 4, seed: int = 0) -> dict:
    rates, runs = [], []
    for r in range(repeats):
        bundle = load_bundle(bundle_dir)
        p = bundle.params
        scenario = Scenario(intents=bench_intents(p.n, p.m, concurrency), voting_only=True,
                            log_events=False, t_end=10 * p.n + 1000)
        clear_caches()
        t0 = time.perf_counter()
        run = run_election(bundle, scenario, seed=seed + r)
        wall = time.perf_counter() - t0
        votes = len(run.receipts)
        rates.append(votes / wall)
        runs.append({"votes": votes, "wall_s": round(wall, 4), "votes_per_s": round(votes / wall, 1),
                     "events": run.transcript.metrics["delivered"]})
    return {"n": p.n, "m": p.m, "n_v": p.n_v, "group": p.group, "repeats": repeats,
            "votes_per_s": round(statistics.median(rates), 1),
            "min_votes_per_s": round(min(rates), 1), "runs": runs}


__all__ = ["bench_bundle", "bench_intents"]
