import pytest

from ddemos.ea import ElectionParams, setup
from ddemos.messages import UCert
from ddemos.scenario import Scenario, intents_from_counts, run_election


@pytest.fixture(scope="module")
def bundle():
    return setup(ElectionParams(n=6, m=2, group="test", seed=4, t_end=200))


def _intents():
    return intents_from_counts([3, 3], "AB")


def _valid_ucerts(run):
    vp = run.params
    found = []
    for vc in run.vcs.values():
        for u in getattr(vc, "formed", []):
            found.append(u)
        for rec in getattr(vc, "records", {}).values():
            if isinstance(rec.ucert, UCert):
                found.append(rec.ucert)
    return [u for u in found if u.valid(run.vcs["vc1"].vc_publics, vp.n_v - vp.f_v)]


@pytest.mark.parametrize("policy", ["equivocating-vc", "share-withholder", "garbage-bb", "recover-liar",
                                    "silent-vc", "delay-maximizer"])
def test_policy_runs_keep_safety(bundle, policy):
    for seed in range(3):
        run = run_election(bundle, Scenario(intents=_intents(), policy=policy), seed=seed)
        sets = set(run.vote_sets.values())
        assert len(sets) == 1
        (vs,) = sets
        for (serial, code) in run.receipts:
            assert (serial, code) in vs
        t = run.published()
        assert t.vote_set == vs and t.tally == run.intended_tally(vs)


def test_equivocator_never_gets_two_ucerts(bundle):
    for seed in range(10):
        run = run_election(bundle, Scenario(intents=_intents(), policy="equivocating-vc"), seed=seed)
        per_serial = {}
        for u in _valid_ucerts(run):
            per_serial.setdefault(u.serial, set()).add(u.code)
        assert all(len(codes) == 1 for codes in per_serial.values())


def test_share_withholders_below_quorum_block_receipts(bundle):
    run = run_election(bundle, Scenario(intents=_intents(), policy="share-withholder", corrupt_vc=[3, 4],
                                        voting_only=True, t_end=150), seed=1, unsound=True)
    assert run.receipts == {}
    assert all(s.outcome != "receipt" for s in run.sessions)


def test_recover_liar_responses_discarded(bundle):
    discarded = 0
    for seed in range(4):
        run = run_election(bundle, Scenario(intents=_intents()[:3], policy="recover-liar"), seed=seed)
        for vc in run.honest_vcs:
            discarded += vc.metrics["recover_discarded"] + vc.metrics["bad_ucerts"]
            for serial, code in vc.vote_set:
                assert vc.records[serial].ucert.valid(vc.vc_publics, vc.quorum)
        (vs,) = set(run.vote_sets.values())
        assert {s for s, _ in vs} <= {1, 2, 3}
    assert discarded > 0
