import dataclasses
from fractions import Fraction

import pytest

from ddemos.auditor import DelegatedAudit, audit, voter_check
from ddemos.bb import BBTranscript
from ddemos.crypto.commitments import Opening
from ddemos.ea import ElectionParams, setup
from ddemos.messages import VoteReply
from ddemos.scenario import Scenario, intents_from_counts, run_election
from ddemos.voter import VoterNode, VoterSession, compute_t_wait

from helpers import FakeCtx


@pytest.mark.parametrize("args,expected", [((4, 1, 2, 5), 66), ((4, 0, 0, 0), 0), ((7, 1, 1, 1), 36)])
def test_compute_t_wait(args, expected):
    assert compute_t_wait(*args) == expected


def test_compute_t_wait_rejects_negative():
    with pytest.raises(ValueError):
        compute_t_wait(4, -1, 0, 0)


def test_two_failures_bound_formula():
    # f_v=2 of N_v=7 silent: fail first pick, then fail again among the remaining 6
    p = Fraction(2, 7) * Fraction(1, 6)
    assert p == Fraction(1, 21) and p < Fraction(1, 9)


@pytest.fixture(scope="module")
def bundle():
    return setup(ElectionParams(n=8, m=3, group="test", seed=1, t_end=300))


@pytest.fixture(scope="module")
def honest_run(bundle):
    return run_election(bundle, Scenario(intents=intents_from_counts([3, 0, 5], "AB")), seed=1)


# --- voter ----------------------------------------------------------------------


def test_honest_voters_get_printed_receipts_first_try(honest_run):
    for s in honest_run.sessions:
        assert s.outcome == "receipt" and s.receipt == s.expected_receipt
        assert len(s.attempts) == 1 and s.failed_attempts == 0


def test_silent_first_vc_then_receipt(bundle):
    seen = 0
    for seed in range(6):
        run = run_election(bundle, Scenario(intents=intents_from_counts([3, 0, 5], "AB"), policy="silent-vc"),
                           seed=seed)
        for s in run.sessions:
            assert s.outcome == "receipt"
            if s.attempts[0][0] in [f"vc{i}" for i in run.corrupt_vc]:
                seen += 1
                assert s.failed_attempts == 1 and len(s.attempts) == 2
                assert s.attempts[1][1] - s.attempts[0][1] == s.patience
                assert s.blacklist == [s.attempts[0][0]]
    assert seen > 0


def _voter(bundle, vcs=("vc1", "vc2")):
    s = VoterSession(bundle.ballot(2), "B", 1, patience=10)
    return VoterNode(s, list(vcs), start=0, seed=3), s


def test_voter_rejects_wrong_receipt_and_resubmits_same_code(bundle):
    node, s = _voter(bundle)
    ctx = FakeCtx()
    node.on_timer(ctx, ("begin",))
    (dst, vote), = ctx.outbox
    node.on_message(FakeCtx(), dst, VoteReply(2, s.code, b"\x00" * 8))
    node.on_message(FakeCtx(), dst, VoteReply(2, s.code, None, "ballot already used"))
    assert s.outcome == "pending"
    ctx2 = FakeCtx(local=10)
    node.on_timer(ctx2, ("timeout", 1))
    (dst2, vote2), = ctx2.outbox
    assert vote2 == vote and dst2 != dst and s.blacklist == [dst]
    ctx3 = FakeCtx(local=12)
    node.on_message(ctx3, dst2, VoteReply(2, s.code, s.expected_receipt))
    assert s.outcome == "receipt" and ctx3.cancelled == [("timeout", 2)]


def test_voter_exhausted_when_all_blacklisted(bundle):
    node, s = _voter(bundle)
    node.on_timer(FakeCtx(), ("begin",))
    node.on_timer(FakeCtx(local=10), ("timeout", 1))
    node.on_timer(FakeCtx(local=20), ("timeout", 2))
    assert s.outcome == "exhausted" and sorted(s.blacklist) == ["vc1", "vc2"]
    # a stale timeout changes nothing
    node.on_timer(FakeCtx(local=30), ("timeout", 1))
    assert len(s.blacklist) == 2


# --- auditor --------------------------------------------------------------------


def _copy(t):
    return BBTranscript.from_dict(t.to_dict())


def test_honest_audit_passes(honest_run):
    t = honest_run.published()
    rep = audit(t, honest_run.delegated())
    assert rep.ok and rep.entries == []
    assert set(rep.checked) == set("abcdefg")
    for s in honest_run.sessions:
        assert voter_check(t, s.ballot.serial, s.code)


def test_transcript_round_trip(honest_run):
    t = honest_run.published()
    assert _copy(t).digest() == t.digest()


def test_incomplete_transcript(bundle):
    rep = audit(BBTranscript(bundle.bb_init))
    assert rep.status == "incomplete" and not rep.ok


def test_bad_opening_flags_d(honest_run):
    t = _copy(honest_run.published())
    key = sorted(t.openings)[0]
    o = t.openings[key][0]
    t.openings[key] = (Opening(o.message, (o.randomizers[0] + 1,) + o.randomizers[1:]),) + t.openings[key][1:]
    assert [e["check"] for e in audit(t).entries] == ["d"]


def test_bad_proof_flags_e(honest_run):
    t = _copy(honest_run.published())
    key = sorted(t.proofs)[0]
    pr = t.proofs[key][0]
    bad = dataclasses.replace(pr, responses=(pr.responses[0] + 1,) + pr.responses[1:])
    t.proofs[key] = (bad,) + t.proofs[key][1:]
    assert [e["check"] for e in audit(t).entries] == ["e"]


def test_wrong_tally_flags_d(honest_run):
    t = _copy(honest_run.published())
    t.tally = (4, 0, 4)
    assert any(e["check"] == "d" and e["serial"] is None for e in audit(t).entries)


def test_duplicate_code_flags_a(honest_run):
    t = _copy(honest_run.published())
    codes = dict(t.codes[1])
    codes["B"] = (codes["A"][0],) + codes["B"][1:]
    t.codes = {**t.codes, 1: codes}
    checks = {e["check"] for e in audit(t).entries}
    assert "a" in checks


def test_both_parts_and_double_code_flag_c_and_b(bundle, honest_run):
    t = _copy(honest_run.published())
    b1, b2 = bundle.ballot(1), bundle.ballot(2)
    extra = ((1, b1.parts["A" if honest_run.sessions[0].part == "B" else "B"][0].code),)
    part2 = honest_run.sessions[1].part
    other = next(ln.code for ln in b2.parts[part2] if ln.code != honest_run.sessions[1].code)
    t.vote_set = tuple(sorted(t.vote_set + extra + ((2, other),)))
    checks = {(e["check"], e["serial"]) for e in audit(t).entries}
    assert ("c", 1) in checks and ("b", 2) in checks


def test_missing_cast_code_and_ucert_flag_f(honest_run):
    t = _copy(honest_run.published())
    t.ucerts = t.ucerts[:-1]
    rep = audit(t, [DelegatedAudit(3, b"\x01" * 20, "A", ())])
    assert {(e["check"], e["serial"]) for e in rep.entries} >= {("f", None), ("f", 3)}


def _attack_run(part, serials, seed=0, voted_part="B"):
    b = setup(ElectionParams(n=4, m=2, group="test", seed=seed, t_end=300),
              {"kind": "modify", "serials": serials, "part": part, "swap": [0, 1]})
    intents = [dict(serial=s, part=voted_part, option=0) for s in range(1, 5)]
    return run_election(b, Scenario(intents=intents), seed=seed)


def test_modification_detected_when_audited_part():
    run = _attack_run("A", [2])  # voters use B, so part A is the audited one
    rep = audit(run.published(), run.delegated())
    assert [(e["check"], e["serial"]) for e in rep.entries] == [("g", 2), ("g", 2)]


def test_modification_of_voted_part_escapes_audit():
    run = _attack_run("B", [2])
    assert audit(run.published(), run.delegated()).ok
    assert run.tally == (3, 1)  # the tampered ballot counts for the swapped option


def test_clash_flags_g(bundle, honest_run):
    t = honest_run.published()
    d = honest_run.delegated()
    twin = dataclasses.replace(d[0])
    rep = audit(t, d + [twin])
    assert ("g", d[0].serial) in {(e["check"], e["serial"]) for e in rep.entries}


def test_delegated_audit_round_trip(honest_run):
    for d in honest_run.delegated():
        assert DelegatedAudit.from_dict(d.to_dict()) == d
