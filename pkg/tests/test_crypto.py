import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from ddemos.crypto.commitments import (
    CommitmentError, DecodingOverflow, InvalidOpening, Opening, combine, combine_openings,
    commit, fold, is_unit_vector, open_and_decode, unit_vector, verify_opening, zero_vector,
)
from ddemos.crypto.groups import TEST_P, TEST_Q, GroupParams
from ddemos.crypto.proofs import (
    IncompleteProof, combine_response_shares, derive_challenge, evaluate_responses,
    assemble, finish_proof, prove_first_move, share_prover_state, verify_proof,
)
from ddemos.crypto.sharing import (
    BYTES_FIELD, InsufficientShares, Share, interpolate_at, interpolate_at_zero, reconstruct,
    reconstruct_opening, share_opening, share_secret, split_scalar, sum_opening_shares,
)
from ddemos.crypto.signatures import KeyPair, sign, verify_sig
from ddemos.crypto.symmetric import dec_vote_code, enc_vote_code, hash_commit


def _rand_opening(vec, q, rng):
    return Opening(tuple(vec), tuple(rng.randrange(q) for _ in vec))


def _commit(vec, params, rng):
    o = _rand_opening(vec, params.order, rng)
    return commit(o.message, o.randomizers, params), o


# --- groups -----------------------------------------------------------------


def test_test_group_is_safe_prime_subgroup(tg):
    grp = tg.group
    assert TEST_P == 2 * TEST_Q + 1
    assert all(pow(a, TEST_Q - 1, TEST_Q) == 1 for a in (2, 3, 5, 7))  # Fermat screen on q
    for x in (grp.g, grp.h):
        assert x != 1 and pow(x, TEST_Q, TEST_P) == 1
    assert grp.g != grp.h


def test_secp_group_generators(ecg):
    grp = ecg.group
    assert grp.g != grp.h
    assert grp.exp(grp.g, grp.order) == grp.identity
    assert grp.op(grp.gexp(3), grp.gexp(4)) == grp.gexp(7)
    assert grp.decode(grp.encode(grp.hexp(11))) == grp.hexp(11)


# --- commitments ------------------------------------------------------------


@pytest.mark.parametrize("params_name", ["tg", "ecg"])
def test_commit_open_unit_vector(params_name, request, rng):
    params = request.getfixturevalue(params_name)
    c, o = _commit(unit_vector(1, 3), params, rng)
    assert open_and_decode(c, o, params) == (0, 1, 0)


def test_zero_commitment_is_identity(tg):
    c = commit(zero_vector(3), (0, 0, 0), tg)
    one = tg.group.identity
    assert c.ciphertexts == ((one, one),) * 3


def test_arity_mismatch_rejected(tg):
    with pytest.raises(CommitmentError):
        commit((1, 0), (1, 2, 3), tg)
    c2 = commit((1, 0), (1, 2), tg)
    c3 = commit((1, 0, 0), (1, 2, 3), tg)
    with pytest.raises(CommitmentError):
        combine(c2, c3, tg)


def test_case_study_305(tg, rng):
    pairs = [_commit(unit_vector(0, 3), tg, rng) for _ in range(3)]
    pairs += [_commit(unit_vector(2, 3), tg, rng) for _ in range(5)]
    total_c = fold([c for c, _ in pairs], 3, tg)
    total_o = pairs[0][1]
    for _, o in pairs[1:]:
        total_o = combine_openings(total_o, o, tg)
    assert open_and_decode(total_c, total_o, tg) == (3, 0, 5)


def test_combine_unit_vectors_and_identity(tg, rng):
    c1, o1 = _commit(unit_vector(0, 3), tg, rng)
    c3, o3 = _commit(unit_vector(2, 3), tg, rng)
    assert open_and_decode(combine(c1, c3, tg), combine_openings(o1, o3, tg), tg) == (1, 0, 1)
    cz, oz = _commit(zero_vector(3), tg, rng)
    assert open_and_decode(combine(c1, cz, tg), combine_openings(o1, oz, tg), tg) == (1, 0, 0)


def test_decode_matches_linear_scan_oracle(tg, rng):
    # build g^5 h^r by hand and scan exponents 0..max_tally
    grp = tg.group
    r = rng.randrange(tg.order)
    c = commit((5, 0), (r, 0), tg)
    b = c.ciphertexts[0][1]
    plain = grp.op(b, grp.inv(grp.hexp(r)))
    scan = [e for e in range(tg.max_tally + 1) if pow(grp.g, e, TEST_P) == plain]
    assert scan == [5]
    assert open_and_decode(c, Opening((5, 0), (r, 0)), tg) == (5, 0)


def test_decode_overflow(tg, rng):
    c, o = _commit((10, 0), tg, rng)
    with pytest.raises(DecodingOverflow):
        open_and_decode(c, o, tg)


def test_binding_single_field_perturbation(tg, rng):
    for _ in range(50):
        c, o = _commit(unit_vector(rng.randrange(4), 4), tg, rng)
        j = rng.randrange(4)
        bad_r = list(o.randomizers)
        bad_r[j] = (bad_r[j] + 1 + rng.randrange(tg.order - 1)) % tg.order
        with pytest.raises(InvalidOpening):
            open_and_decode(c, Opening(o.message, tuple(bad_r)), tg)
        bad_m = list(o.message)
        bad_m[j] = 1 - bad_m[j]
        assert not verify_opening(c, Opening(tuple(bad_m), o.randomizers), tg)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 4), min_size=2, max_size=5), st.data())
def test_homomorphism_property(a, data):
    params = GroupParams.named("test", 9)
    b = data.draw(st.lists(st.integers(0, 4), min_size=len(a), max_size=len(a)))
    seed = data.draw(st.integers(0, 2**32))
    rng = random.Random(seed)
    ca, oa = _commit(a, params, rng)
    cb, ob = _commit(b, params, rng)
    got = open_and_decode(combine(ca, cb, params), combine_openings(oa, ob, params), params)
    assert got == tuple(x + y for x, y in zip(a, b))


def test_unit_vector_helpers():
    assert unit_vector(2, 4) == (0, 0, 1, 0)
    assert is_unit_vector((0, 1, 0)) and not is_unit_vector((1, 1, 0)) and not is_unit_vector((2, 0))


# --- sharing ----------------------------------------------------------------


def _vandermonde_secret(points, prime):
    # oracle: solve the Vandermonde system with exact fractions, then reduce
    k = len(points)
    rows = [[Fraction(x) ** e for e in range(k)] + [Fraction(y)] for x, y in points]
    for col in range(k):
        piv = next(r for r in range(col, k) if rows[r][col] != 0)
        rows[col], rows[piv] = rows[piv], rows[col]
        for r in range(k):
            if r != col and rows[r][col] != 0:
                f = rows[r][col] / rows[col][col]
                rows[r] = [a - f * b for a, b in zip(rows[r], rows[col])]
    c0 = rows[0][-1] / rows[0][0]
    return c0.numerator * pow(c0.denominator, -1, prime) % prime


def test_share_42_reconstruct_from_subset(rng):
    p = 10007
    pts = split_scalar(42, 3, 4, p, rng)
    sub = [pts[0], pts[1], pts[3]]
    assert interpolate_at_zero(sub, p) == 42
    assert _vandermonde_secret(sub, p) == 42


def test_k1_shares_equal_secret(rng):
    assert all(v == 99 for _, v in split_scalar(99, 1, 5, 10007, rng))


@pytest.mark.parametrize("k,n", [(3, 4), (2, 3)])
def test_all_k_subsets_reconstruct(k, n, dealer, rng):
    secret = bytes(rng.randrange(256) for _ in range(8))
    shares = share_secret(secret, k, n, dealer, b"ctx", rng)
    for sub in itertools.combinations(shares, k):
        assert reconstruct(sub, k, dealer.public, b"ctx") == secret
    for sub in itertools.combinations(shares, k - 1):
        with pytest.raises(InsufficientShares):
            reconstruct(sub, k, dealer.public)


def test_k_minus_1_shares_consistent_with_any_secret(rng):
    # any candidate secret is explained by some polynomial through k-1 shares
    p = 101
    pts = split_scalar(17, 3, 4, p, rng)[:2]
    for candidate in range(p):
        poly = [(0, candidate)] + pts
        assert all(interpolate_at(poly, x, p) == y for x, y in pts)
        assert interpolate_at(poly, 0, p) == candidate


def test_leading_zero_secret_round_trip(dealer, rng):
    secret = b"\x00\x00\x07"
    assert reconstruct(share_secret(secret, 2, 3, dealer, b"z", rng), 2, dealer.public) == secret


def test_tampered_share_rejected(dealer, rng):
    shares = share_secret(b"receipt!", 3, 4, dealer, b"c", rng)
    bad = Share(shares[0].index, (shares[0].value + 1) % BYTES_FIELD, shares[0].context, shares[0].signature)
    assert not bad.verify(dealer.public)
    with pytest.raises(InsufficientShares):
        reconstruct([bad, shares[1], shares[2]], 3, dealer.public)
    assert reconstruct([bad] + shares[1:], 3, dealer.public) == b"receipt!"


def test_opening_shares_reconstruct_and_sum(tg, rng):
    q = tg.order
    pairs = [_commit(unit_vector(0, 3), tg, rng) for _ in range(3)]
    pairs += [_commit(unit_vector(2, 3), tg, rng) for _ in range(5)]
    per_ballot = [share_opening(o, 2, 3, q, rng) for _, o in pairs]
    assert reconstruct_opening(per_ballot[0][1:], 2, q) == pairs[0][1]
    sums = [sum_opening_shares([sh[i] for sh in per_ballot], i + 1, 3, q) for i in range(3)]
    total_c = fold([c for c, _ in pairs], 3, tg)
    for sub in itertools.combinations(sums, 2):
        assert open_and_decode(total_c, reconstruct_opening(sub, 2, q), tg) == (3, 0, 5)
    with pytest.raises(InsufficientShares):
        reconstruct_opening(sums[:1], 2, q)


# --- proofs -----------------------------------------------------------------


def _prove(c, o, params, rng, challenge):
    fm, state = prove_first_move(c, o, params, rng)
    assert fm.phase == "first-move-only"
    return finish_proof(fm, state, challenge, params)


@pytest.mark.parametrize("params_name", ["tg", "ecg"])
def test_zk_completeness(params_name, request, rng):
    params = request.getfixturevalue(params_name)
    c, o = _commit(unit_vector(1, 3), params, rng)
    proof = _prove(c, o, params, rng, rng.randrange(params.order))
    assert verify_proof(c, proof, params)


def test_zk_wrong_challenge_rejected(tg, rng):
    c, o = _commit(unit_vector(1, 3), tg, rng)
    proof = _prove(c, o, tg, rng, 1234)
    assert not verify_proof(c, proof, tg, challenge=1235)
    moved = assemble(proof.first_move(), 1235, proof.responses)
    assert not verify_proof(c, moved, tg)


def test_first_move_only_is_incomplete(tg, rng):
    c, o = _commit(unit_vector(0, 2), tg, rng)
    fm, _ = prove_first_move(c, o, tg, rng)
    with pytest.raises(IncompleteProof):
        verify_proof(c, fm, tg)


@pytest.mark.parametrize("witness", [(2, 0, 0), (1, 1, 0), (0, 0, 0), (1, 0, 2)])
def test_invalid_witness_rejected(witness, tg, rng):
    c, o = _commit(witness, tg, rng)
    for _ in range(20):
        assert not verify_proof(c, _prove(c, o, tg, rng, rng.randrange(tg.order)), tg)


def test_trustee_shared_responses_match_prover(tg, rng):
    q = tg.order
    c, o = _commit(unit_vector(2, 4), tg, rng)
    fm, state = prove_first_move(c, o, tg, rng)
    shares = share_prover_state(state, 2, 3, q, rng)
    ch = derive_challenge([0, 1, 1], b"proof-ctx", q)
    resp_shares = [(s.index, evaluate_responses(s, ch, q)) for s in shares]
    for sub in itertools.combinations(resp_shares, 2):
        resp = combine_response_shares(sub, 2, q)
        assert resp == evaluate_responses(state, ch, q)
        assert verify_proof(c, assemble(fm, ch, resp), tg)


def test_challenge_determinism_and_sensitivity():
    q = TEST_Q
    assert derive_challenge([0, 1, 0], b"ctx", q) == derive_challenge([0, 1, 0], b"ctx", q)
    assert derive_challenge([0, 1, 0], b"ctx", q) != derive_challenge([0, 1, 1], b"ctx", q)
    assert derive_challenge([0, 1, 0], b"ctx", q) != derive_challenge([0, 1, 0], b"ctx2", q)
    empty = derive_challenge([], b"ctx", q)
    assert empty == derive_challenge([], b"ctx", q) and 0 <= empty < q


# --- symmetric, hashing, signatures -----------------------------------------


def test_vote_code_round_trip_and_fresh_iv(rng):
    code = rng.randbytes(20)  # 160 bits
    msk = rng.randbytes(16)
    ct1 = enc_vote_code(code, msk, rng.randbytes(16))
    ct2 = enc_vote_code(code, msk, rng.randbytes(16))
    assert dec_vote_code(ct1, msk) == code == dec_vote_code(ct2, msk)
    assert ct1 != ct2
    wrong = dec_vote_code(ct1, rng.randbytes(16))
    assert wrong != code


def test_hash_commit_msk(rng):
    msk, salt = rng.randbytes(16), rng.randbytes(8)
    h = hash_commit(msk, salt)
    assert h == hash_commit(msk, salt) and h.matches(msk) and not h.matches(msk[:-1] + b"x")
    with pytest.raises(ValueError):
        hash_commit(msk, b"short")


def test_signatures(rng):
    kp = KeyPair.generate(rng)
    other = KeyPair.generate(rng)
    sig = sign(kp, ("vote", 7, b"code"))
    assert verify_sig(kp.public, ("vote", 7, b"code"), sig)
    assert not verify_sig(kp.public, ("vote", 8, b"code"), sig)
    assert not verify_sig(other.public, ("vote", 7, b"code"), sig)
    assert not verify_sig(kp.public, ("vote", 7, b"code"), sig[:-1] + bytes([sig[-1] ^ 1]))
    assert not verify_sig(b"\x02" + bytes(32), b"m", sig)
    assert sign(kp, b"m") == sign(kp, b"m")  # deterministic nonces
