from collections import Counter
from itertools import product

import numpy as np
import pytest
from hypothesis import given, strategies as st

from votebins.ballots import (BallotSpec, SharedBinGrid, ShiftPair, ballot_grid,
                              is_sum_consistent, make_ballot, shift_spec, sum_ballots, tally,
                              unshift_many, unshift_shares, valid_ballot_mask,
                              validate_opened_ballot)

PARTIES = ("A0", "A1", "A2")


def test_smallest_ballot():
    b = make_ballot(PARTIES, 1, 1, BallotSpec(0, 0), np.random.default_rng(0))
    assert b.reconstruct().tolist() == [[1]]


def test_ballot_instance():
    b = make_ballot(PARTIES, 3, 2, BallotSpec(1, 2), np.random.default_rng(0))
    assert b.reconstruct().tolist() == [[0, 0, 0], [0, 0, 1]]


def test_every_spec_reconstructs_single_vote():
    rng = np.random.default_rng(1)
    for c, o in product(range(2), range(3)):
        g = make_ballot(PARTIES, 3, 2, BallotSpec(c, o), rng).reconstruct()
        assert g.sum() == 1 and g[c, o] == 1
        assert validate_opened_ballot(g)


def test_out_of_range_spec_rejected():
    with pytest.raises(ValueError):
        make_ballot(PARTIES, 3, 2, BallotSpec(2, 0), np.random.default_rng(0))
    with pytest.raises(ValueError):
        make_ballot(PARTIES, 3, 2, BallotSpec(0, 3), np.random.default_rng(0))


def test_shared_grid_cell_is_ads():
    b = make_ballot(PARTIES, 3, 2, BallotSpec(1, 2), np.random.default_rng(2))
    assert b.ads(1, 2).secret() == 1
    assert b.ads(0, 0).secret() == 0
    assert b.ads(0, 0).modulus == 7


def test_sum_ballots_examples():
    rng = np.random.default_rng(3)
    one = make_ballot(PARTIES, 2, 1, BallotSpec(0, 0), rng)
    assert np.array_equal(sum_ballots([one]).shares, one.shares)
    two = sum_ballots([one, make_ballot(PARTIES, 2, 1, BallotSpec(0, 0), rng)])
    assert two.reconstruct()[0, 0] == 2


def test_sum_of_random_ballots_matches_histogram():
    rng = np.random.default_rng(4)
    for _ in range(1000):
        votes = rng.integers(3, size=5)
        ballots = [make_ballot(PARTIES, 5, 3, BallotSpec(int(v), int(rng.integers(5))), rng)
                   for v in votes]
        grid = sum_ballots(ballots).reconstruct()
        assert is_sum_consistent(grid, 5)
        counts = Counter(votes.tolist())
        assert tally(grid) == tuple(counts.get(c, 0) for c in range(3))


def test_sum_ballots_rejects_dimension_mismatch():
    rng = np.random.default_rng(5)
    a = make_ballot(PARTIES, 3, 2, BallotSpec(0, 0), rng)
    b = make_ballot(PARTIES, 3, 1, BallotSpec(0, 0), rng)
    with pytest.raises(ValueError):
        sum_ballots([a, b])
    with pytest.raises(ValueError):
        sum_ballots([])


def test_shared_grid_shape_checked():
    with pytest.raises(ValueError):
        SharedBinGrid(PARTIES, 7, np.zeros((2, 2, 3), dtype=np.int64))


def test_sum_consistency_examples():
    assert is_sum_consistent(np.array([[1, 0], [0, 1]]), 2)
    n = 2
    assert not is_sum_consistent(np.array([[2 * n, 0], [2, 1]]) % (2 * n + 1), 2)
    assert not is_sum_consistent(np.array([[1, 1], [1, 0]]), 2)


def test_sum_consistency_exhaustive_r2_n2():
    n, m = 2, 5
    for cells in product(range(m), repeat=4):
        grid = np.array(cells).reshape(2, 2)
        for total in range(0, 5):
            expected = all(v <= n for v in cells) and sum(cells) == total
            assert is_sum_consistent(grid, total) == expected


def test_tally_examples():
    assert tally(np.array([[1, 1], [0, 0]])) == (2, 0)
    assert tally(np.zeros((3, 4), dtype=int)) == (0, 0, 0)


def test_shift_spec_examples():
    assert shift_spec(BallotSpec(1, 2), ShiftPair(0, 0), 2, 3) == BallotSpec(1, 2)
    assert shift_spec(BallotSpec(1, 2), ShiftPair(1, 2), 2, 3) == BallotSpec(0, 1)


def test_shift_round_trip_exhaustive():
    r, n = 2, 3
    for c, o, dc, do in product(range(r), range(n), range(r), range(n)):
        spec = BallotSpec(c, o)
        fwd = shift_spec(spec, ShiftPair(dc, do), r, n)
        back = shift_spec(fwd, ShiftPair((-dc) % r, (-do) % n), r, n)
        assert back == spec


def test_unshift_decrypts_every_spec_and_shift():
    rng = np.random.default_rng(6)
    r, n = 2, 3
    for c, o, dc, do in product(range(r), range(n), range(r), range(n)):
        shift = ShiftPair(dc, do)
        enc = make_ballot(PARTIES, n, r, shift_spec(BallotSpec(c, o), shift, r, n), rng)
        dec = np.stack([unshift_shares(enc.share_matrix(p), shift) for p in PARTIES])
        assert np.array_equal(dec.sum(axis=0) % 7, ballot_grid(r, n, BallotSpec(c, o)))


def test_unshift_identity_and_multiset():
    mat = np.arange(12).reshape(3, 4)
    assert np.array_equal(unshift_shares(mat, ShiftPair(0, 0)), mat)
    moved = unshift_shares(mat, ShiftPair(2, 1))
    assert sorted(moved.ravel()) == sorted(mat.ravel())


@given(st.integers(1, 4), st.integers(1, 5), st.integers(1, 6), st.integers(0, 2 ** 32))
def test_unshift_many_matches_single(r, n, batch, seed):
    rng = np.random.default_rng(seed)
    shares = rng.integers(0, 50, size=(2, batch, r, n))
    cs, bs = rng.integers(r, size=batch), rng.integers(n, size=batch)
    got = unshift_many(shares, cs, bs)
    for p in range(2):
        for b in range(batch):
            want = unshift_shares(shares[p, b], ShiftPair(int(cs[b]), int(bs[b])))
            assert np.array_equal(got[p, b], want)


def test_shift_pair_code_round_trip():
    for dc, do in product(range(3), range(4)):
        sp = ShiftPair(dc, do)
        assert ShiftPair.decode(sp.encode(4), 4) == sp
        assert 0 <= sp.encode(4) < 12


def test_validate_opened_examples():
    assert not validate_opened_ballot(np.zeros((2, 2), dtype=int))
    g = np.zeros((2, 3), dtype=int)
    g[0, 0] = g[1, 1] = 1
    assert not validate_opened_ballot(g)
    g = np.zeros((2, 3), dtype=int)
    g[0, 2] = 2
    assert not validate_opened_ballot(g)


def test_valid_mask_matches_scalar_check():
    rng = np.random.default_rng(7)
    grids = rng.integers(0, 3, size=(200, 2, 2)) * (rng.random((200, 2, 2)) < 0.3)
    mask = valid_ballot_mask(grids)
    assert mask.tolist() == [validate_opened_ballot(g) for g in grids]
    assert mask.any() and not mask.all()
