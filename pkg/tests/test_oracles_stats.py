from fractions import Fraction
from itertools import product

import pytest
from hypothesis import given, strategies as st

from votebins.oracles import (EMPTY_BIN_BOUND, complexity_prediction, negative_vote_detection,
                              open_catch_brute_force, oracle_empty_bin_probability,
                              oracle_open_catch_probability)
from votebins.sharing import ceil_log2
from votebins.stats import binomial_check, chi_square_uniform, wilson_interval


def test_empty_bin_values():
    assert oracle_empty_bin_probability(2) == Fraction(1, 2)
    assert oracle_empty_bin_probability(3) == Fraction(4, 9)
    assert all(oracle_empty_bin_probability(n) > EMPTY_BIN_BOUND for n in range(2, 51))
    with pytest.raises(ValueError):
        oracle_empty_bin_probability(1)


def test_empty_bin_matches_enumeration():
    for n in range(2, 7):
        empty = sum(1 for bins in product(range(n), repeat=n - 1) if 0 not in bins)
        assert Fraction(empty, n ** (n - 1)) == oracle_empty_bin_probability(n)


def test_open_catch_values():
    assert oracle_open_catch_probability(2, 1) == Fraction(1, 2)
    assert oracle_open_catch_probability(3, 0) == 1
    assert oracle_open_catch_probability(3, 4) == 0
    with pytest.raises(ValueError):
        oracle_open_catch_probability(2, 5)


def test_open_catch_closed_form_equals_enumeration():
    for s in range(1, 6):
        for x in range(0, 2 * s + 1):
            assert oracle_open_catch_probability(s, x) == open_catch_brute_force(s, x)


@given(st.integers(1, 30).flatmap(lambda s: st.tuples(st.just(s), st.integers(1, s))))
def test_open_survival_at_most_half(args):
    s, x = args
    assert oracle_open_catch_probability(s, x) <= Fraction(1, 2)


def test_negative_vote_oracle_reduces_to_empty_bin():
    # honest voters share the target's candidate; extra lands elsewhere
    for n in (2, 3, 4, 5):
        q = negative_vote_detection(n, 2, [0] * (n - 1), (0, 0), (1, 0))
        assert q == oracle_empty_bin_probability(n)


def test_negative_vote_oracle_extra_in_same_row():
    # +2 in bin 1 only overflows for tiny n; for n=4 detection is still the empty rate
    q = negative_vote_detection(4, 1, [0, 0, 0], (0, 0), (0, 1))
    assert q == oracle_empty_bin_probability(4)


def test_complexity_prediction_examples():
    p1 = complexity_prediction(1, 3, 2, 0, 1)
    assert p1["private"]["ballots"] == (2, 18)
    p3 = complexity_prediction(3, 3, 2, 2, 2)
    assert p3["broadcast_events"] == 2 * 2 * 3 * 2 + 4
    assert p3["broadcast"]["select-random"] == (1, 6)
    with pytest.raises(ValueError):
        complexity_prediction(4, 3, 2, 2, 2)


@given(st.integers(1, 10 ** 40))
def test_independent_log_matches_library(x):
    from votebins.oracles import _log2_ceil
    assert _log2_ceil(x) == ceil_log2(x)


def test_wilson_interval_contains_estimate():
    lo, hi = wilson_interval(30, 100)
    assert lo < 0.3 < hi
    assert wilson_interval(0, 10)[0] == pytest.approx(0.0, abs=1e-12)
    assert wilson_interval(10, 10)[1] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        wilson_interval(11, 10)


def test_binomial_check_relations():
    assert binomial_check(50, 100, Fraction(1, 2)).passed
    assert not binomial_check(80, 100, Fraction(1, 2)).passed
    assert binomial_check(80, 100, Fraction(1, 2), relation="at_least").passed
    assert not binomial_check(80, 100, Fraction(1, 2), relation="at_most").passed
    assert binomial_check(100, 100, 1).passed
    assert not binomial_check(99, 100, 1).passed


def test_chi_square_detects_skew():
    assert chi_square_uniform([100] * 10).passed
    assert not chi_square_uniform([200] + [100] * 9).passed
    with pytest.raises(ValueError):
        chi_square_uniform([5])
