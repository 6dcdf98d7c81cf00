import numpy as np
import pytest

from votebins.adversaries import (STRATEGIES, AuthorityTamper, Strategy, build_strategy,
                                  strategy_authority_tamper, strategy_invalid_ballots,
                                  strategy_multi_vote, strategy_negative_vote,
                                  strategy_refuse_broadcast)
from votebins.channels import authority, voter
from votebins.oracles import oracle_empty_bin_probability
from votebins.protocols import (ElectionParams, output_consistent, vote_authorities,
                                vote_authorities_robust, vote_basic)


class FixedBin(Strategy):
    """A valid vote for a chosen bin in every repetition."""

    def __init__(self, cell):
        self.cell = cell

    def cast_grids(self, ctx, grids, **info):
        out = np.zeros_like(grids)
        out[(slice(None),) + self.cell] = 1
        return out


def _rate(hits, trials, p, k=3.0):
    return abs(hits / trials - p) <= k * (p * (1 - p) / trials) ** 0.5


def test_negative_vote_pattern():
    strat = strategy_negative_vote((0, 0), (0, 1))
    out = vote_basic(ElectionParams(4, 1, 0, 1), [0] * 4, {voter(0): strat})
    cast = out.details["cast"][voter(0)][0]
    assert cast.tolist() == [[8, 2, 0, 0]]
    assert cast.sum() % 9 == 1
    with pytest.raises(ValueError):
        strategy_negative_vote((0, 0), (0, 0))


def test_negative_vote_single_repetition_rate():
    # honest voters all back candidate 0; -1 lands in (0, 0): caught iff empty
    trials, hits = 4000, 0
    for seed in range(trials):
        out = vote_basic(ElectionParams(4, 2, 0, 1), [0] * 4,
                         {voter(0): strategy_negative_vote((0, 0), (1, 0))}, seed=seed)
        hits += not out.succeeded
    p = float(oracle_empty_bin_probability(4))
    assert p > 1 / 3
    assert _rate(hits, trials, p)


def test_negative_vote_against_colluder_bin_is_undetected():
    strategies = {voter(0): strategy_negative_vote((0, 2), (1, 0)), voter(1): FixedBin((0, 2))}
    for seed in range(200):
        out = vote_basic(ElectionParams(4, 2, 0, 3), [0, 0, 1, 0], strategies, seed=seed)
        assert out.succeeded
        assert output_consistent(out, [0, 0, 1, 0], corrupt_voters=[0, 1])


def test_multi_vote():
    out = vote_basic(ElectionParams(3, 2, 0, 2), [0, 1, 1], {voter(0): strategy_multi_vote(1)})
    assert out.phase == "sum-inconsistency"
    honest = vote_basic(ElectionParams(3, 2, 0, 2), [0, 1, 1], seed=4)
    same = vote_basic(ElectionParams(3, 2, 0, 2), [0, 1, 1],
                      {voter(0): strategy_multi_vote(0)}, seed=4)
    assert same.succeeded and same.tally == honest.tally


def test_multi_vote_offset_by_colluder_only_caught_by_negative_bin():
    strategies = {voter(0): strategy_multi_vote(1, bins=[(1, 1)]),
                  voter(1): strategy_negative_vote((0, 0), (1, 2), extra=1)}
    phases = set()
    for seed in range(400):
        out = vote_basic(ElectionParams(4, 2, 0, 1), [1, 0, 0, 0], strategies, seed=seed)
        phases.add(out.phase)
        if out.succeeded:
            assert sum(out.tally) == 4
    assert phases == {None, "sum-inconsistency"}


def test_invalid_ballots_exact_cases():
    p = ElectionParams(3, 2, 2, 2)
    trials, hits = 2000, 0
    for seed in range(trials):
        out = vote_authorities_robust(p, [0, 1, 1], {voter(0): strategy_invalid_ballots(1)},
                                      seed=seed)
        hits += sum(1 for who, _ in out.details["opening_rejects"] if who == 0)
    assert _rate(hits, 2 * trials, 0.5)
    for seed in range(100):
        out = vote_authorities_robust(p, [0, 1, 1], {voter(0): strategy_invalid_ballots(4)},
                                      seed=seed)
        assert (0, 0) in out.details["opening_rejects"]
        assert out.revocations[0] and out.succeeded


@pytest.mark.parametrize("s", [2, 3])
def test_valid_but_different_candidates_revoked(s):
    p = ElectionParams(3, 2, 2, s)
    cands = [k % 2 for k in range(s)]
    trials, revoked = 600, 0
    for seed in range(trials):
        out = vote_authorities_robust(p, [0, 1, 1],
                                      {voter(0): strategy_invalid_ballots(0, candidates=cands)},
                                      seed=seed)
        # escaping every equality test lets the mismatched tallies abort the run
        assert out.succeeded or out.phase == "repetition-mismatch"
        revoked += out.revocations[0]
    bound = 1 - 2 ** -s
    assert revoked / trials >= bound - 3 * (bound * (1 - bound) / trials) ** 0.5


def test_authority_balanced_tamper_caught_often():
    s, trials, aborts = 4, 1500, 0
    tamper = strategy_authority_tamper({"pre-sum": {(0, 0): 1, (0, 1): -1}})
    for seed in range(trials):
        out = vote_authorities(ElectionParams(4, 2, 2, s), [0, 0, 1, 1],
                               {authority(0): tamper}, seed=seed)
        aborts += not out.succeeded
    bound = 1 - (2 / 3) ** s
    assert aborts / trials >= bound - 3 * (bound * (1 - bound) / trials) ** 0.5


def test_refuse_broadcast_cases():
    out = vote_authorities(ElectionParams(3, 2, 2), [0, 1, 1],
                           {authority(1): strategy_refuse_broadcast("tally")})
    assert out.phase == "tally:refusal"
    out = vote_authorities_robust(ElectionParams(3, 2, 2, 2), [0, 1, 1],
                                  {voter(0): strategy_refuse_broadcast("shifts")})
    assert out.succeeded and out.revocations[0]
    quiet = vote_authorities(ElectionParams(3, 2, 2), [0, 1, 1],
                             {authority(1): strategy_refuse_broadcast("never")}, seed=2)
    honest = vote_authorities(ElectionParams(3, 2, 2), [0, 1, 1], seed=2)
    assert quiet.succeeded and quiet.tally == honest.tally


def test_registry_and_builder():
    assert set(STRATEGIES) >= {"negative_vote", "multi_vote", "invalid_ballots",
                               "authority_tamper", "refuse_broadcast", "malformed_shifts",
                               "commit_mismatch", "honest"}
    t = build_strategy("authority_tamper", {"delta_map": {"pre-sum": {"0,1": 2}}})
    assert isinstance(t, AuthorityTamper) and t.delta_map == {"pre-sum": {(0, 1): 2}}
    again = build_strategy("authority_tamper", t.params())
    assert again.delta_map == t.delta_map
    with pytest.raises(ValueError):
        build_strategy("bribe")
    with pytest.raises(ValueError):
        build_strategy("authority_tamper", {"delta_map": {"post-tally": {}}})
    with pytest.raises(ValueError):
        build_strategy("invalid_ballots", {"kind": "sideways"})


def test_strategies_see_only_their_context():
    seen = []

    class Spy(Strategy):
        def cast_grids(self, ctx, grids, **info):
            seen.append(sorted(vars(ctx)))
            return grids

    vote_basic(ElectionParams(3, 2), [0, 1, 1], {voter(2): Spy()})
    assert seen == [sorted(["party", "protocol", "n", "r", "s", "vote", "view", "rng"])]
