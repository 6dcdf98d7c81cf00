"""Exact probability and communication-cost oracles.

Everything here is computed independently of the protocol code paths:
closed forms use ``fractions.Fraction`` and brute-force twins enumerate the
sample space directly.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations, product
from math import comb
from typing import Sequence

EMPTY_BIN_BOUND = Fraction(1, 3)


def oracle_empty_bin_probability(n: int) -> Fraction:
    """Chance that a fixed bin stays empty when the other n-1 voters of the
    same candidate each pick one of n bins uniformly."""
    if n < 2:
        raise ValueError(f"needs n >= 2, got {n}")
    return Fraction(n - 1, n) ** (n - 1)


def oracle_open_catch_probability(s: int, x: int) -> Fraction:
    """Survival: chance that opening a uniform half of 2s ballots misses all
    x invalid ones.  The catch probability is ``1 - survival``."""
    if s < 1:
        raise ValueError(f"needs s >= 1, got {s}")
    if not 0 <= x <= 2 * s:
        raise ValueError(f"x must lie in [0, {2 * s}], got {x}")
    return Fraction(comb(2 * s - x, s), comb(2 * s, s))


def open_catch_brute_force(s: int, x: int) -> Fraction:
    """Enumerate every opened half; invalid ballots sit at positions 0..x-1."""
    invalid = set(range(x))
    openings = list(combinations(range(2 * s), s))
    missed = sum(1 for o in openings if invalid.isdisjoint(o))
    return Fraction(missed, len(openings))


def equal_partition_fraction(secrets: Sequence[int], modulus: int) -> Fraction:
    """Share of balanced splits {P, Q} of the 2s inputs with sum(P) == sum(Q) mod m."""
    k = len(secrets)
    if k % 2:
        raise ValueError("need an even number of inputs")
    total = sum(secrets)
    hits = count = 0
    for half in combinations(range(k), k // 2):
        p = sum(secrets[i] for i in half)
        hits += (2 * p - total) % modulus == 0
        count += 1
    return Fraction(hits, count)


def negative_vote_detection(n: int, r: int, honest_votes: Sequence[int],
                            target_bin: tuple[int, int], extra_bin: tuple[int, int],
                            extra: int = 2) -> Fraction:
    """Exact single-repetition abort probability for one cheating voter.

    Enumerates every placement of the honest voters' bins (n**len(honest)
    equally likely outcomes) and applies the sum-consistency rule with the
    cheater's fixed pattern added.
    """
    m = 2 * n + 1
    honest = list(honest_votes)
    caught = 0
    for bins in product(range(n), repeat=len(honest)):
        grid = {}
        for c, b in zip(honest, bins):
            grid[(c, b)] = grid.get((c, b), 0) + 1
        grid[extra_bin] = grid.get(extra_bin, 0) + extra
        grid[target_bin] = grid.get(target_bin, 0) - 1
        residues = [v % m for v in grid.values()]
        ok = all(v <= n for v in residues) and sum(residues) == len(honest) + 1
        caught += not ok
    return Fraction(caught, n ** len(honest))


def _log2_ceil(value: int) -> int:
    """Smallest k with 2**k >= value, by repeated doubling."""
    if value < 1:
        raise ValueError("log of a non-positive number")
    k, power = 0, 1
    while power < value:
        power *= 2
        k += 1
    return k


def complexity_prediction(protocol: int, n: int, r: int, t: int, s: int) -> dict:
    """Closed-form traffic for an honest run, per participant.

    Returns a dict with three channel classes.  ``private`` maps a message
    kind to ``(messages per sender, bits per message)``; ``broadcast`` maps a
    phase to ``(events, bits per participant per event)``; ``unanimous``
    maps a phase to ``(events, bits, receivers)``.  ``rounds`` is the number
    of communication rounds before publication for protocols 1 and 2.
    """
    bm = _log2_ceil(2 * n + 1)
    cast = r * n * bm * s
    publish = r * _log2_ceil(n)
    if protocol == 1:
        return {"private": {"ballots": (n - 1, cast)},
                "broadcast": {"tally": (1, cast)},
                "unanimous": {}, "rounds": 2}
    if protocol == 2:
        return {"private": {"ballots": (t, cast)},
                "broadcast": {"tally": (1, cast)},
                "unanimous": {"publish": (1, publish, n)}, "rounds": 2}
    if protocol != 3:
        raise ValueError(f"unknown protocol {protocol!r}")
    pairs = comb(2 * s, s)
    return {
        "private": {"ballots": (t, 2 * r * n * bm * s * s),
                    "shifts": (t, s * s * _log2_ceil(n * r))},
        "broadcast": {
            "open-random": (1, _log2_ceil(pairs ** (n * s))),
            "open-shares": (1, s * s * r * n * n * bm),
            "equality-random": (r * n * s, s * _log2_ceil(pairs)),
            "equality-open": (r * n * s, s * bm),
            "select-random": (1, _log2_ceil(s ** (n * s))),
            "tally": (1, cast),
        },
        "unanimous": {"revocation": (n, 1, t + 1), "publish": (1, publish, n)},
        "rounds": None,
        "broadcast_events": 2 * r * n * s + 4,
    }
