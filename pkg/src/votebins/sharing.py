"""Additive distributed secrets (ADS) over residues modulo an odd m.

A secret ``v`` held by a party set ``S`` is a list of residues, one per
party, whose sum modulo ``m`` is ``v``.  Every strict subset of the shares is
uniformly distributed and carries no information about ``v``.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

Party = Hashable

_SMALL_BOUND = 1 << 62


def check_modulus(m: int) -> int:
    """Return ``m`` if it is a usable modulus (odd and at least 3)."""
    if not isinstance(m, (int, np.integer)) or isinstance(m, bool):
        raise TypeError(f"modulus must be an integer, got {type(m).__name__}")
    m = int(m)
    if m < 3 or m % 2 == 0:
        raise ValueError(f"modulus must be odd and >= 3, got {m}")
    return m


def residue_bits(m: int) -> int:
    """Encoding width of one residue modulo ``m``: ceil(log2 m)."""
    return ceil_log2(m)


def ceil_log2(x: int) -> int:
    """Exact ceil(log2 x) for a positive integer of any size."""
    if x < 1:
        raise ValueError(f"ceil_log2 needs a positive integer, got {x}")
    return (int(x) - 1).bit_length()


def randbelow(rng: np.random.Generator, bound: int) -> int:
    """Uniform integer in ``[0, bound)``; ``bound`` may exceed 64 bits."""
    bound = int(bound)
    if bound < 1:
        raise ValueError(f"bound must be positive, got {bound}")
    if bound <= _SMALL_BOUND:
        return int(rng.integers(bound))
    nbits = bound.bit_length()
    nbytes = (nbits + 7) // 8
    excess = nbytes * 8 - nbits
    while True:
        candidate = int.from_bytes(rng.bytes(nbytes), "big") >> excess
        if candidate < bound:
            return candidate


@dataclass(frozen=True)
class Share:
    value: int
    owner: Party


@dataclass(frozen=True)
class AdsHandle:
    """One additive sharing: ``values[k]`` is held by ``party_set[k]``."""

    party_set: tuple
    modulus: int
    values: tuple[int, ...]

    def __post_init__(self):
        if len(self.values) != len(self.party_set):
            raise ValueError("need exactly one share per participant")
        if len(set(self.party_set)) != len(self.party_set):
            raise ValueError("duplicate participant in party set")
        for v in self.values:
            if not 0 <= v < self.modulus:
                raise ValueError(f"share {v} outside [0, {self.modulus})")

    @property
    def shares(self) -> dict:
        return {p: Share(v, p) for p, v in zip(self.party_set, self.values)}

    def share_of(self, party: Party) -> Share:
        return Share(self.values[self.party_set.index(party)], party)

    def secret(self) -> int:
        return sum(self.values) % self.modulus


def make_ads(party_set: Sequence[Party], secret: int, modulus: int,
             rng: np.random.Generator) -> AdsHandle:
    """Split ``secret`` into ``len(party_set)`` additive shares.

    The first ``|S| - 1`` shares are uniform; the last party's share is
    chosen so the total is ``secret`` modulo ``modulus``.
    """
    m = check_modulus(modulus)
    party_set = tuple(party_set)
    if not party_set:
        raise ValueError("party set must be nonempty")
    if not 0 <= secret < m:
        raise ValueError(f"secret {secret} outside [0, {m})")
    head = [int(v) for v in rng.integers(0, m, size=len(party_set) - 1)]
    last = (secret - sum(head)) % m
    return AdsHandle(party_set, m, tuple(head) + (last,))


def sum_ads(ads_list: Sequence[AdsHandle]) -> AdsHandle:
    """Share-wise sum of ADSs over the same parties; no communication."""
    if not ads_list:
        raise ValueError("sum_ads needs at least one ADS")
    first = ads_list[0]
    for other in ads_list[1:]:
        if other.party_set != first.party_set:
            raise ValueError("mismatched party sets")
        if other.modulus != first.modulus:
            raise ValueError("mismatched moduli")
    m = first.modulus
    values = tuple(sum(col) % m for col in zip(*(a.values for a in ads_list)))
    return AdsHandle(first.party_set, m, values)


def negate_ads(ads: AdsHandle) -> AdsHandle:
    m = ads.modulus
    return AdsHandle(ads.party_set, m, tuple((-v) % m for v in ads.values))


def reconstruct(shares: Iterable[Share] | Mapping[Party, Share], modulus: int,
                party_set: Sequence[Party] | None = None) -> int:
    """Open a sharing: the sum of all share values modulo ``modulus``.

    If ``party_set`` is given, the shares must cover it exactly.
    """
    if isinstance(shares, Mapping):
        shares = list(shares.values())
    shares = list(shares)
    owners = [s.owner for s in shares]
    if len(set(owners)) != len(owners):
        raise ValueError("duplicate participant share")
    if party_set is not None and set(owners) != set(party_set):
        missing = set(party_set) - set(owners)
        raise ValueError(f"missing or foreign shares (missing: {sorted(map(str, missing))})")
    if not shares:
        raise ValueError("no shares to reconstruct")
    return sum(s.value for s in shares) % modulus


def is_negative(residue: int, modulus: int) -> bool:
    """A residue counts as negative when it exceeds ``modulus / 2``."""
    if not 0 <= residue < modulus:
        raise ValueError(f"residue {residue} outside [0, {modulus})")
    return 2 * residue > modulus


def unrank_subset(rank: int, universe_size: int, subset_size: int) -> tuple[int, ...]:
    """The ``rank``-th ``subset_size``-subset of ``range(universe_size)`` in colex order."""
    total = comb(universe_size, subset_size)
    if not 0 <= rank < total:
        raise ValueError(f"rank {rank} outside [0, {total})")
    out = []
    rank = int(rank)
    top = universe_size
    for k in range(subset_size, 0, -1):
        # largest c with comb(c, k) <= rank
        c = k - 1
        while c + 1 < top and comb(c + 1, k) <= rank:
            c += 1
        out.append(c)
        rank -= comb(c, k)
        top = c
    return tuple(sorted(out))


def rank_subset(subset: Iterable[int]) -> int:
    """Inverse of :func:`unrank_subset`."""
    elems = sorted(subset)
    return sum(comb(c, k + 1) for k, c in enumerate(elems))
