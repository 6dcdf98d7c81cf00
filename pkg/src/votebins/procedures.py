"""Interactive subprotocols: joint randomness and share-level equality testing."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb
from typing import Mapping, Sequence

import numpy as np

from .channels import Network, ProtocolAbort
from .sharing import AdsHandle, ceil_log2, check_modulus, randbelow, unrank_subset

# beyond this many balanced partitions the sign table is not precomputed
_TABLE_LIMIT = 20000
# contributions below this bound are summed as int64 arrays
SMALL_RANGE = 1 << 40


def _as_int(value, participant, phase) -> int:
    try:
        return int(value)
    except (TypeError, ValueError):
        raise ProtocolAbort(f"{phase}:malformed", [participant]) from None


class DrawPool:
    """A party's RANDOM contributions for one range, drawn in a single batch.

    Serves ``integers(ell, size=k)`` from the batch and falls back to the
    wrapped generator for other ranges or once the batch is used up.
    """

    def __init__(self, rng: np.random.Generator, ell: int, total: int):
        self.rng = rng
        self.ell = int(ell)
        self._buf = rng.integers(self.ell, size=total) if total > 0 else np.zeros(0, np.int64)
        self._pos = 0

    def integers(self, ell, size):
        end = self._pos + size
        if int(ell) != self.ell or end > len(self._buf):
            return self.rng.integers(ell, size=size)
        out = self._buf[self._pos:end]
        self._pos = end
        return out


def random_joint(participants: Sequence, ell: int, net: Network,
                 rngs: Mapping[object, np.random.Generator], phase: str = "random") -> int:
    """RANDOM: every participant broadcasts a uniform value below ``ell``;
    the output is their sum modulo ``ell``."""
    return random_joint_many(participants, ell, 1, net, rngs, phase)[0]


def random_joint_many(participants: Sequence, ell: int, count: int, net: Network,
                      rngs: Mapping[object, np.random.Generator],
                      phase: str = "random") -> list[int]:
    """``count`` independent RANDOM instances carried by one broadcast.

    Each participant's input is a tuple of ``count`` values, so the broadcast
    is ``count * ceil(log2 ell)`` bits per participant.
    """
    ell = int(ell)
    if ell < 1:
        raise ValueError(f"range bound must be >= 1, got {ell}")
    small = ell <= SMALL_RANGE
    if small:
        contributions = {p: rngs[p].integers(ell, size=count) for p in participants}
    else:
        contributions = {p: tuple(randbelow(rngs[p], ell) for _ in range(count))
                         for p in participants}
    opened = net.broadcast(participants, contributions, count * ceil_log2(ell), phase)
    if small:
        total = np.zeros(count, dtype=np.int64)
        for p in participants:
            vals = np.asarray(opened[p])
            if vals.shape != (count,) or vals.dtype.kind not in "iu":
                raise ProtocolAbort(f"{phase}:malformed", [p])
            total += vals % ell
        return (total % ell).tolist()
    totals = [0] * count
    for p in participants:
        vals = opened[p]
        if not isinstance(vals, (tuple, list, np.ndarray)) or len(vals) != count:
            raise ProtocolAbort(f"{phase}:malformed", [p])
        for k, v in enumerate(vals):
            totals[k] += _as_int(v, p, phase)
    return [t % ell for t in totals]


@lru_cache(maxsize=None)
def partition_signs(s: int) -> np.ndarray:
    """Row ``k``: +1 on the positions of the ``k``-th balanced subset P of
    ``range(2s)`` (colex order), -1 on its complement Q."""
    total = comb(2 * s, s)
    table = -np.ones((total, 2 * s), dtype=np.int64)
    for rank in range(total):
        table[rank, list(unrank_subset(rank, 2 * s, s))] = 1
    return table


def _signs_for(s: int, ranks: Sequence[int]) -> np.ndarray:
    if comb(2 * s, s) <= _TABLE_LIMIT:
        return partition_signs(s)[list(ranks)]
    out = -np.ones((len(ranks), 2 * s), dtype=np.int64)
    for row, rank in enumerate(ranks):
        out[row, list(unrank_subset(rank, 2 * s, s))] = 1
    return out


@dataclass(frozen=True)
class EqualityVerdict:
    verdict: str
    revealed_differences: tuple[int, ...]
    partitions: tuple[int, ...] = ()

    @property
    def equal(self) -> bool:
        return self.verdict == "equal"


def equality_test(shares: np.ndarray, modulus: int, s: int, participants: Sequence,
                  net: Network, rngs: Mapping[object, np.random.Generator],
                  phase: str = "equality") -> EqualityVerdict:
    """ADS-EQUALITY on a share matrix of shape ``(|S|, 2s)``.

    Row ``k`` holds participant ``k``'s shares of the 2s inputs.
    """
    m = check_modulus(modulus)
    shares = np.asarray(shares, dtype=np.int64)
    if shares.shape != (len(participants), 2 * s):
        raise ValueError(f"expected shares of shape {(len(participants), 2 * s)}, "
                         f"got {shares.shape}")
    ranks = random_joint_many(participants, comb(2 * s, s), s, net, rngs,
                              phase=f"{phase}-random")
    signs = _signs_for(s, ranks)
    y_shares = (shares @ signs.T) % m
    opened = net.broadcast(participants, {p: y_shares[k] for k, p in enumerate(participants)},
                           s * ceil_log2(m), f"{phase}-open")
    total = np.zeros(s, dtype=np.int64)
    for p in participants:
        vals = np.asarray(opened[p])
        if vals.shape != (s,):
            raise ProtocolAbort(f"{phase}-open:malformed", [p])
        total += vals.astype(np.int64) % m
    diffs = tuple(int(v) for v in total % m)
    return EqualityVerdict("equal" if not any(diffs) else "unequal", diffs, tuple(ranks))


def ads_equality(ads_list: Sequence[AdsHandle], s: int, net: Network,
                 rngs: Mapping[object, np.random.Generator],
                 phase: str = "equality") -> EqualityVerdict:
    """Test whether 2s ADSs over the same parties share one secret.

    Equal secrets always pass.  With an odd modulus, unequal secrets pass with
    probability at most ``(s / (2s - 1))**s``; the worst inputs hold exactly
    two copies of one value among copies of another.
    """
    if len(ads_list) != 2 * s:
        raise ValueError(f"ADS-EQUALITY takes exactly 2s = {2 * s} inputs, got {len(ads_list)}")
    first = ads_list[0]
    for a in ads_list[1:]:
        if a.party_set != first.party_set or a.modulus != first.modulus:
            raise ValueError("inputs must share party set and modulus")
    shares = np.array([a.values for a in ads_list], dtype=np.int64).T
    return equality_test(shares, first.modulus, s, first.party_set, net, rngs, phase)
