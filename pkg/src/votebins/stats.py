"""Estimators and sigma-band checks for Monte Carlo trials."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import sqrt
from typing import Sequence

import numpy as np

RELATIONS = ("equal", "at_most", "at_least")


def wilson_interval(successes: int, trials: int, z: float = 3.0) -> tuple[float, float]:
    if trials < 1:
        raise ValueError("need at least one trial")
    if not 0 <= successes <= trials:
        raise ValueError("successes must lie in [0, trials]")
    p = successes / trials
    denom = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass(frozen=True)
class BandCheck:
    observed: float
    predicted: float
    sigma: float
    k: float
    relation: str
    passed: bool

    @property
    def z(self) -> float:
        if self.sigma == 0:
            return 0.0 if self.observed == self.predicted else float("inf")
        return (self.observed - self.predicted) / self.sigma


def binomial_check(hits: int, trials: int, p, k: float = 3.0,
                   relation: str = "equal") -> BandCheck:
    """Compare a hit frequency with probability ``p`` using a ``k``-sigma band.

    ``p`` of exactly 0 or 1 has zero variance, so the frequency must match it.
    """
    if relation not in RELATIONS:
        raise ValueError(f"relation must be one of {RELATIONS}")
    if trials < 1:
        raise ValueError("need at least one trial")
    p = float(Fraction(p)) if not isinstance(p, float) else p
    freq = hits / trials
    sigma = sqrt(p * (1 - p) / trials)
    slack = k * sigma
    if relation == "equal":
        ok = abs(freq - p) <= slack
    elif relation == "at_most":
        ok = freq <= p + slack
    else:
        ok = freq >= p - slack
    return BandCheck(freq, p, sigma, k, relation, bool(ok))


@dataclass(frozen=True)
class ChiSquare:
    statistic: float
    df: int
    threshold: float

    @property
    def passed(self) -> bool:
        return self.statistic <= self.threshold


def chi_square_uniform(counts: Sequence[int], k: float = 4.0) -> ChiSquare:
    """Pearson statistic against equal cell probabilities.

    Passes when the statistic is within ``k`` standard deviations of its
    mean ``df`` (the variance of a chi-square is ``2 df``).
    """
    counts = np.asarray(counts, dtype=float).ravel()
    if counts.size < 2:
        raise ValueError("need at least two cells")
    total = counts.sum()
    if total <= 0:
        raise ValueError("no samples")
    expected = total / counts.size
    stat = float(((counts - expected) ** 2 / expected).sum())
    df = counts.size - 1
    return ChiSquare(stat, df, df + k * sqrt(2 * df))
