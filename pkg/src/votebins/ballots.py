"""Voting-bin grids: r candidates times n bins, residues modulo 2n+1.

A plaintext grid (``BinGrid``) is an ``(r, n)`` integer array.  A shared grid
stores one ``(r, n)`` share matrix per participant, stacked along axis 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .sharing import AdsHandle, check_modulus

BinGrid = np.ndarray


def grid_modulus(n: int) -> int:
    return 2 * n + 1


@dataclass(frozen=True)
class BallotSpec:
    candidate: int
    bin: int

    def check(self, r: int, n: int) -> "BallotSpec":
        if not (0 <= self.candidate < r and 0 <= self.bin < n):
            raise ValueError(f"ballot spec {self} out of range for r={r}, n={n}")
        return self


@dataclass(frozen=True)
class ShiftPair:
    candidate_shift: int
    bin_shift: int

    def check(self, r: int, n: int) -> "ShiftPair":
        if not (0 <= self.candidate_shift < r and 0 <= self.bin_shift < n):
            raise ValueError(f"shift {self} out of range for r={r}, n={n}")
        return self

    def encode(self, n: int) -> int:
        """Pack into one integer in ``[0, r*n)``."""
        return self.candidate_shift * n + self.bin_shift

    @classmethod
    def decode(cls, code: int, n: int) -> "ShiftPair":
        return cls(int(code) // n, int(code) % n)


@dataclass
class SharedBinGrid:
    """A VOTING-BIN-SET: ``shares[k]`` is ``party_set[k]``'s share matrix."""

    party_set: tuple
    modulus: int
    shares: np.ndarray

    def __post_init__(self):
        check_modulus(self.modulus)
        if self.shares.ndim != 3 or self.shares.shape[0] != len(self.party_set):
            raise ValueError("shares must have shape (|S|, r, n)")

    @property
    def r(self) -> int:
        return self.shares.shape[1]

    @property
    def n(self) -> int:
        return self.shares.shape[2]

    def ads(self, candidate: int, bin: int) -> AdsHandle:
        col = self.shares[:, candidate, bin]
        return AdsHandle(self.party_set, self.modulus, tuple(int(v) for v in col))

    def share_matrix(self, party) -> np.ndarray:
        return self.shares[self.party_set.index(party)]

    def reconstruct(self) -> BinGrid:
        return self.shares.sum(axis=0) % self.modulus


def share_grid(grid: BinGrid, n_parties: int, modulus: int,
               rng: np.random.Generator) -> np.ndarray:
    """Additively share every cell of ``grid``; returns ``(n_parties, *grid.shape)``.

    Works on any stack of grids: the party axis is prepended.
    """
    grid = np.asarray(grid, dtype=np.int64) % modulus
    head = rng.integers(0, modulus, size=(n_parties - 1,) + grid.shape, dtype=np.int64)
    last = (grid - head.sum(axis=0)) % modulus
    return np.concatenate([head, last[None]], axis=0)


def ballot_grid(r: int, n: int, spec: BallotSpec) -> BinGrid:
    spec.check(r, n)
    grid = np.zeros((r, n), dtype=np.int64)
    grid[spec.candidate, spec.bin] = 1
    return grid


def make_ballot(party_set: Sequence, n: int, r: int, spec: BallotSpec,
                rng: np.random.Generator) -> SharedBinGrid:
    parties = tuple(party_set)
    if not parties:
        raise ValueError("party set must be nonempty")
    m = grid_modulus(n)
    shares = share_grid(ballot_grid(r, n, spec), len(parties), m, rng)
    return SharedBinGrid(parties, m, shares)


def sum_ballots(ballots: Sequence[SharedBinGrid]) -> SharedBinGrid:
    if not ballots:
        raise ValueError("sum_ballots needs at least one grid")
    first = ballots[0]
    for b in ballots[1:]:
        if b.party_set != first.party_set or b.modulus != first.modulus:
            raise ValueError("mismatched party sets or moduli")
        if b.shares.shape != first.shares.shape:
            raise ValueError(f"dimension mismatch: {b.shares.shape} vs {first.shares.shape}")
    total = np.sum([b.shares for b in ballots], axis=0) % first.modulus
    return SharedBinGrid(first.party_set, first.modulus, total)


def is_sum_consistent(grid: BinGrid, expected_total: int) -> bool:
    """Every bin holds 0..n votes and the bins add up to ``expected_total``."""
    grid = np.asarray(grid)
    n = grid.shape[-1]
    if np.any(grid < 0) or np.any(grid > n):
        return False
    return int(grid.sum()) == expected_total


def tally(grid: BinGrid) -> tuple[int, ...]:
    return tuple(int(v) for v in np.asarray(grid).sum(axis=-1))


def shift_spec(spec: BallotSpec, shift: ShiftPair, r: int, n: int) -> BallotSpec:
    return BallotSpec((spec.candidate + shift.candidate_shift) % r,
                      (spec.bin + shift.bin_shift) % n)


def unshift_shares(share_matrix: np.ndarray, shift: ShiftPair) -> np.ndarray:
    """Move cell ``(i, j)`` to ``(i - dc mod r, j - do mod n)``."""
    return np.roll(share_matrix, (-shift.candidate_shift, -shift.bin_shift), axis=(0, 1))


def unshift_many(shares: np.ndarray, candidate_shifts: np.ndarray,
                 bin_shifts: np.ndarray) -> np.ndarray:
    """Vectorised :func:`unshift_shares` over a batch of ballots.

    ``shares`` has shape ``(..., B, r, n)``; shifts have shape ``(B,)``.
    """
    r, n = shares.shape[-2:]
    b = np.arange(len(candidate_shifts))[:, None, None]
    rows = (np.arange(r)[None, :, None] + np.asarray(candidate_shifts)[:, None, None]) % r
    cols = (np.arange(n)[None, None, :] + np.asarray(bin_shifts)[:, None, None]) % n
    return shares[..., b, rows, cols]


def validate_opened_ballot(grid: BinGrid) -> bool:
    """Exactly one cell equals 1 and every other cell is 0."""
    grid = np.asarray(grid)
    return int((grid == 1).sum()) == 1 and int((grid == 0).sum()) == grid.size - 1


def valid_ballot_mask(grids: np.ndarray) -> np.ndarray:
    """:func:`validate_opened_ballot` over a stack ``(..., r, n)``."""
    ones = (grids == 1).sum(axis=(-2, -1))
    zeros = (grids == 0).sum(axis=(-2, -1))
    size = grids.shape[-2] * grids.shape[-1]
    return (ones == 1) & (zeros == size - 1)
