"""Cheating strategies, plugged into the protocols at their decision points.

A strategy only sees its :class:`StrategyContext`: the shared collusion log,
its own random source and whatever the protocol hands it at a hook.  Every
hook defaults to honest behaviour.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .channels import REFUSE, CollusionView, PartyId


@dataclass
class StrategyContext:
    party: PartyId
    protocol: int
    n: int
    r: int
    s: int
    vote: int | None
    view: CollusionView
    rng: np.random.Generator

    @property
    def m(self) -> int:
        return 2 * self.n + 1


class Strategy:
    """Honest behaviour at every hook."""

    name = "honest"

    def params(self) -> dict:
        return {}

    def cast_grids(self, ctx: StrategyContext, grids: np.ndarray, **info) -> np.ndarray:
        """Protocols 1-2 voter: plaintext ``(s, r, n)`` grids to share."""
        return grids

    def robust_ballots(self, ctx: StrategyContext, grids: np.ndarray, shifts: np.ndarray,
                       **info) -> tuple[np.ndarray, np.ndarray]:
        """Protocol 3 voter: encrypted ``(s, 2s, r, n)`` grids and ``(s, 2s, 2)`` shifts."""
        return grids, shifts

    def send(self, ctx: StrategyContext, phase: str) -> bool:
        return True

    def shift_message(self, ctx: StrategyContext, codes: np.ndarray, **info):
        return codes

    def tamper(self, ctx: StrategyContext, phase: str, shares: np.ndarray, **info) -> np.ndarray:
        return shares

    def broadcast_input(self, ctx: StrategyContext, phase: str, value):
        return value

    def reveal(self, ctx: StrategyContext, phase: str, committed):
        return committed

    def announce(self, ctx: StrategyContext, phase: str, value):
        return value

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{type(self).__name__}({args})"


def _phase_match(pattern: str, phase: str) -> bool:
    return pattern == "*" or phase == pattern or phase.startswith(pattern + ":") \
        or phase.startswith(pattern + "-")


class NegativeVote(Strategy):
    """Put ``extra`` votes in ``extra_bin`` and -1 in ``target_bin``."""

    name = "negative_vote"

    def __init__(self, target_bin, extra_bin, extra: int = 2):
        self.target_bin = tuple(target_bin)
        self.extra_bin = tuple(extra_bin)
        if self.target_bin == self.extra_bin:
            raise ValueError("target and extra bins must differ")
        self.extra = int(extra)

    def params(self):
        return {"target_bin": list(self.target_bin), "extra_bin": list(self.extra_bin),
                "extra": self.extra}

    def pattern(self, ctx) -> np.ndarray:
        g = np.zeros((ctx.r, ctx.n), dtype=np.int64)
        g[self.extra_bin] = self.extra % ctx.m
        g[self.target_bin] = ctx.m - 1
        return g

    def cast_grids(self, ctx, grids, **info):
        return np.broadcast_to(self.pattern(ctx), grids.shape).copy()

    def robust_ballots(self, ctx, grids, shifts, **info):
        g = self.pattern(ctx)
        out = np.empty_like(grids)
        for k in range(grids.shape[0]):
            for b in range(grids.shape[1]):
                out[k, b] = np.roll(g, tuple(shifts[k, b]), axis=(0, 1))
        return out, shifts


class MultiVote(Strategy):
    """Cast ``1 + k_extra`` votes: the honest one plus ``k_extra`` more."""

    name = "multi_vote"

    def __init__(self, k_extra: int = 1, bins=None):
        self.k_extra = int(k_extra)
        self.bins = [tuple(b) for b in bins] if bins else None

    def params(self):
        return {"k_extra": self.k_extra, **({"bins": [list(b) for b in self.bins]}
                                             if self.bins else {})}

    def _extra(self, ctx) -> np.ndarray:
        g = np.zeros((ctx.r, ctx.n), dtype=np.int64)
        if self.bins:
            for b in self.bins[:self.k_extra]:
                g[b] += 1
        else:
            for b in ctx.rng.integers(ctx.n, size=self.k_extra):
                g[ctx.vote, b] += 1
        return g

    def cast_grids(self, ctx, grids, **info):
        return (grids + self._extra(ctx)[None]) % ctx.m

    def robust_ballots(self, ctx, grids, shifts, **info):
        extra = self._extra(ctx)
        out = grids.copy()
        for k in range(grids.shape[0]):
            for b in range(grids.shape[1]):
                out[k, b] = (out[k, b] + np.roll(extra, tuple(shifts[k, b]), axis=(0, 1))) % ctx.m
        return out, shifts


class InvalidBallots(Strategy):
    """Protocol 3: make ``x_per_set`` ballots of each chosen set invalid.

    ``kind`` is ``double`` (the vote cell holds 2), ``empty`` (no vote) or
    ``negative`` (2 in the vote cell, -1 in the next bin of the same row).
    ``candidates`` optionally retargets each set's valid ballots, giving
    valid ballots that disagree across sets.
    """

    name = "invalid_ballots"

    def __init__(self, x_per_set: int = 1, kind: str = "double", sets=None, candidates=None):
        if kind not in ("double", "empty", "negative"):
            raise ValueError(f"unknown invalid-ballot kind {kind!r}")
        self.x_per_set = int(x_per_set)
        self.kind = kind
        self.sets = list(sets) if sets is not None else None
        self.candidates = list(candidates) if candidates is not None else None

    def params(self):
        out = {"x_per_set": self.x_per_set, "kind": self.kind}
        if self.sets is not None:
            out["sets"] = self.sets
        if self.candidates is not None:
            out["candidates"] = self.candidates
        return out

    def robust_ballots(self, ctx, grids, shifts, bins=None, **info):
        s2 = grids.shape[1]
        out = grids.copy()
        if self.candidates is not None:
            for k, cand in enumerate(self.candidates[:grids.shape[0]]):
                for b in range(s2):
                    dc, do = shifts[k, b]
                    out[k, b] = 0
                    out[k, b, (cand + dc) % ctx.r, (bins[k] + do) % ctx.n] = 1
        sets = self.sets if self.sets is not None else range(grids.shape[0])
        x = min(self.x_per_set, s2)
        for k in sets:
            for b in ctx.rng.choice(s2, size=x, replace=False):
                c, o = np.argwhere(out[k, b] == 1)[0]
                out[k, b] = 0
                if self.kind == "double":
                    out[k, b, c, o] = 2
                elif self.kind == "negative":
                    out[k, b, c, o] = 2
                    out[k, b, c, (o + 1) % ctx.n] = ctx.m - 1
        return out, shifts


class MalformedShifts(Strategy):
    """Protocol 3 voter: send out-of-range shift values."""

    name = "malformed_shifts"

    def shift_message(self, ctx, codes, **info):
        return np.full_like(codes, ctx.r * ctx.n)


class AuthorityTamper(Strategy):
    """Add residues to the party's own shares.

    ``delta_map`` keys are phases:

    * ``pre-sum``: ``{(c, b): delta}`` added to the own share of the summed
      grid in every repetition (linear, so the same as adding before the sum).
    * ``pre-opening``: ``{voter: {(c, b): delta}}`` added to the own share of
      the first opened ballot of the voter's first set (Protocol 3).
    * ``pre-equality``: a list of 2s constants added to the own shares of
      every ADS-EQUALITY input vector, or ``{voter: [...]}``.
    """

    name = "authority_tamper"

    def __init__(self, delta_map: Mapping[str, Any]):
        unknown = set(delta_map) - {"pre-sum", "pre-opening", "pre-equality"}
        if unknown:
            raise ValueError(f"unknown tamper phases {sorted(unknown)}")
        self.delta_map = dict(delta_map)

    def params(self):
        def plain(obj):
            if isinstance(obj, Mapping):
                return {(",".join(map(str, k)) if isinstance(k, tuple) else str(k)): plain(v)
                        for k, v in obj.items()}
            if isinstance(obj, (list, tuple)):
                return [plain(v) for v in obj]
            return obj
        return {"delta_map": plain(self.delta_map)}

    def tamper(self, ctx, phase, shares, **info):
        spec = self.delta_map.get(phase)
        if spec is None:
            return shares
        out = np.array(shares, dtype=np.int64, copy=True)
        if phase == "pre-sum":
            for cell, d in spec.items():
                out[(slice(None),) + tuple(cell)] += d
        elif phase == "pre-opening":
            voters = list(info.get("voters", ()))
            for v, cells in spec.items():
                if v in voters:
                    for cell, d in cells.items():
                        out[(voters.index(v), 0, 0) + tuple(cell)] += d
        else:
            consts = spec.get(info.get("voter"), None) if isinstance(spec, Mapping) else spec
            if consts is not None:
                out += np.asarray(consts, dtype=np.int64)
        return out % ctx.m


class RefuseBroadcast(Strategy):
    """Refuse to take part at ``phase`` (``*`` for every phase)."""

    name = "refuse_broadcast"

    def __init__(self, phase: str):
        self.phase = phase

    def params(self):
        return {"phase": self.phase}

    def send(self, ctx, phase):
        return not _phase_match(self.phase, phase)

    def shift_message(self, ctx, codes, **info):
        return REFUSE if _phase_match(self.phase, "shifts") else codes

    def broadcast_input(self, ctx, phase, value):
        return REFUSE if _phase_match(self.phase, phase) else value

    def announce(self, ctx, phase, value):
        return REFUSE if _phase_match(self.phase, phase) else value


class CommitMismatch(Strategy):
    """Open a different value than the one committed to at ``phase``."""

    name = "commit_mismatch"

    def __init__(self, phase: str = "*"):
        self.phase = phase

    def params(self):
        return {"phase": self.phase}

    def reveal(self, ctx, phase, committed):
        if not _phase_match(self.phase, phase):
            return committed
        if isinstance(committed, np.ndarray):
            return committed + 1
        if isinstance(committed, tuple):
            return tuple(int(v) + 1 for v in committed)
        return int(committed) + 1


def strategy_negative_vote(target_bin, extra_bin, extra: int = 2) -> Strategy:
    return NegativeVote(target_bin, extra_bin, extra)


def strategy_multi_vote(k_extra: int, bins=None) -> Strategy:
    return MultiVote(k_extra, bins)


def strategy_invalid_ballots(x_per_set: int, kind: str = "double", sets=None,
                             candidates=None) -> Strategy:
    return InvalidBallots(x_per_set, kind, sets, candidates)


def strategy_malformed_shifts() -> Strategy:
    return MalformedShifts()


def strategy_commit_mismatch(phase: str = "*") -> Strategy:
    return CommitMismatch(phase)


def strategy_authority_tamper(delta_map) -> Strategy:
    return AuthorityTamper(delta_map)


def strategy_refuse_broadcast(phase: str) -> Strategy:
    return RefuseBroadcast(phase)


STRATEGIES = {cls.name: cls for cls in
              (Strategy, NegativeVote, MultiVote, InvalidBallots, MalformedShifts,
               AuthorityTamper, RefuseBroadcast, CommitMismatch)}


def _key(text):
    """Config files spell tuple keys as "c,b" strings."""
    if isinstance(text, str) and "," in text:
        return tuple(int(v) for v in text.split(","))
    if isinstance(text, str) and text.lstrip("-").isdigit():
        return int(text)
    return text


def _keys_to_tuples(obj):
    if isinstance(obj, Mapping):
        return {_key(k): _keys_to_tuples(v) for k, v in obj.items()}
    return obj


def build_strategy(name: str, params: Mapping | None = None) -> Strategy:
    """Instantiate a catalogued strategy from its config name and parameters."""
    try:
        cls = STRATEGIES[name]
    except KeyError:
        raise ValueError(f"unknown strategy {name!r}; known: {sorted(STRATEGIES)}") from None
    params = dict(params or {})
    if cls is AuthorityTamper:
        params["delta_map"] = _keys_to_tuples(params.get("delta_map", {}))
    return cls(**params)


@dataclass
class Adversary:
    """A single collusion: every corrupt party shares one view."""

    bindings: Mapping[PartyId, Strategy]
    contexts: dict = field(default_factory=dict)
    view: CollusionView = field(default_factory=CollusionView)
    ground_truth: dict = field(default_factory=dict)

    @property
    def corrupt(self) -> frozenset:
        return frozenset(self.bindings)

    @classmethod
    def build(cls, bindings, protocol, params, votes, rng_for) -> "Adversary":
        adv = cls(dict(bindings))
        for p in adv.bindings:
            vote = votes[p.index] if p.role == "voter" else None
            adv.contexts[p] = StrategyContext(p, protocol, params.n, params.r, params.s,
                                              vote, adv.view, rng_for(p))
        return adv

    def strategy(self, party) -> Strategy | None:
        return self.bindings.get(party)

    def ctx(self, party) -> StrategyContext:
        return self.contexts[party]

    def deferred_input(self, party, phase, value):
        strat, ctx = self.bindings[party], self.contexts[party]
        return lambda: strat.broadcast_input(ctx, phase, value)

    def opener(self, party, phase):
        strat, ctx = self.bindings[party], self.contexts[party]
        if type(strat).reveal is Strategy.reveal:
            return None
        return lambda committed: strat.reveal(ctx, phase, committed)

    def announce(self, party, phase, value):
        return self.bindings[party].announce(self.contexts[party], phase, value)
