"""VOTE-BASIC, VOTE-AUTHORITIES and VOTE-AUTHORITIES-ROBUST.

Each run is round-synchronous and deterministic given its seed.  The ``s``
repetitions run in parallel, so their messages are bundled: one private
message or broadcast input carries all repetitions.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import asdict, dataclass, field
from math import comb
from typing import Mapping, Sequence

import numpy as np

from .adversaries import Adversary, Strategy
from .ballots import (is_sum_consistent, share_grid, tally, unshift_many,
                      valid_ballot_mask)
from .channels import (REFUSE, Network, OrderingMonitor, PartyId, ProtocolAbort,
                       TrafficLedger, Transcript, authority, authority_star, voter,
                       voter_mesh)
from .procedures import SMALL_RANGE, DrawPool, equality_test, random_joint
from .sharing import ceil_log2, unrank_subset

REALIZATIONS = ("ideal", "commit-reveal")


@dataclass(frozen=True)
class ElectionParams:
    n: int
    r: int
    t: int = 0
    s: int = 1
    broadcast_realization: str = "ideal"

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"need at least 2 voters, got n={self.n}")
        if self.r < 1:
            raise ValueError(f"need at least 1 candidate, got r={self.r}")
        if self.s < 1:
            raise ValueError(f"security parameter must be >= 1, got s={self.s}")
        if self.t < 0:
            raise ValueError(f"authority count must be >= 0, got t={self.t}")
        if self.broadcast_realization not in REALIZATIONS:
            raise ValueError(f"unknown broadcast realization {self.broadcast_realization!r}")

    @property
    def m(self) -> int:
        return 2 * self.n + 1

    @property
    def residue_bits(self) -> int:
        return ceil_log2(self.m)


@dataclass
class ProtocolOutcome:
    protocol: int
    params: ElectionParams
    seed: object
    status: str
    phase: str | None = None
    culprits: tuple = ()
    tally: tuple | None = None
    revocations: tuple | None = None
    ledger: TrafficLedger = field(default_factory=TrafficLedger, repr=False)
    transcript: Transcript | None = field(default=None, repr=False)
    details: dict = field(default_factory=dict, repr=False)

    @property
    def succeeded(self) -> bool:
        return self.status == "success"

    def summary(self) -> dict:
        """Everything except ledger and transcript."""
        return {
            "protocol": self.protocol,
            "params": asdict(self.params),
            "seed": self.seed,
            "status": self.status,
            "phase": self.phase,
            "culprits": [str(c) for c in self.culprits],
            "tally": list(self.tally) if self.tally is not None else None,
            "revocations": list(self.revocations) if self.revocations is not None else None,
        }

    def to_record(self) -> dict:
        rec = self.summary()
        if "revocation_reasons" in self.details:
            rec["revocation_reasons"] = {str(i): why for i, why in
                                         sorted(self.details["revocation_reasons"].items())}
        rec["ledger"] = self.ledger.totals()
        return rec


class _Run:
    """Shared scaffolding for one protocol execution."""

    def __init__(self, protocol, params, votes, strategies, seed, monitor, record_transcript,
                 topology):
        self.protocol = protocol
        self.params = params
        self.votes = [int(v) for v in votes]
        if len(self.votes) != params.n:
            raise ValueError(f"expected {params.n} votes, got {len(self.votes)}")
        strategies = dict(strategies or {})
        for i, v in enumerate(self.votes):
            if not 0 <= v < params.r and voter(i) not in strategies:
                raise ValueError(f"vote {v} of voter {i} outside [0, {params.r})")
        self.voters = tuple(voter(i) for i in range(params.n))
        self.authorities = tuple(authority(j) for j in range(params.t))
        for p in strategies:
            if p not in self.voters and p not in self.authorities:
                raise ValueError(f"strategy bound to unknown party {p}")
        self.seed = seed
        root = np.random.SeedSequence(seed)
        kids = root.spawn(4)
        voter_seqs = kids[0].spawn(params.n)
        auth_seqs = kids[1].spawn(max(params.t, 1))
        self.rngs = {p: np.random.default_rng(q) for p, q in zip(self.voters, voter_seqs)}
        self.rngs.update({p: np.random.default_rng(q)
                          for p, q in zip(self.authorities, auth_seqs)})
        adv_seqs = {p: q for p, q in zip(self.voters + self.authorities,
                                         kids[2].spawn(params.n + params.t))}
        self.adversary = (Adversary.build(strategies, protocol, params, self.votes,
                                          lambda p: np.random.default_rng(adv_seqs[p]))
                          if strategies else None)
        transcript = None
        if record_transcript:
            transcript = Transcript({
                "protocol": protocol, "params": asdict(params), "votes": self.votes,
                "seed": seed,
                "strategies": {str(p): {"name": st.name, "params": st.params()}
                               for p, st in sorted(strategies.items())},
            })
        nonce_rng = (np.random.default_rng(kids[3])
                     if params.broadcast_realization == "commit-reveal" else None)
        self.net = Network(topology, realization=params.broadcast_realization,
                           adversary=self.adversary, monitor=monitor, transcript=transcript,
                           nonce_rng=nonce_rng)
        self.details: dict = {}

    def strategy(self, party) -> Strategy | None:
        return self.adversary.strategy(party) if self.adversary is not None else None

    def ctx(self, party):
        return self.adversary.ctx(party)

    def tamper(self, party, phase, shares, **info):
        strat = self.strategy(party)
        if strat is None:
            return shares
        return strat.tamper(self.ctx(party), phase, shares, **info)

    def opened_sum(self, values: Mapping, participants, shape, phase) -> np.ndarray:
        """Add up broadcast share arrays, rejecting malformed contributions."""
        total = np.zeros(shape, dtype=np.int64)
        for p in participants:
            try:
                arr = np.asarray(values[p], dtype=np.int64)
            except (TypeError, ValueError):
                raise ProtocolAbort(f"{phase}:malformed", [p]) from None
            if arr.shape != tuple(shape):
                raise ProtocolAbort(f"{phase}:malformed", [p])
            total += arr % self.params.m
        return total % self.params.m

    def record_cast(self, party, grids):
        if self.adversary is not None:
            self.adversary.ground_truth[party] = np.asarray(grids) % self.params.m

    def outcome(self, status, phase=None, culprits=(), tally_=None, revocations=None):
        if self.adversary is not None:
            self.details["cast"] = self.adversary.ground_truth
        return ProtocolOutcome(self.protocol, self.params, self.seed, status, phase,
                               tuple(culprits), tally_, revocations, self.net.ledger,
                               self.net.transcript, self.details)

    def honest_grids(self, party, vote) -> np.ndarray:
        """One honest ballot per repetition, each in a uniform random bin."""
        p = self.params
        bins = self.rngs[party].integers(p.n, size=p.s)
        grids = np.zeros((p.s, p.r, p.n), dtype=np.int64)
        grids[np.arange(p.s), vote, bins] = 1
        return grids

    def check_tallies(self, grids: np.ndarray, expected_total: int) -> tuple:
        for k in range(grids.shape[0]):
            if not is_sum_consistent(grids[k], expected_total):
                raise ProtocolAbort("sum-inconsistency")
        tallies = {tally(g) for g in grids}
        if len(tallies) != 1:
            raise ProtocolAbort("repetition-mismatch")
        return tallies.pop()


def _cast_bits(p: ElectionParams) -> int:
    return p.r * p.n * p.residue_bits * p.s


def _tally_bits(p: ElectionParams) -> int:
    return p.r * ceil_log2(p.n)


def _grids_for(run: _Run, v: PartyId) -> np.ndarray | None:
    """Plaintext grids voter ``v`` shares, or None if it refuses to send."""
    grids = run.honest_grids(v, run.votes[v.index]) if 0 <= run.votes[v.index] < run.params.r \
        else np.zeros((run.params.s, run.params.r, run.params.n), dtype=np.int64)
    strat = run.strategy(v)
    if strat is not None:
        ctx = run.ctx(v)
        grids = np.asarray(strat.cast_grids(ctx, grids), dtype=np.int64) % run.params.m
        run.record_cast(v, grids)
        if not strat.send(ctx, "ballots"):
            return None
    return grids


def vote_basic(params: ElectionParams, votes: Sequence[int],
               strategies: Mapping[PartyId, Strategy] | None = None, seed=0, *,
               monitor: OrderingMonitor | None = None,
               record_transcript: bool = False) -> ProtocolOutcome:
    """Protocol 1: voters share ballots among themselves and open the sum."""
    if params.t != 0:
        raise ValueError("VOTE-BASIC has no authorities; use t=0")
    run = _Run(1, params, votes, strategies, seed, monitor, record_transcript, voter_mesh)
    net, m, S = run.net, params.m, run.voters
    bits = _cast_bits(params)
    shape = (params.s, params.r, params.n)
    try:
        net.next_round()
        held = {w: np.zeros(shape, dtype=np.int64) for w in S}
        for v in S:
            grids = _grids_for(run, v)
            if grids is None:
                raise ProtocolAbort("ballots:missing", [v])
            shares = share_grid(grids, len(S), m, run.rngs[v])
            for j, w in enumerate(S):
                if w != v:
                    net.send_private(v, w, shares[j], bits, "ballots")
                held[w] += shares[j]
        sums = {}
        for w in S:
            sums[w] = run.tamper(w, "pre-sum", held[w] % m)
        opened = net.broadcast(S, sums, bits, "tally")
        grids = run.opened_sum(opened, S, shape, "tally")
        result = run.check_tallies(grids, params.n)
    except ProtocolAbort as exc:
        return run.outcome("abort", exc.phase, exc.culprits)
    return run.outcome("success", tally_=result)


def _publish(run: _Run, result: tuple) -> tuple:
    values = {a: result for a in run.authorities}
    return run.net.unanimous(run.authorities, run.voters, values, _tally_bits(run.params),
                             "publish")


def vote_authorities(params: ElectionParams, votes: Sequence[int],
                     strategies: Mapping[PartyId, Strategy] | None = None, seed=0, *,
                     monitor: OrderingMonitor | None = None,
                     record_transcript: bool = False) -> ProtocolOutcome:
    """Protocol 2: voters share ballots among t authorities, who open the sum."""
    if params.t < 1:
        raise ValueError("VOTE-AUTHORITIES needs t >= 1")
    run = _Run(2, params, votes, strategies, seed, monitor, record_transcript, authority_star)
    net, m, A = run.net, params.m, run.authorities
    bits = _cast_bits(params)
    shape = (params.s, params.r, params.n)
    try:
        net.next_round()
        held = {a: np.zeros(shape, dtype=np.int64) for a in A}
        for v in run.voters:
            grids = _grids_for(run, v)
            if grids is None:
                raise ProtocolAbort("ballots:missing", [v])
            shares = share_grid(grids, len(A), m, run.rngs[v])
            for j, a in enumerate(A):
                held[a] += net.send_private(v, a, shares[j], bits, "ballots")
        sums = {a: run.tamper(a, "pre-sum", held[a] % m) for a in A}
        opened = net.broadcast(A, sums, bits, "tally")
        grids = run.opened_sum(opened, A, shape, "tally")
        result = run.check_tallies(grids, params.n)
        result = tuple(_publish(run, result))
    except ProtocolAbort as exc:
        return run.outcome("abort", exc.phase, exc.culprits)
    return run.outcome("success", tally_=result)


def _mixed_radix(value: int, base: int, count: int) -> list[int]:
    digits = []
    for _ in range(count):
        value, d = divmod(value, base)
        digits.append(d)
    return digits


def vote_authorities_robust(params: ElectionParams, votes: Sequence[int],
                            strategies: Mapping[PartyId, Strategy] | None = None, seed=0, *,
                            monitor: OrderingMonitor | None = None,
                            record_transcript: bool = False) -> ProtocolOutcome:
    """Protocol 3: authorities verify shift-encrypted ballots and revoke bad
    voters instead of aborting."""
    if params.t < 1:
        raise ValueError("VOTE-AUTHORITIES-ROBUST needs t >= 1")
    run = _Run(3, params, votes, strategies, seed, monitor, record_transcript, authority_star)
    net, m, A, V = run.net, params.m, run.authorities, run.voters
    n, r, s, t = params.n, params.r, params.s, params.t
    bm = params.residue_bits
    revoked = [False] * n
    reasons: dict[int, str] = {}
    rejects: list[tuple[int, int]] = []
    run.details.update(revocation_reasons=reasons, opening_rejects=rejects)

    def revoke(i, why):
        if not revoked[i]:
            revoked[i] = True
            reasons[i] = why

    try:
        # step 1: s sets of 2s shift-encrypted ballots per voter
        net.next_round()
        shares: list[np.ndarray | None] = [None] * n
        shifts: list[np.ndarray | None] = [None] * n
        ballot_bits = 2 * r * n * bm * s * s
        for i, v in enumerate(V):
            rng = run.rngs[v]
            bins = rng.integers(n, size=s)
            sh = np.stack([rng.integers(r, size=(s, 2 * s)),
                           rng.integers(n, size=(s, 2 * s))], axis=-1)
            grids = np.zeros((s, 2 * s, r, n), dtype=np.int64)
            if 0 <= run.votes[i] < r:
                kk, bb = np.meshgrid(np.arange(s), np.arange(2 * s), indexing="ij")
                grids[kk, bb, (run.votes[i] + sh[..., 0]) % r, (bins[:, None] + sh[..., 1]) % n] = 1
            strat = run.strategy(v)
            if strat is not None:
                ctx = run.ctx(v)
                grids, sh = strat.robust_ballots(ctx, grids, sh, bins=bins)
                grids = np.asarray(grids, dtype=np.int64) % m
                run.record_cast(v, grids)
                if not strat.send(ctx, "ballots"):
                    revoke(i, "missing-ballots")
                    continue
            sv = share_grid(grids, t, m, rng)
            for j, a in enumerate(A):
                net.send_private(v, a, sv[j], ballot_bits, "ballots")
            shares[i], shifts[i] = sv, sh

        # step 2a: open a RANDOM half of every set
        C = comb(2 * s, s)
        pick = random_joint(A, C ** (n * s), net, run.rngs, "open-random")
        digits = _mixed_radix(pick, C, n * s)
        opened_idx = [[list(unrank_subset(digits[i * s + k], 2 * s, s)) for k in range(s)]
                      for i in range(n)]
        remaining_idx = [[sorted(set(range(2 * s)) - set(o)) for o in row] for row in opened_idx]
        active = [i for i in range(n) if shares[i] is not None]
        if active:
            ks = np.arange(s)[:, None]
            payload = {}
            for j, a in enumerate(A):
                mine = np.stack([shares[i][j][ks, np.array(opened_idx[i])] for i in active])
                payload[a] = run.tamper(a, "pre-opening", mine, voters=active)
            shape = (len(active), s, s, r, n)
            opened = net.broadcast(A, payload, len(active) * s * s * r * n * bm, "open-shares")
            opened_grids = run.opened_sum(opened, A, shape, "open-shares")
            run.details["opened_grids"] = dict(zip(active, opened_grids))
            valid = valid_ballot_mask(opened_grids)
            for row, i in enumerate(active):
                for k in range(s):
                    if not valid[row, k].all():
                        rejects.append((i, k))
                        revoke(i, "invalid-opened")

        # step 2b: shifts of the unopened ballots, then decryption
        net.next_round()
        shift_bits = s * s * ceil_log2(n * r)
        unshifted: list[np.ndarray | None] = [None] * n
        for i in active:
            v = V[i]
            rem = np.array(remaining_idx[i])
            codes = shifts[i][np.arange(s)[:, None], rem]
            codes = codes[..., 0] * n + codes[..., 1]
            strat = run.strategy(v)
            if strat is not None:
                if not strat.send(run.ctx(v), "shifts"):
                    codes = REFUSE
                else:
                    codes = strat.shift_message(run.ctx(v), codes)
            if codes is REFUSE:
                revoke(i, "missing-shifts")
                continue
            for a in A:
                net.send_private(v, a, codes, shift_bits, "shifts")
            codes = np.asarray(codes)
            if codes.shape != (s, s) or not np.issubdtype(codes.dtype, np.integer) \
                    or codes.min() < 0 or codes.max() >= r * n:
                revoke(i, "malformed-shifts")
                continue
            if revoked[i]:
                continue
            kept = shares[i][:, np.arange(s)[:, None], rem]          # (t, s, s, r, n)
            flat = kept.reshape(t, s * s, r, n)
            dec = unshift_many(flat, codes.reshape(-1) // n, codes.reshape(-1) % n)
            unshifted[i] = dec.reshape(t, s, s, r, n)

        # step 3: every unopened ballot must vote for the same candidate
        pools = ({a: DrawPool(run.rngs[a], C, n * r * s * s) for a in A}
                 if C <= SMALL_RANGE else run.rngs)
        for i in range(n):
            if revoked[i]:
                continue
            rows = unshifted[i].sum(axis=-1) % m                     # (t, s, s, r)
            for c in range(r):
                if revoked[i]:
                    break
                for rd in range(s):
                    inputs = np.concatenate([rows[:, rd, :, c], rows[:, (rd + 1) % s, :, c]],
                                            axis=1)
                    for j, a in enumerate(A):
                        inputs[j] = run.tamper(a, "pre-equality", inputs[j], voter=i,
                                               candidate=c, round=rd)
                    verdict = equality_test(inputs, m, s, A, net, pools, "equality")
                    if not verdict.equal:
                        revoke(i, "unequal")
                        break

        # step 4: announce revocation bits
        bits = []
        for i, v in enumerate(V):
            values = {a: int(revoked[i]) for a in A}
            bits.append(bool(net.unanimous(A, (v,) + A, values, 1, "revocation")))

        # choose one surviving ballot per set and run s parallel tallies
        sel = _mixed_radix(random_joint(A, s ** (n * s), net, run.rngs, "select-random"),
                           s, n * s)
        counted = [i for i in range(n) if not bits[i]]
        shape = (s, r, n)
        sums = {}
        for j, a in enumerate(A):
            acc = np.zeros(shape, dtype=np.int64)
            for i in counted:
                acc += unshifted[i][j, np.arange(s), [sel[i * s + k] for k in range(s)]]
            sums[a] = run.tamper(a, "pre-sum", acc % m)
        opened = net.broadcast(A, sums, r * n * bm * s, "tally")
        grids = run.opened_sum(opened, A, shape, "tally")
        result = run.check_tallies(grids, len(counted))
        result = tuple(_publish(run, result))
    except ProtocolAbort as exc:
        return run.outcome("abort", exc.phase, exc.culprits, revocations=tuple(revoked))
    return run.outcome("success", tally_=result, revocations=tuple(bits))


PROTOCOLS = {1: vote_basic, 2: vote_authorities, 3: vote_authorities_robust}


def run_protocol(protocol: int, params: ElectionParams, votes, strategies=None, seed=0,
                 **kwargs) -> ProtocolOutcome:
    try:
        fn = PROTOCOLS[int(protocol)]
    except (KeyError, ValueError):
        raise ValueError(f"unknown protocol {protocol!r}; choose 1, 2 or 3") from None
    return fn(params, votes, strategies, seed, **kwargs)


def vote_histogram(votes: Sequence[int], r: int) -> tuple:
    counts = Counter(votes)
    return tuple(counts.get(c, 0) for c in range(r))


def output_consistent(outcome: ProtocolOutcome, votes: Sequence[int],
                      corrupt_voters: Sequence[int] = ()) -> bool:
    """Is a successful tally explained by the counted honest votes plus one
    nonnegative vote per counted dishonest voter?"""
    if not outcome.succeeded:
        return True
    r = outcome.params.r
    revoked = outcome.revocations or (False,) * len(votes)
    corrupt = set(corrupt_voters)
    honest = [v for i, v in enumerate(votes) if i not in corrupt and not revoked[i]]
    extra = np.array(outcome.tally) - np.array(vote_histogram(honest, r))
    dishonest_counted = sum(1 for i in corrupt if not revoked[i])
    return bool((extra >= 0).all()) and int(extra.sum()) == dishonest_counted
