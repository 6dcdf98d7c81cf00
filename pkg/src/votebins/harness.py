"""Experiment driver: configs, Monte Carlo trials, oracle verdicts, audits."""

from __future__ import annotations

import json
import os
import sys
from collections import Counter, defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .adversaries import build_strategy
from .channels import OrderingMonitor, PartyId, voter
from .oracles import (complexity_prediction, negative_vote_detection,
                      oracle_empty_bin_probability, oracle_open_catch_probability)
from .protocols import ElectionParams, ProtocolOutcome, output_consistent, run_protocol
from .stats import RELATIONS, binomial_check, wilson_interval

WORKERS_ENV = "VOTEBINS_WORKERS"
FORMATS = ("records", "table")
ORACLE_KINDS = ("empty_bin", "open_catch", "open_survival", "negative_vote", "constant")


class ConfigError(ValueError):
    """A malformed experiment configuration."""


@dataclass(frozen=True)
class StrategyBinding:
    party: PartyId
    name: str
    params: dict = field(default_factory=dict)

    def build(self):
        return build_strategy(self.name, self.params)


@dataclass(frozen=True)
class OracleSpec:
    """A predicted probability for one event, checked at ``sigma`` sigmas.

    ``event`` is ``success``, ``abort``, ``abort:<phase>``, ``revoked`` or
    ``revoked:<reason>`` (both about the voter named by ``voter``).
    """

    kind: str
    event: str
    params: dict = field(default_factory=dict)
    relation: str = "equal"
    sigma: float = 3.0
    voter: int | None = None

    def predicted(self) -> tuple[Fraction, str]:
        p = self.params
        try:
            if self.kind == "empty_bin":
                return oracle_empty_bin_probability(int(p["n"])), "closed-form"
            if self.kind == "open_catch":
                return 1 - oracle_open_catch_probability(int(p["s"]), int(p["x"])), "closed-form"
            if self.kind == "open_survival":
                return oracle_open_catch_probability(int(p["s"]), int(p["x"])), "closed-form"
            if self.kind == "negative_vote":
                q = negative_vote_detection(int(p["n"]), int(p["r"]), p["honest_votes"],
                                            tuple(p["target_bin"]), tuple(p["extra_bin"]),
                                            int(p.get("extra", 2)))
                reps = int(p.get("repetitions", 1))
                return 1 - (1 - q) ** reps, "brute-force"
            if self.kind == "constant":
                return Fraction(str(p["value"])), "given"
        except KeyError as exc:
            raise ConfigError(f"oracle {self.kind!r} needs parameter {exc.args[0]!r}") from None
        raise ConfigError(f"unknown oracle kind {self.kind!r}; known: {ORACLE_KINDS}")


@dataclass(frozen=True)
class ExperimentConfig:
    protocol: int
    params: ElectionParams
    votes: tuple | str = "uniform"
    strategies: tuple[StrategyBinding, ...] = ()
    trials: int = 1
    seed: int = 0
    output: str | None = None
    format: str = "records"
    oracles: tuple[OracleSpec, ...] = ()

    def __post_init__(self):
        if self.protocol not in (1, 2, 3):
            raise ConfigError(f"protocol must be 1, 2 or 3, got {self.protocol!r}")
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}")
        if isinstance(self.votes, str):
            if self.votes != "uniform":
                raise ConfigError("votes must be a list of candidate indices or 'uniform'")
        elif len(self.votes) != self.params.n:
            raise ConfigError(f"{len(self.votes)} votes given for n={self.params.n}")
        for o in self.oracles:
            if o.relation not in RELATIONS:
                raise ConfigError(f"oracle relation must be one of {RELATIONS}")

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "ExperimentConfig":
        data = dict(data)
        known = {"protocol", "n", "r", "t", "s", "trials", "seed", "votes", "strategies",
                 "broadcast_realization", "output", "oracles"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            protocol = int(data["protocol"])
            n, r = int(data["n"]), int(data["r"])
        except KeyError as exc:
            raise ConfigError(f"missing config key {exc.args[0]!r}") from None
        t = int(data.get("t", 0 if protocol == 1 else 1))
        try:
            params = ElectionParams(n, r, t, int(data.get("s", 1)),
                                    data.get("broadcast_realization", "ideal"))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        votes = data.get("votes", "uniform")
        if not isinstance(votes, str):
            votes = tuple(int(v) for v in votes)
        bindings = []
        for entry in data.get("strategies", ()):
            try:
                party = PartyId.parse(entry["party"])
                binding = StrategyBinding(party, entry["name"], dict(entry.get("params", {})))
                binding.build()
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"bad strategy binding {entry!r}: {exc}") from None
            bindings.append(binding)
        output = data.get("output", {})
        if isinstance(output, str):
            output = {"path": output}
        oracles = []
        for entry in data.get("oracles", ()):
            entry = dict(entry)
            try:
                oracles.append(OracleSpec(entry.pop("kind"), entry.pop("event"),
                                          dict(entry.pop("params", {})),
                                          entry.pop("relation", "equal"),
                                          float(entry.pop("sigma", 3.0)),
                                          entry.pop("voter", None)))
            except KeyError as exc:
                raise ConfigError(f"oracle entry missing {exc.args[0]!r}") from None
            if entry:
                raise ConfigError(f"unknown oracle keys: {sorted(entry)}")
        return cls(protocol, params, votes, tuple(bindings), int(data.get("trials", 1)),
                   int(data.get("seed", 0)), output.get("path"),
                   output.get("format", "records"), tuple(oracles))

    @classmethod
    def load(cls, path: str | os.PathLike) -> "ExperimentConfig":
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        return cls.from_mapping(data)

    def replace(self, **changes) -> "ExperimentConfig":
        fields = {k: getattr(self, k) for k in self.__dataclass_fields__}
        fields.update(changes)
        return ExperimentConfig(**fields)

    def describe(self) -> dict:
        return {
            "protocol": self.protocol,
            "params": asdict(self.params),
            "votes": list(self.votes) if not isinstance(self.votes, str) else self.votes,
            "strategies": [{"party": str(b.party), "name": b.name, "params": b.params}
                           for b in self.strategies],
            "trials": self.trials,
            "seed": self.seed,
        }


def trial_seed(seed: int, k: int) -> list[int]:
    return [int(seed), int(k)]


def trial_votes(config: ExperimentConfig, k: int) -> list[int]:
    if not isinstance(config.votes, str):
        return list(config.votes)
    rng = np.random.default_rng([config.seed, k, 1])
    return [int(v) for v in rng.integers(config.params.r, size=config.params.n)]


@dataclass
class TrialResult:
    index: int
    outcome: ProtocolOutcome
    votes: list
    consistent: bool
    callbacks: int
    violations: int

    def record(self) -> dict:
        rec = {"trial": self.index, **self.outcome.to_record(), "votes": self.votes,
               "consistent": self.consistent}
        rec.pop("params")
        return rec


def run_trial(config: ExperimentConfig, k: int, record_transcript: bool = False) -> TrialResult:
    votes = trial_votes(config, k)
    strategies = {b.party: b.build() for b in config.strategies}
    monitor = OrderingMonitor()
    out = run_protocol(config.protocol, config.params, votes, strategies,
                       seed=trial_seed(config.seed, k), monitor=monitor,
                       record_transcript=record_transcript)
    corrupt = [b.party.index for b in config.strategies if b.party.role == "voter"]
    return TrialResult(k, out, votes, output_consistent(out, votes, corrupt),
                       monitor.callbacks, monitor.violations)


def _run_chunk(args) -> list[dict]:
    config, ks = args
    return [_light(run_trial(config, k)) for k in ks]


def _light(res: TrialResult) -> dict:
    """Picklable summary of a trial (ledgers and transcripts stay behind)."""
    return {"record": res.record(), "callbacks": res.callbacks,
            "violations": res.violations}


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None


def _event_hit(rec: dict, event: str, voter_index: int | None) -> bool:
    if event == "success":
        return rec["status"] == "success"
    if event == "abort":
        return rec["status"] == "abort"
    if event.startswith("abort:"):
        phase = rec["phase"] or ""
        want = event[len("abort:"):]
        return rec["status"] == "abort" and (phase == want or phase.startswith(want + ":"))
    if event == "revoked" or event.startswith("revoked:"):
        revs = rec["revocations"]
        if revs is None or voter_index is None:
            return False
        if event == "revoked":
            return bool(revs[voter_index])
        reason = rec.get("revocation_reasons", {}).get(str(voter_index))
        return reason == event[len("revoked:"):]
    raise ConfigError(f"unknown event {event!r}")


@dataclass
class OracleVerdict:
    spec: OracleSpec
    predicted: Fraction
    provenance: str
    hits: int
    trials: int
    passed: bool
    sigma: float

    def as_dict(self) -> dict:
        return {"kind": self.spec.kind, "event": self.spec.event,
                "params": self.spec.params, "relation": self.spec.relation,
                "predicted": str(self.predicted), "predicted_float": float(self.predicted),
                "provenance": self.provenance, "hits": self.hits, "trials": self.trials,
                "observed": self.hits / self.trials, "sigma": self.sigma,
                "k": self.spec.sigma, "passed": self.passed}


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    records: list[dict]
    callbacks: int
    violations: int
    verdicts: list[OracleVerdict] = field(default_factory=list)

    @property
    def trials(self) -> int:
        return len(self.records)

    def status_counts(self) -> Counter:
        return Counter(r["status"] for r in self.records)

    def phase_counts(self) -> Counter:
        return Counter(r["phase"] for r in self.records if r["status"] == "abort")

    def frequency(self, event: str, voter_index: int | None = None) -> dict:
        hits = sum(_event_hit(r, event, voter_index) for r in self.records)
        lo, hi = wilson_interval(hits, self.trials)
        return {"hits": hits, "trials": self.trials, "frequency": hits / self.trials,
                "wilson_3sigma": [lo, hi]}

    def mean_ledger(self) -> dict:
        sums: dict = defaultdict(int)
        for r in self.records:
            for k, v in r["ledger"].items():
                sums[k] += v
        return {k: v / self.trials for k, v in sorted(sums.items())}

    @property
    def inconsistent(self) -> int:
        return sum(not r["consistent"] for r in self.records)

    @property
    def oracle_passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    @property
    def passed(self) -> bool:
        # inconsistent tallies are a measured quantity under attack, not a failure
        return self.oracle_passed and self.violations == 0

    def summary(self) -> dict:
        return {
            "type": "summary",
            "config": self.config.describe(),
            "trials": self.trials,
            "status": dict(sorted(self.status_counts().items())),
            "abort_phases": dict(sorted(self.phase_counts().items())),
            "frequencies": {e: self.frequency(e) for e in ("success", "abort")},
            "mean_ledger": self.mean_ledger(),
            "ordering": {"callbacks": self.callbacks, "violations": self.violations},
            "inconsistent_trials": self.inconsistent,
            "oracles": [v.as_dict() for v in self.verdicts],
            "passed": self.passed,
        }

    def to_records(self) -> str:
        lines = [json.dumps({"type": "trial", **r}, sort_keys=True) for r in self.records]
        lines.append(json.dumps(self.summary(), sort_keys=True))
        return "\n".join(lines) + "\n"

    def to_table(self) -> str:
        s = self.summary()
        rows = [("trials", str(self.trials))]
        for status, count in s["status"].items():
            rows.append((f"status {status}", f"{count} ({count / self.trials:.4f})"))
        for phase, count in s["abort_phases"].items():
            rows.append((f"abort at {phase}", str(count)))
        for key, val in s["mean_ledger"].items():
            rows.append((f"mean {key}", f"{val:g}"))
        rows.append(("adversary callbacks", str(self.callbacks)))
        rows.append(("ordering violations", str(self.violations)))
        rows.append(("inconsistent tallies", str(self.inconsistent)))
        for v in self.verdicts:
            d = v.as_dict()
            rows.append((f"oracle {d['kind']} [{d['event']}]",
                         f"observed {d['observed']:.5f} {d['relation']} predicted "
                         f"{d['predicted']} ({d['predicted_float']:.5f}, {d['provenance']}) "
                         f"-> {'PASS' if d['passed'] else 'FAIL'}"))
        rows.append(("verdict", "PASS" if self.passed else "FAIL"))
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k.ljust(width)}  {v}" for k, v in rows) + "\n"

    def render(self, fmt: str | None = None) -> str:
        fmt = fmt or self.config.format
        return self.to_table() if fmt == "table" else self.to_records()


def run_experiment(config: ExperimentConfig, workers: int | None = None) -> ExperimentReport:
    """Run every trial; results are identical for any worker count."""
    workers = workers or default_workers()
    ks = list(range(config.trials))
    if workers > 1 and config.trials > 1:
        chunks = [(config, ks[w::workers]) for w in range(workers)]
        with ProcessPoolExecutor(workers) as pool:
            parts = [item for chunk in pool.map(_run_chunk, chunks) for item in chunk]
    else:
        parts = _run_chunk((config, ks))
    parts.sort(key=lambda d: d["record"]["trial"])
    report = ExperimentReport(config, [d["record"] for d in parts],
                              sum(d["callbacks"] for d in parts),
                              sum(d["violations"] for d in parts))
    for spec in config.oracles:
        predicted, provenance = spec.predicted()
        hits = sum(_event_hit(r, spec.event, spec.voter) for r in report.records)
        check = binomial_check(hits, report.trials, predicted, spec.sigma, spec.relation)
        report.verdicts.append(OracleVerdict(spec, predicted, provenance, hits, report.trials,
                                             check.passed, check.sigma))
    return report


# ---------------------------------------------------------------- audits

@dataclass(frozen=True)
class AuditLine:
    channel: str
    item: str
    predicted: Any
    observed: Any

    @property
    def ok(self) -> bool:
        return self.predicted == self.observed


@dataclass
class AuditTable:
    protocol: int
    params: ElectionParams
    lines: list[AuditLine]

    @property
    def passed(self) -> bool:
        return all(line.ok for line in self.lines)

    def mismatches(self) -> list[AuditLine]:
        return [line for line in self.lines if not line.ok]

    def to_table(self) -> str:
        p = self.params
        head = (f"protocol {self.protocol}  n={p.n} r={p.r} t={p.t} s={p.s} "
                f"broadcast={p.broadcast_realization}")
        rows = [("channel", "item", "predicted", "observed", "")]
        rows += [(l.channel, l.item, str(l.predicted), str(l.observed),
                  "ok" if l.ok else "MISMATCH") for l in self.lines]
        widths = [max(len(r[i]) for r in rows) for i in range(5)]
        body = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
        return "\n".join([head] + body) + "\n"

    def to_records(self) -> str:
        out = []
        for l in self.lines:
            out.append(json.dumps({"protocol": self.protocol, "params": asdict(self.params),
                                   "channel": l.channel, "item": l.item,
                                   "predicted": _jsonable(l.predicted),
                                   "observed": _jsonable(l.observed), "ok": l.ok},
                                  sort_keys=True))
        return "\n".join(out) + "\n"


def _jsonable(x):
    if isinstance(x, tuple):
        return [_jsonable(v) for v in x]
    return x


def _per_sender_private(ledger, phase) -> dict:
    out = defaultdict(list)
    for _, sender, receiver, bits, ph in ledger.private:
        if ph == phase:
            out[sender].append((receiver, bits))
    return out


def audit_complexity(protocol: int, params: ElectionParams, seed=0) -> AuditTable:
    """Run one honest trial and diff its ledger against the closed forms."""
    out = run_protocol(protocol, params, [i % params.r for i in range(params.n)], seed=seed)
    if not out.succeeded:
        raise RuntimeError(f"honest audit run aborted at {out.phase}")
    ledger = out.ledger
    pred = complexity_prediction(protocol, params.n, params.r, params.t, params.s)
    cr = params.broadcast_realization == "commit-reveal"
    digest_bits, nonce_bits = 256, 128
    lines: list[AuditLine] = []
    voters = [voter(i) for i in range(params.n)]
    group = voters if protocol == 1 else [PartyId("authority", j) for j in range(params.t)]

    private_phases = {ph for *_, ph in ledger.private}
    for phase in sorted(private_phases | set(pred["private"])):
        want = pred["private"].get(phase)
        per = _per_sender_private(ledger, phase)
        observed = set()
        for v in voters:
            msgs = per.get(v, [])
            receivers = {rcv for rcv, _ in msgs}
            if len(receivers) != len(msgs):
                observed.add(("duplicate receivers",))
            observed.add((len(msgs), tuple(sorted({b for _, b in msgs}))))
        extra = set(per) - set(voters)
        if extra:
            observed.add(("non-voter senders", len(extra)))
        expected = {(want[0], (want[1],))} if want else None
        lines.append(AuditLine("private", f"{phase}: (messages per voter, bits)",
                               _one(expected), _one(observed)))

    kinds = ("commit", "reveal") if cr else ("simultaneous",)
    phases = {ph for *_, ph in ledger.broadcasts}
    for phase in sorted(phases | set(pred["broadcast"])):
        want = pred["broadcast"].get(phase)
        for kind in kinds:
            events = [e for e in ledger.broadcasts if e[4] == phase and e[1] == kind]
            sizes = tuple(sorted({e[3] for e in events}))
            parties = {e[2] for e in events}
            observed = (len(events), sizes, parties == {tuple(group)})
            if want is None:
                expected = None
            else:
                bits = {"simultaneous": want[1], "commit": digest_bits,
                        "reveal": want[1] + nonce_bits}[kind]
                expected = (want[0], (bits,) if want[0] else (), True)
            label = phase if kind == "simultaneous" else f"{phase} [{kind}]"
            lines.append(AuditLine("broadcast", f"{label}: (events, bits each, right group)",
                                   expected, observed))
    if "broadcast_events" in pred:
        count = sum(1 for e in ledger.broadcasts if e[1] in ("simultaneous", "commit"))
        lines.append(AuditLine("broadcast", "total simultaneous broadcasts",
                               pred["broadcast_events"], count))

    uphases = {ph for *_, ph in ledger.unanimous}
    for phase in sorted(uphases | set(pred["unanimous"])):
        want = pred["unanimous"].get(phase)
        events = [e for e in ledger.unanimous if e[4] == phase]
        observed = (len(events), tuple(sorted({e[3] for e in events})),
                    tuple(sorted({len(e[2]) for e in events})),
                    all(e[1] == tuple(group) for e in events))
        expected = None if want is None else (want[0], (want[1],), (want[2],), True)
        lines.append(AuditLine("unanimous", f"{phase}: (events, bits, receivers, senders ok)",
                               expected, observed))

    if pred["rounds"] is not None:
        extra_rounds = sum(pred["broadcast"][ph][0] for ph in pred["broadcast"]) if cr else 0
        expected = pred["rounds"] + extra_rounds + (1 if protocol == 2 else 0)
        lines.append(AuditLine("rounds", "rounds including publication", expected,
                               ledger.rounds))
    return AuditTable(protocol, params, lines)


def _one(values):
    if values is None:
        return None
    return next(iter(values)) if len(values) == 1 else tuple(sorted(values, key=str))


def audit_grid(protocols: Sequence[int] = (1, 2, 3), ns=range(2, 6), rs=range(1, 4),
               ts=range(1, 4), ss=range(1, 5), realization: str = "ideal"):
    """Yield an audit table for every grid point; protocol 1 ignores ``ts``."""
    for protocol in protocols:
        for n in ns:
            for r in rs:
                for t in ([0] if protocol == 1 else ts):
                    for s in ss:
                        yield audit_complexity(protocol, ElectionParams(n, r, t, s, realization))


def write_output(text: str, path: str | os.PathLike | None):
    if path is None:
        sys.stdout.write(text)
        return
    Path(path).write_text(text)
