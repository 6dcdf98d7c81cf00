"""Simulated communication substrate.

Private authenticated channels, the simultaneous broadcast channel (ideal and
commit-reveal realisations) and the unanimity-checked broadcast, together with
bit-exact traffic accounting and an optional line-delimited transcript.
"""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Mapping, NamedTuple, Sequence

import numpy as np


class PartyId(NamedTuple):
    role: str
    index: int

    def __str__(self):
        return f"{'V' if self.role == 'voter' else 'A'}{self.index}"

    @classmethod
    def parse(cls, text: str) -> "PartyId":
        roles = {"V": "voter", "A": "authority"}
        if not text or text[0] not in roles or not text[1:].isdigit():
            raise ValueError(f"cannot parse party id {text!r}")
        return cls(roles[text[0]], int(text[1:]))


def voter(i: int) -> PartyId:
    return PartyId("voter", i)


def authority(i: int) -> PartyId:
    return PartyId("authority", i)


class _Refusal:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "REFUSE"


REFUSE = _Refusal()


class ProtocolAbort(Exception):
    """Raised inside a run when the protocol must abort."""

    def __init__(self, phase: str, culprits: Iterable = ()):
        self.phase = phase
        self.culprits = tuple(sorted(culprits))
        who = ", ".join(map(str, self.culprits)) or "unknown"
        super().__init__(f"abort at {phase} (culprits: {who})")


class TopologyViolation(RuntimeError):
    """A message was sent over a channel the protocol does not have."""


@dataclass
class BroadcastOutcome:
    values: dict | None
    refusers: tuple = ()
    cheaters: tuple = ()

    @property
    def aborted(self) -> bool:
        return self.values is None

    @property
    def culprits(self) -> tuple:
        return tuple(sorted(set(self.refusers) | set(self.cheaters)))


def encode_payload(x: Any) -> bytes:
    """Canonical byte encoding used for commitments and transcript digests."""
    if isinstance(x, np.ndarray):
        arr = np.ascontiguousarray(x, dtype="<i8")
        return b"A" + repr(arr.shape).encode() + arr.tobytes()
    if isinstance(x, (bool, np.bool_)):
        return b"I" + str(int(x)).encode()
    if isinstance(x, (int, np.integer)):
        return b"I" + str(int(x)).encode()
    if isinstance(x, (tuple, list)):
        return b"L" + str(len(x)).encode() + b":" + b"|".join(encode_payload(v) for v in x)
    if x is None:
        return b"N"
    raise TypeError(f"cannot encode payload of type {type(x).__name__}")


def payload_digest(x: Any) -> str:
    return hashlib.blake2b(encode_payload(x), digest_size=16).hexdigest()


class TrafficLedger:
    """Message and bit counts per channel class.

    ``private`` holds ``(round, sender, receiver, bits, phase)``;
    ``broadcasts`` holds ``(round, kind, participants, bits_each, phase)`` with
    kind one of ``simultaneous``, ``commit``, ``reveal``;
    ``unanimous`` holds ``(round, senders, receivers, bits_each, phase)``.
    """

    def __init__(self):
        self.private: list[tuple] = []
        self.broadcasts: list[tuple] = []
        self.unanimous: list[tuple] = []
        self.rounds = 0

    def record_private(self, rnd, sender, receiver, bits, phase):
        self.private.append((rnd, sender, receiver, bits, phase))

    def record_broadcast(self, rnd, kind, participants, bits_each, phase):
        self.broadcasts.append((rnd, kind, tuple(participants), bits_each, phase))

    def record_unanimous(self, rnd, senders, receivers, bits_each, phase):
        self.unanimous.append((rnd, tuple(senders), tuple(receivers), bits_each, phase))

    def private_profile(self) -> Counter:
        return Counter((s, r, b) for _, s, r, b, _ in self.private)

    def broadcast_profile(self, kind: str | None = None) -> Counter:
        return Counter((p, b) for _, k, p, b, _ in self.broadcasts if kind in (None, k))

    def unanimous_profile(self) -> Counter:
        return Counter((s, r, b) for _, s, r, b, _ in self.unanimous)

    def totals(self) -> dict:
        return {
            "rounds": self.rounds,
            "private_messages": len(self.private),
            "private_bits": sum(b for *_, b, _ in self.private),
            "broadcast_events": len(self.broadcasts),
            "broadcast_bits": sum(len(p) * b for _, _, p, b, _ in self.broadcasts),
            "unanimous_events": len(self.unanimous),
            "unanimous_bits": sum(len(s) * b for _, s, _, b, _ in self.unanimous),
        }


@dataclass
class Transcript:
    header: dict = field(default_factory=dict)
    records: list = field(default_factory=list)

    def add(self, rnd, kind, phase, sender, receivers, bits, payload):
        self.records.append({
            "seq": len(self.records),
            "round": rnd,
            "kind": kind,
            "phase": phase,
            "sender": str(sender),
            "receivers": [str(p) for p in receivers],
            "bits": int(bits),
            "digest": payload_digest(payload),
        })

    def to_jsonl(self) -> str:
        lines = [json.dumps({"header": self.header}, sort_keys=True)]
        lines += [json.dumps(rec, sort_keys=True) for rec in self.records]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "Transcript":
        lines = [json.loads(line) for line in text.splitlines() if line.strip()]
        if not lines or "header" not in lines[0]:
            raise ValueError("transcript is missing its header line")
        return cls(lines[0]["header"], lines[1:])

    def first_divergence(self, other: "Transcript") -> dict | None:
        """First record (of ``self``) that differs from ``other``, or None."""
        keys = ("round", "kind", "phase", "sender", "receivers", "bits", "digest")
        for mine, theirs in zip(self.records, other.records):
            if any(mine.get(k) != theirs.get(k) for k in keys):
                return mine
        if len(self.records) != len(other.records):
            longer = self.records if len(self.records) > len(other.records) else other.records
            return longer[min(len(self.records), len(other.records))]
        return None


class CollusionView:
    """Append-only log shared by every corrupt party.

    Entries are ``(round, kind, phase, sender, payload)``.  Honest broadcast
    inputs only reach the log after the broadcast has been released.
    """

    def __init__(self):
        self.log: list[tuple] = []
        self._released: dict[int, set] = {}

    def append(self, rnd, kind, phase, sender, payload):
        self.log.append((rnd, kind, phase, sender, payload))
        if kind == "broadcast":
            self._released.setdefault(rnd, set()).add(sender)

    def released_in(self, rnd: int) -> set:
        """Senders whose broadcast inputs for round ``rnd`` are in the log."""
        return self._released.get(rnd, set())

    def entries(self, kind: str | None = None, phase: str | None = None) -> list[tuple]:
        return [e for e in self.log
                if (kind is None or e[1] == kind) and (phase is None or e[2] == phase)]


class OrderingMonitor:
    """Counts adversary input callbacks and flags any that could have seen a
    same-round honest broadcast input."""

    def __init__(self):
        self.callbacks = 0
        self.violations = 0

    def check(self, view: CollusionView | None, rnd: int, honest: Iterable, released: bool):
        self.callbacks += 1
        leaked = released or (view is not None and
                              not view.released_in(rnd).isdisjoint(honest))
        if leaked:
            self.violations += 1

    def merge(self, other: "OrderingMonitor"):
        self.callbacks += other.callbacks
        self.violations += other.violations


@dataclass
class CommitScheme:
    digest_bits: int = 256
    nonce_bits: int = 128

    def __post_init__(self):
        if self.digest_bits % 8 or not 8 <= self.digest_bits <= 512:
            raise ValueError("digest_bits must be a multiple of 8 in [8, 512]")
        if self.nonce_bits % 8 or self.nonce_bits < 8:
            raise ValueError("nonce_bits must be a positive multiple of 8")

    def commit(self, value: Any, nonce: bytes) -> bytes:
        h = hashlib.blake2b(digest_size=self.digest_bits // 8)
        h.update(encode_payload(value))
        h.update(nonce)
        return h.digest()

    def verify(self, digest: bytes, value: Any, nonce: bytes) -> bool:
        return self.commit(value, nonce) == digest


def _resolve(inputs: Mapping, participants: tuple, monitor, view, rnd) -> dict:
    """Fix every input: honest ones are sealed first, deferred ones are then
    obtained from their callbacks."""
    deferred = [p for p in participants if callable(inputs[p])]
    if not deferred:
        return inputs
    honest = [p for p in participants if p not in deferred]
    sealed = {p: inputs[p] for p in honest}
    for p in deferred:
        if monitor is not None:
            monitor.check(view, rnd, honest, released=False)
        sealed[p] = inputs[p]()
    return sealed


def simultaneous_broadcast(participants: Sequence, inputs: Mapping, *,
                           ledger: TrafficLedger | None = None, bits: int = 0,
                           phase: str = "", rnd: int = 0,
                           monitor: OrderingMonitor | None = None,
                           view: CollusionView | None = None) -> BroadcastOutcome:
    """Ideal simultaneous broadcast.

    ``inputs`` maps each participant to its value, ``REFUSE``, or a
    zero-argument callable (an adversary's deferred input).  Callables run
    before any value is released, so they can only see earlier rounds.
    """
    participants = tuple(participants)
    missing = [p for p in participants if p not in inputs]
    if missing:
        raise ValueError(f"no input for {', '.join(map(str, missing))}")
    values = _resolve(inputs, participants, monitor, view, rnd)
    if ledger is not None:
        ledger.record_broadcast(rnd, "simultaneous", participants, bits, phase)
    refusers = tuple(p for p in participants if values[p] is REFUSE)
    if refusers:
        return BroadcastOutcome(None, refusers=refusers)
    return BroadcastOutcome(values)


def commit_reveal_broadcast(participants: Sequence, inputs: Mapping, *,
                            scheme: CommitScheme | None = None,
                            nonce_rng: np.random.Generator,
                            openings: Mapping | None = None,
                            ledger: TrafficLedger | None = None, bits: int = 0,
                            phase: str = "", rnd: int = 0,
                            monitor: OrderingMonitor | None = None,
                            view: CollusionView | None = None) -> BroadcastOutcome:
    """Simultaneous broadcast realised as commit-then-open.

    ``openings`` optionally maps a participant to ``f(committed) -> opened``,
    letting an adversary open something other than what it committed to.
    The ledger gets a commit event and a reveal event.
    """
    scheme = scheme or CommitScheme()
    participants = tuple(participants)
    values = _resolve(inputs, participants, monitor, view, rnd)
    honest = [p for p in participants if not callable(inputs[p])]
    refusers = tuple(p for p in participants if values[p] is REFUSE)
    if ledger is not None:
        ledger.record_broadcast(rnd, "commit", participants, scheme.digest_bits, phase)
    if refusers:
        return BroadcastOutcome(None, refusers=refusers)
    nonces = {p: nonce_rng.bytes(scheme.nonce_bits // 8) for p in participants}
    digests = {p: scheme.commit(values[p], nonces[p]) for p in participants}
    if view is not None:
        for p in participants:
            view.append(rnd, "commitment", phase, p, digests[p])
    opened = dict(values)
    for p, f in (openings or {}).items():
        if p in opened:
            if monitor is not None:
                monitor.check(view, rnd + 1, honest, released=False)
            opened[p] = f(values[p])
    if ledger is not None:
        ledger.record_broadcast(rnd + 1, "reveal", participants, bits + scheme.nonce_bits, phase)
    refusers = tuple(p for p in participants if opened[p] is REFUSE)
    if refusers:
        return BroadcastOutcome(None, refusers=refusers)
    cheaters = tuple(p for p in participants
                     if not scheme.verify(digests[p], opened[p], nonces[p]))
    if cheaters:
        return BroadcastOutcome(None, cheaters=cheaters)
    return BroadcastOutcome(opened)


def _same(a, b) -> bool:
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        return np.array_equal(np.asarray(a), np.asarray(b))
    return a == b


def broadcast_unanimous(senders: Sequence, receivers: Sequence, values: Mapping, *,
                        ledger: TrafficLedger | None = None, bits: int = 0,
                        phase: str = "", rnd: int = 0):
    """Ideal broadcast of one value from several senders; aborts unless every
    sender sent the same value."""
    senders = tuple(senders)
    if ledger is not None:
        ledger.record_unanimous(rnd, senders, receivers, bits, phase)
    sent = [values.get(p, REFUSE) for p in senders]
    refusers = [p for p, v in zip(senders, sent) if v is REFUSE]
    if refusers:
        raise ProtocolAbort(phase, refusers)
    first = sent[0]
    if not all(_same(first, v) for v in sent[1:]):
        raise ProtocolAbort(phase)
    return first


Topology = Callable[[PartyId, PartyId], bool]


def voter_mesh(sender: PartyId, receiver: PartyId) -> bool:
    return sender.role == "voter" and receiver.role == "voter" and sender != receiver


def authority_star(sender: PartyId, receiver: PartyId) -> bool:
    if sender == receiver or receiver.role != "authority":
        return False
    return sender.role in ("voter", "authority")


class Network:
    """Per-run channel state: topology, ledger, transcript and the hooks that
    route corrupt parties' inputs through their strategies."""

    def __init__(self, topology: Topology, *, realization: str = "ideal",
                 adversary=None, monitor: OrderingMonitor | None = None,
                 transcript: Transcript | None = None,
                 nonce_rng: np.random.Generator | None = None,
                 scheme: CommitScheme | None = None):
        if realization not in ("ideal", "commit-reveal"):
            raise ValueError(f"unknown broadcast realization {realization!r}")
        if realization == "commit-reveal" and nonce_rng is None:
            raise ValueError("commit-reveal broadcast needs a nonce source")
        self.topology = topology
        self.realization = realization
        self.adversary = adversary
        self.monitor = monitor
        self.transcript = transcript
        self.nonce_rng = nonce_rng
        self.scheme = scheme or CommitScheme()
        self.ledger = TrafficLedger()
        self.round = 0

    @property
    def view(self) -> CollusionView | None:
        return self.adversary.view if self.adversary is not None else None

    def corrupt(self, party) -> bool:
        return self.adversary is not None and party in self.adversary.corrupt

    def next_round(self) -> int:
        self.round += 1
        self.ledger.rounds = self.round
        return self.round

    def send_private(self, sender: PartyId, receiver: PartyId, payload, bits: int,
                     phase: str = ""):
        if not self.topology(sender, receiver):
            raise TopologyViolation(f"no private channel {sender} -> {receiver}")
        self.ledger.record_private(self.round, sender, receiver, bits, phase)
        if self.transcript is not None:
            self.transcript.add(self.round, "private", phase, sender, [receiver], bits, payload)
        if self.corrupt(receiver) and not self.corrupt(sender):
            self.view.append(self.round, "private", phase, sender, payload)
        return payload

    def broadcast(self, participants: Sequence, values: Mapping, bits: int,
                  phase: str) -> dict:
        """Simultaneous broadcast of ``values``; corrupt participants' entries
        are replaced by their strategy's choice.  Raises ProtocolAbort."""
        participants = tuple(participants)
        inputs = dict(values)
        openings = {}
        if self.adversary is not None:
            for p in participants:
                if p in self.adversary.corrupt:
                    inputs[p] = self.adversary.deferred_input(p, phase, values[p])
                    if self.realization == "commit-reveal":
                        opener = self.adversary.opener(p, phase)
                        if opener is not None:
                            openings[p] = opener
        rnd = self.next_round()
        if self.realization == "ideal":
            out = simultaneous_broadcast(participants, inputs, ledger=self.ledger, bits=bits,
                                         phase=phase, rnd=rnd, monitor=self.monitor,
                                         view=self.view)
        else:
            out = commit_reveal_broadcast(participants, inputs, scheme=self.scheme,
                                          nonce_rng=self.nonce_rng, openings=openings,
                                          ledger=self.ledger, bits=bits, phase=phase, rnd=rnd,
                                          monitor=self.monitor, view=self.view)
            rnd = self.next_round()
        if out.aborted:
            raise ProtocolAbort(f"{phase}:{'commit-mismatch' if out.cheaters else 'refusal'}",
                                out.culprits)
        if self.transcript is not None:
            for p in participants:
                self.transcript.add(rnd, "broadcast", phase, p, participants, bits, out.values[p])
        view = self.view
        if view is not None:
            for p in participants:
                view.append(rnd, "broadcast", phase, p, out.values[p])
        return out.values

    def unanimous(self, senders: Sequence, receivers: Sequence, values: Mapping, bits: int,
                  phase: str):
        sent = dict(values)
        if self.adversary is not None:
            for p in senders:
                if p in self.adversary.corrupt:
                    sent[p] = self.adversary.announce(p, phase, values[p])
        rnd = self.next_round()
        if self.transcript is not None:
            for p in senders:
                v = sent.get(p, REFUSE)
                self.transcript.add(rnd, "unanimous", phase, p, receivers, bits,
                                    None if v is REFUSE else v)
        result = broadcast_unanimous(senders, receivers, sent, ledger=self.ledger, bits=bits,
                                     phase=phase, rnd=rnd)
        if self.view is not None:
            self.view.append(rnd, "unanimous", phase, None, result)
        return result
