"""``votebins`` command line: run, audit, oracle, replay."""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

from .channels import Transcript
from .harness import (FORMATS, ConfigError, ExperimentConfig, audit_complexity, audit_grid,
                      run_experiment, run_trial, write_output)
from .oracles import (EMPTY_BIN_BOUND, equal_partition_fraction, negative_vote_detection,
                      open_catch_brute_force, oracle_empty_bin_probability,
                      oracle_open_catch_probability)
from .protocols import ElectionParams, run_protocol
from .adversaries import build_strategy
from .channels import PartyId

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_ORACLE = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


class _UsageError(Exception):
    pass


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="votebins", description="Secret-shared voting protocol simulator.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="execute an experiment config")
    run.add_argument("--config", required=True, type=Path)
    run.add_argument("--trials", type=_positive)
    run.add_argument("--seed", type=_u64)
    run.add_argument("--protocol", type=int, choices=(1, 2, 3))
    run.add_argument("--out", type=Path)
    run.add_argument("--format", choices=FORMATS)
    run.add_argument("--transcript", type=Path,
                     help="write the transcript of trial 0 to this file")
    run.add_argument("--workers", type=_positive)

    audit = sub.add_parser("audit", help="diff an honest run's traffic against closed forms")
    audit.add_argument("--config", type=Path)
    audit.add_argument("--protocol", type=int, choices=(1, 2, 3))
    audit.add_argument("--n", type=int, default=3)
    audit.add_argument("--r", type=int, default=2)
    audit.add_argument("--t", type=int)
    audit.add_argument("--s", type=int, default=1)
    audit.add_argument("--seed", type=_u64, default=0)
    audit.add_argument("--broadcast", choices=("ideal", "commit-reveal"), default="ideal")
    audit.add_argument("--grid", action="store_true",
                       help="audit n 2..5, r 1..3, t 1..3, s 1..4")
    audit.add_argument("--out", type=Path)
    audit.add_argument("--format", choices=FORMATS, default="table")

    oracle = sub.add_parser("oracle", help="print exact probabilities")
    osub = oracle.add_subparsers(dest="oracle", required=True, parser_class=_Parser)
    eb = osub.add_parser("empty-bin")
    eb.add_argument("--n", type=int, required=True)
    oc = osub.add_parser("open-catch")
    oc.add_argument("--s", type=int, required=True)
    oc.add_argument("--x", type=int, required=True)
    nv = osub.add_parser("negative-vote")
    nv.add_argument("--n", type=int, required=True)
    nv.add_argument("--r", type=int, default=1)
    nv.add_argument("--votes", required=True, help="comma-separated honest votes")
    nv.add_argument("--target", required=True, help="candidate,bin getting -1")
    nv.add_argument("--extra", required=True, help="candidate,bin getting +2")
    ep = osub.add_parser("equal-partition")
    ep.add_argument("--secrets", required=True, help="comma-separated residues")
    ep.add_argument("--m", type=int, required=True)
    for q in (eb, oc, nv, ep):
        q.add_argument("--expect", help="exact rational to compare against")

    rp = sub.add_parser("replay", help="re-run a transcript's header and compare digests")
    rp.add_argument("transcript", type=Path)
    return p


def _pair(text: str) -> tuple[int, int]:
    parts = [int(v) for v in text.split(",")]
    if len(parts) != 2:
        raise _UsageError(f"expected 'candidate,bin', got {text!r}")
    return parts[0], parts[1]


def _cmd_run(args) -> int:
    config = ExperimentConfig.load(args.config)
    changes = {k: v for k, v in (("trials", args.trials), ("seed", args.seed),
                                 ("protocol", args.protocol), ("format", args.format))
               if v is not None}
    if args.out is not None:
        changes["output"] = str(args.out)
    if changes:
        config = config.replace(**changes)
    report = run_experiment(config, workers=args.workers)
    write_output(report.render(), config.output)
    if args.transcript is not None:
        res = run_trial(config, 0, record_transcript=True)
        args.transcript.write_text(res.outcome.transcript.to_jsonl())
    if not report.oracle_passed:
        return EXIT_ORACLE
    return EXIT_OK if report.passed else EXIT_FAIL


def _cmd_audit(args) -> int:
    if args.grid:
        tables = list(audit_grid((args.protocol,) if args.protocol else (1, 2, 3),
                                 realization=args.broadcast))
    else:
        if args.config is not None:
            config = ExperimentConfig.load(args.config)
            protocol, params = args.protocol or config.protocol, config.params
        else:
            if args.protocol is None:
                raise _UsageError("audit needs --protocol or --config")
            protocol = args.protocol
            t = args.t if args.t is not None else (0 if protocol == 1 else 1)
            params = ElectionParams(args.n, args.r, t, args.s, args.broadcast)
        tables = [audit_complexity(protocol, params, seed=args.seed)]
    render = (lambda tb: tb.to_table()) if args.format == "table" else (lambda tb: tb.to_records())
    write_output("".join(render(tb) for tb in tables), args.out)
    failed = [tb for tb in tables if not tb.passed]
    for tb in failed:
        for line in tb.mismatches():
            print(f"mismatch protocol {tb.protocol} {tb.params}: {line.channel} {line.item}: "
                  f"predicted {line.predicted}, observed {line.observed}", file=sys.stderr)
    return EXIT_FAIL if failed else EXIT_OK


def _cmd_oracle(args) -> int:
    twin = None
    if args.oracle == "empty-bin":
        value = oracle_empty_bin_probability(args.n)
        info = {"empty_bin_probability": str(value), "bound": str(EMPTY_BIN_BOUND),
                "above_bound": value > EMPTY_BIN_BOUND}
    elif args.oracle == "open-catch":
        value = oracle_open_catch_probability(args.s, args.x)
        twin = open_catch_brute_force(args.s, args.x)
        info = {"survival": str(value), "caught": str(1 - value), "brute_force": str(twin)}
    elif args.oracle == "negative-vote":
        votes = [int(v) for v in args.votes.split(",")]
        value = negative_vote_detection(args.n, args.r, votes, _pair(args.target),
                                        _pair(args.extra))
        info = {"detection_per_repetition": str(value)}
    else:
        secrets = [int(v) for v in args.secrets.split(",")]
        value = equal_partition_fraction(secrets, args.m)
        info = {"equal_partition_fraction": str(value)}
    info["value"] = str(value)
    mismatch = twin is not None and twin != value
    if args.expect is not None:
        info["expected"] = args.expect
        mismatch = mismatch or Fraction(args.expect) != value
    info["match"] = not mismatch
    print(json.dumps(info, sort_keys=True))
    return EXIT_ORACLE if mismatch else EXIT_OK


def _cmd_replay(args) -> int:
    recorded = Transcript.from_jsonl(args.transcript.read_text())
    h = recorded.header
    try:
        params = ElectionParams(**h["params"])
        strategies = {PartyId.parse(p): build_strategy(spec["name"], spec["params"])
                      for p, spec in h.get("strategies", {}).items()}
        out = run_protocol(h["protocol"], params, h["votes"], strategies, seed=h["seed"],
                           record_transcript=True)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"transcript header is incomplete: {exc}") from None
    diverged = recorded.first_divergence(out.transcript)
    if diverged is None:
        print(f"replay ok: {len(recorded.records)} records match")
        return EXIT_OK
    print(f"replay diverges at round {diverged.get('round')} (record {diverged.get('seq')}, "
          f"phase {diverged.get('phase')}, sender {diverged.get('sender')})")
    return EXIT_FAIL


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        handler = {"run": _cmd_run, "audit": _cmd_audit, "oracle": _cmd_oracle,
                   "replay": _cmd_replay}[args.command]
        return handler(args)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, ValueError, OSError) as exc:
        print(f"votebins: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
