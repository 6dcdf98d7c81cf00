import json
from pathlib import Path

import pytest

from votebins.cli import EXIT_FAIL, EXIT_OK, EXIT_ORACLE, EXIT_USAGE, main
from votebins.harness import (ConfigError, ExperimentConfig, audit_complexity, audit_grid,
                              run_experiment)
from votebins.protocols import ElectionParams

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

HONEST = """
protocol = 2
n = 3
r = 2
t = 2
s = 2
trials = 30
seed = 5
votes = [1, 0, 1]
"""


def write(tmp_path, text, name="exp.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_honest_experiment_succeeds_everywhere(tmp_path):
    cfg = ExperimentConfig.load(write(tmp_path, HONEST))
    rep = run_experiment(cfg)
    assert rep.frequency("success")["frequency"] == 1.0
    assert all(r["tally"] == [1, 2] for r in rep.records)
    assert rep.passed


def test_report_is_byte_identical_and_worker_independent(tmp_path):
    cfg = ExperimentConfig.load(write(tmp_path, HONEST.replace('votes = [1, 0, 1]',
                                                               'votes = "uniform"')))
    a = run_experiment(cfg, workers=1).to_records()
    b = run_experiment(cfg, workers=1).to_records()
    c = run_experiment(cfg, workers=2).to_records()
    assert a == b == c
    tallies = {tuple(json.loads(line)["tally"]) for line in a.splitlines()[:-1]}
    assert len(tallies) > 1


def test_bundled_configs_pass():
    for name in ("honest.toml", "negative_vote.toml", "invalid_ballots.toml"):
        cfg = ExperimentConfig.load(CONFIGS / name)
        rep = run_experiment(cfg.replace(trials=min(cfg.trials, 1500)))
        assert rep.passed, name
        assert all(v.passed for v in rep.verdicts)


def test_single_repetition_negative_vote_matches_brute_force_oracle():
    cfg = ExperimentConfig.load(CONFIGS / "negative_vote.toml")
    rep = run_experiment(cfg)
    (verdict,) = rep.verdicts
    assert verdict.provenance == "brute-force" and verdict.passed
    assert str(verdict.predicted) == "27/64"


def test_invalid_ballot_revocation_rate_half():
    cfg = ExperimentConfig.load(CONFIGS / "invalid_ballots.toml")
    (verdict,) = run_experiment(cfg).verdicts
    assert verdict.predicted == 0.5 and verdict.passed


@pytest.mark.parametrize("text", [
    HONEST + "\nbogus = 1\n",
    HONEST.replace("protocol = 2", "protocol = 7"),
    HONEST.replace("trials = 30", "trials = 0"),
    HONEST.replace("votes = [1, 0, 1]", "votes = [1, 0]"),
    HONEST + '\n[[strategies]]\nparty = "Q1"\nname = "honest"\n',
    HONEST + '\n[[strategies]]\nparty = "V1"\nname = "bribe"\n',
    HONEST + '\n[[oracles]]\nkind = "constant"\n',
    "protocol = 2\n",
    "protocol = [",
])
def test_bad_configs_rejected(tmp_path, text):
    with pytest.raises(ConfigError):
        ExperimentConfig.load(write(tmp_path, text))


def test_audit_examples():
    t1 = audit_complexity(1, ElectionParams(3, 2, 0, 1))
    assert t1.passed
    (ballots,) = [l for l in t1.lines if l.channel == "private"]
    assert ballots.observed == (2, (18,))
    t3 = audit_complexity(3, ElectionParams(3, 2, 2, 2))
    (total,) = [l for l in t3.lines if l.item == "total simultaneous broadcasts"]
    assert total.observed == 2 * 2 * 3 * 2 + 4


def test_audit_small_grid_commit_reveal():
    tables = list(audit_grid(ns=(2, 3), rs=(1, 2), ts=(1, 2), ss=(1, 2),
                             realization="commit-reveal"))
    assert tables and all(t.passed for t in tables)


def test_cli_run_ok_and_oracle_mismatch(tmp_path, capsys):
    good = write(tmp_path, HONEST + '\n[[oracles]]\nkind = "constant"\nevent = "success"\n'
                 'params = { value = "1" }\n')
    out = tmp_path / "rep.jsonl"
    assert main(["run", "--config", str(good), "--out", str(out)]) == EXIT_OK
    assert json.loads(out.read_text().splitlines()[-1])["passed"]
    bad = write(tmp_path, HONEST + '\n[[oracles]]\nkind = "constant"\nevent = "abort"\n'
                'params = { value = "1/2" }\n', "bad.toml")
    assert main(["run", "--config", str(bad), "--format", "table",
                 "--out", str(tmp_path / "t.txt")]) == EXIT_ORACLE
    assert "FAIL" in (tmp_path / "t.txt").read_text()


def test_cli_run_overrides(tmp_path, capsys):
    cfg = write(tmp_path, HONEST)
    assert main(["run", "--config", str(cfg), "--trials", "3", "--seed", "9",
                 "--format", "records"]) == EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 4
    assert json.loads(lines[-1])["config"]["seed"] == 9


def test_cli_audit(capsys):
    assert main(["audit", "--protocol", "2", "--n", "3", "--t", "2"]) == EXIT_OK
    text = capsys.readouterr().out
    assert "MISMATCH" not in text and "publish" in text
    assert main(["audit", "--protocol", "3", "--n", "2", "--r", "1", "--t", "1", "--s", "2",
                 "--format", "records"]) == EXIT_OK


def test_cli_oracle(capsys):
    assert main(["oracle", "empty-bin", "--n", "2"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["value"] == "1/2"
    assert main(["oracle", "open-catch", "--s", "2", "--x", "1", "--expect", "1/2"]) == EXIT_OK
    capsys.readouterr()
    assert main(["oracle", "open-catch", "--s", "2", "--x", "1", "--expect", "1/3"]) == EXIT_ORACLE
    capsys.readouterr()
    assert main(["oracle", "negative-vote", "--n", "4", "--r", "2", "--votes", "0,0,0",
                 "--target", "0,0", "--extra", "1,0", "--expect", "27/64"]) == EXIT_OK
    capsys.readouterr()
    assert main(["oracle", "equal-partition", "--secrets", "0,0,1,1", "--m", "5"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["value"] == "2/3"


def test_cli_replay_detects_tampering(tmp_path, capsys):
    cfg = write(tmp_path, HONEST + '\n[[strategies]]\nparty = "A1"\nname = "authority_tamper"\n'
                'params = { delta_map = { "pre-sum" = { "0,1" = 0 } } }\n')
    tr = tmp_path / "tr.jsonl"
    assert main(["run", "--config", str(cfg), "--trials", "2", "--transcript", str(tr),
                 "--out", str(tmp_path / "r.jsonl")]) == EXIT_OK
    assert main(["replay", str(tr)]) == EXIT_OK
    assert "replay ok" in capsys.readouterr().out
    lines = tr.read_text().splitlines()
    rec = json.loads(lines[4])
    rec["digest"] = "f" * 32
    lines[4] = json.dumps(rec, sort_keys=True)
    tr.write_text("\n".join(lines) + "\n")
    assert main(["replay", str(tr)]) == EXIT_FAIL
    assert f"round {rec['round']}" in capsys.readouterr().out


def test_cli_usage_errors(tmp_path, capsys):
    assert main([]) == EXIT_USAGE
    assert main(["run"]) == EXIT_USAGE
    assert main(["run", "--config", str(tmp_path / "missing.toml")]) == EXIT_USAGE
    assert main(["audit"]) == EXIT_USAGE
    assert main(["run", "--config", str(write(tmp_path, HONEST)), "--seed", "-1"]) == EXIT_USAGE
