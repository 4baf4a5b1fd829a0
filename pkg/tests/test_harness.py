import csv
import json
import math
import statistics

import pytest

from arenabot import cli, harness
from arenabot.behavior import FRONT_ACTIVE_STATES, Action, decode_state
from arenabot.geometry import Pose
from arenabot.harness import (
    TRAJECTORY_COLUMNS,
    ConfigError,
    ExperimentConfig,
    StageError,
)
from arenabot.reference import PUBLISHED_POLICIES


@pytest.fixture
def cfg(tmp_path):
    return ExperimentConfig(out_dir=str(tmp_path / "run"), replay_replicates=2)


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_derived_seeds_are_stable_and_distinct():
    assert harness.derive_seed(0, (0,)) == harness.derive_seed(0, (0,))
    seeds = {harness.replay_seed(0, p, r) for p in range(1, 9) for r in range(20)}
    assert len(seeds) == 160
    assert harness.replay_seed(0, 1, 0) != harness.replay_seed(1, 1, 0)


def test_learn_outputs(cfg):
    out = harness.cmd_learn(cfg)
    trace = json.loads(out["trace"].read_text())
    assert trace[0]["entries"] == {str(s): "RAND" for s in range(9)}
    assert trace[0]["policy_id"] == 1 and trace[0]["adopted_at_move"] == 1
    assert sum(e["moves_used"] for e in trace) == 502
    rows = _rows(out["learn_trajectory"])
    assert len(rows) == 502 and list(rows[0]) == TRAJECTORY_COLUMNS
    assert {r["phase"] for r in rows} == {"explore", "exploit"}


def test_learn_zero_moves(cfg):
    cfg.trial_moves = 0
    out = harness.cmd_learn(cfg)
    trace = json.loads(out["trace"].read_text())
    assert len(trace) == 1 and trace[0]["moves_used"] == 0
    assert out["learn_trajectory"].read_text().strip().split("\n") == [",".join(TRAJECTORY_COLUMNS)]


def test_learn_is_byte_identical(tmp_path):
    a = ExperimentConfig(out_dir=str(tmp_path / "a"))
    b = ExperimentConfig(out_dir=str(tmp_path / "b"))
    for name in ("trace", "learn_trajectory"):
        assert harness.cmd_learn(a)[name].read_bytes() == harness.cmd_learn(b)[name].read_bytes()


def _recompute_rewards(records, start):
    """Rewards from consecutive poses and the recorded states alone."""
    out, prev = [], start
    for r in records:
        p = r.pose_after
        if r.action is Action.FORWARD:
            out.append(math.hypot(p.x_cm - prev.x_cm, p.y_cm - prev.y_cm) / 10.0)
        elif r.action in (Action.LEFT90, Action.RIGHT90, Action.ABOUT180):
            clears = r.state_before in FRONT_ACTIVE_STATES and not decode_state(r.state_after).front_dark
            out.append((1.0 if r.action is Action.ABOUT180 else 2.0) if clears else 0.0)
        else:
            out.append(0.0)
        prev = p
    return out


def test_csv_roundtrip_recomputes_rewards(cfg):
    out = harness.cmd_learn(cfg)
    recs = harness.read_trajectory_csv(out["learn_trajectory"])
    assert recs == out["result"].trajectory
    again = _recompute_rewards(recs, Pose.start(cfg.specs.arena))
    for r, x in zip(recs, again):
        assert r.reward == pytest.approx(x, abs=1e-9)


def test_replay_files(cfg):
    cfg.replay_replicates = 3
    paths = harness.cmd_replay(cfg, [PUBLISHED_POLICIES[0]])
    assert [p.name for p in paths] == [f"replay_p01_r00{i}.csv" for i in range(3)]
    rows = [_rows(p) for p in paths]
    assert all(len(r) == 200 for r in rows)
    assert {x["phase"] for r in rows for x in r} == {"policy"}
    assert len({p.read_bytes() for p in paths}) == 3


def test_replay_explore_flag(cfg):
    cfg.replay_explore = True
    cfg.replay_replicates = 1
    rows = _rows(harness.cmd_replay(cfg, [PUBLISHED_POLICIES[7]])[0])
    assert [r["phase"] for r in rows[:5]] == ["explore"] + ["policy"] * 4


def test_policy8_beats_random_on_total_reward(tmp_path):
    c = ExperimentConfig(out_dir=str(tmp_path), replay_replicates=20)
    paths = harness.cmd_replay(c, [PUBLISHED_POLICIES[0], PUBLISHED_POLICIES[7]])
    per_rep, _ = harness.analyze_paths(c, paths, PUBLISHED_POLICIES)
    totals = {pid: statistics.median(r.total_reward for r in per_rep if r.policy_id == pid) for pid in (1, 8)}
    assert totals[8] > totals[1]


def test_resolve_policies(cfg):
    harness.cmd_learn(cfg)
    learned = harness.resolve_policies(cfg)
    assert learned[0].id == 1
    with pytest.raises(KeyError):
        harness.resolve_policies(cfg, policy_ids=[999])
    cfg.policies_from_paper = True
    assert harness.resolve_policies(cfg, policy_ids=[8]) == [PUBLISHED_POLICIES[7]]
    inline = harness.resolve_policies(cfg, inline="F,R,L,A,F,RAND,F,RAND,RAND".split(","), policy_ids=[8])
    assert inline == [PUBLISHED_POLICIES[7]]


def test_malformed_trace(tmp_path):
    bad = tmp_path / "trace.json"
    bad.write_text('[{"policy_id": 1}]')
    with pytest.raises(ValueError, match="malformed"):
        harness.read_trace_json(bad)
    bad.write_text("not json")
    with pytest.raises(ValueError, match="malformed"):
        harness.read_trace_json(bad)


def test_analyze_outputs(cfg):
    cfg.policies_from_paper = True
    pols = list(PUBLISHED_POLICIES[:2])
    paths = harness.cmd_replay(cfg, pols)
    res = harness.cmd_analyze(cfg, paths, pols)
    rows = _rows(res["files"]["entropy_report"])
    assert list(rows[0]) == harness.REPORT_COLUMNS
    assert [(r["policy_id"], r["replicate"]) for r in rows] == [
        ("1", "0"), ("1", "1"), ("2", "0"), ("2", "1"), ("1", "mean"), ("2", "mean")
    ]
    for r in rows:
        assert float(r["H_state"]) <= 4.0
        assert len(r["H_action"].replace(".", "").replace("-", "").lstrip("0")) <= 6
    fig6 = _rows(res["files"]["plotdata_fig6"])
    assert {r["series"] for r in fig6} == {
        "H_action_observed", "H_action_predicted", "H_state_observed", "H_state_predicted"
    }
    fig5 = _rows(res["files"]["plotdata_fig5"])
    assert [r["policy_id"] for r in fig5] == ["1", "2"]


def test_analyze_rejects_bad_inputs(cfg, tmp_path):
    with pytest.raises(ValueError):
        harness.cmd_analyze(cfg, [], PUBLISHED_POLICIES)
    empty = tmp_path / "replay_p01_r000.csv"
    empty.write_text(",".join(TRAJECTORY_COLUMNS) + "\n")
    with pytest.raises(ValueError, match="empty"):
        harness.cmd_analyze(cfg, [empty], PUBLISHED_POLICIES)
    broken = tmp_path / "replay_p01_r001.csv"
    broken.write_text("move_index,action\n1,F\n")
    with pytest.raises(ValueError, match="missing columns"):
        harness.cmd_analyze(cfg, [broken], PUBLISHED_POLICIES)


def test_baseline(cfg):
    from arenabot.behavior import Policy

    pols = [Policy.all_random(1), Policy.from_tokens(["F"] * 9, id=2), PUBLISHED_POLICIES[7]]
    rows = _rows(harness.cmd_baseline(cfg, pols))
    got = [(float(r["H_action_pred"]), float(r["H_state_pred"])) for r in rows]
    assert got[0] == pytest.approx((2.32193, 3.16993), abs=1e-5)
    assert got[1] == pytest.approx((0.0, 3.16993), abs=1e-5)
    assert got[2] == pytest.approx((2.118, 3.16993), abs=5e-4)
    cfg.baseline_states = 7
    rows7 = _rows(harness.cmd_baseline(cfg, pols))
    assert float(rows7[0]["H_state_pred"]) == pytest.approx(math.log2(7), abs=1e-5)


def test_config_validation_and_overrides(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig(replay_moves=0).validate()
    with pytest.raises(ConfigError):
        ExperimentConfig(bins=("r9",)).validate()
    with pytest.raises(ConfigError):
        ExperimentConfig().with_overrides({"nope": "1"})
    with pytest.raises(ConfigError):
        ExperimentConfig().with_overrides({"noise": "maybe"})
    f = tmp_path / "exp.cfg"
    f.write_text("# comment\nmaster_seed = 7\nnoise=false\nbins=r0,r2\n\nreplay_moves=50  # short\n")
    c = ExperimentConfig().with_overrides(harness.read_config_file(f))
    assert (c.master_seed, c.noise, c.bins, c.replay_moves) == (7, False, ("r0", "r2"), 50)


def test_pipeline_manifest_and_rerun(tmp_path):
    c = ExperimentConfig(out_dir=str(tmp_path / "a"), replay_replicates=2)
    res = harness.cmd_pipeline(c)
    manifest = json.loads(res["manifest"].read_text())
    for entry in manifest["files"].values():
        path = tmp_path / "a" / entry["path"]
        assert harness.sha256(path) == entry["sha256"]
    assert "replays/replay_p01_r000.csv" in manifest["files"]
    assert manifest["seeds"]["learn"] == harness.derive_seed(0, (0,))

    again = harness.config_from_manifest(res["manifest"])
    again.out_dir = str(tmp_path / "b")
    res_b = harness.cmd_pipeline(again)
    for name in ("entropy_report", "trace", "baseline"):
        assert res["files"][name].read_bytes() == res_b["files"][name].read_bytes()


def test_pipeline_policies_from_paper(tmp_path):
    c = ExperimentConfig(out_dir=str(tmp_path), replay_replicates=1, policies_from_paper=True)
    res = harness.cmd_pipeline(c)
    assert [m.policy_id for m in res["means"]] == list(range(1, 9))
    published = json.loads(res["files"]["paper_trace"].read_text())
    assert [e["moves_used"] for e in published] == [6, 2, 3, 2, 1, 52, 26, 410]
    assert published[7]["adopted_at_move"] == 93


def test_pipeline_stage_error(tmp_path, monkeypatch):
    def boom(*a):
        raise OSError("disk full")

    monkeypatch.setattr(harness, "cmd_replay", boom)
    with pytest.raises(StageError) as err:
        harness.cmd_pipeline(ExperimentConfig(out_dir=str(tmp_path)))
    assert err.value.stage == "replay"
    with pytest.raises(StageError) as err:
        harness.cmd_pipeline(ExperimentConfig(out_dir=str(tmp_path), replay_moves=0))
    assert err.value.stage == "config"


def test_cli_end_to_end(tmp_path, capsys):
    out = tmp_path / "cli"
    assert cli.main(["learn", "--out", str(out), "--seed", "3"]) == 0
    assert (out / "trace.json").exists()
    assert cli.main(["replay", "--out", str(out), "--replicates", "2", "--policy-id", "1"]) == 0
    assert len(list((out / "replays").glob("*.csv"))) == 2
    assert cli.main(["analyze", "--out", str(out), "--bins", "r2"]) == 0
    header = (out / "entropy_report.csv").read_text().splitlines()[0]
    assert header.startswith("policy_id,replicate")
    assert cli.main(["baseline", "--out", str(out), "--policies-from-paper", "--states", "7"]) == 0
    assert cli.main(["pipeline", "--out", str(tmp_path / "p"), "--replicates", "1", "--no-noise"]) == 0
    assert "manifest.json" in capsys.readouterr().out


def test_cli_errors(tmp_path, capsys):
    assert cli.main(["replay", "--out", str(tmp_path), "--policies-from-paper", "--policy-id", "42"]) == 2
    assert "unknown policy id" in capsys.readouterr().err
    cfgfile = tmp_path / "bad.cfg"
    cfgfile.write_text("replay_replicates=0\n")
    assert cli.main(["learn", "--config", str(cfgfile), "--out", str(tmp_path)]) == 2
