"""Experiment orchestration: learn, replay, analyze, baseline, pipeline.

Random streams
--------------
Every stochastic run gets its own generator derived from the master seed
through :class:`numpy.random.SeedSequence` with a fixed spawn key:

* learning trial: ``(0,)``
* replay of policy ``p``, replicate ``r``: ``(1, p, r)``

The derived 64-bit integer seed is recorded in the manifest, so any single
file can be regenerated without rerunning the others.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import re
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import __version__
from .behavior import (
    Action,
    MoveRecord,
    Policy,
    SimSpecs,
    execute_policy_move,
)
from .geometry import ArenaSpec, NoiseSpec, Pose, RobotSpec
from .infotheory import (
    SCHEMES,
    BinScheme,
    EntropyReport,
    analyze_replay,
    baseline_states,
    predicted_action_entropy,
    predicted_state_entropy,
)
from .learner import EXPLORE, LearnerConfig, PolicyTraceEntry, TrialResult, run_learning_trial
from .reference import PUBLISHED_MOVES_USED, PUBLISHED_POLICIES

log = logging.getLogger(__name__)

TRAJECTORY_COLUMNS = [
    "move_index",
    "episode_index",
    "phase",
    "state_before",
    "action",
    "state_after",
    "reward",
    "x_cm",
    "y_cm",
    "theta_rad",
]
REPORT_COLUMNS = [
    "policy_id",
    "replicate",
    "H_state",
    "H_action",
    "H_reward_r0",
    "H_reward_r1",
    "H_reward_r2",
    "H_action_pred",
    "H_state_pred",
    "total_reward",
]

LEARN_KEY = (0,)
REPLAY_KEY = 1


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage} failed: {cause}")
        self.stage = stage


@dataclass
class ExperimentConfig:
    master_seed: int = 0
    trial_moves: int = 502
    episode_length: int = 5
    explore_moves_per_episode: int = 1
    count_zero_rewards: bool = True
    replay_moves: int = 200
    replay_replicates: int = 20
    replay_explore: bool = False
    bins: tuple[str, ...] = ("r0", "r1", "r2")
    noise: bool = True
    arena_width_cm: float = 126.3
    arena_height_cm: float = 100.0
    robot_side_cm: float = 12.0
    baseline_states: int = 9
    policies_from_paper: bool = False
    out_dir: str = "runs/default"

    def validate(self) -> None:
        for name in ("replay_moves", "replay_replicates", "episode_length"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.trial_moves < 0:
            raise ConfigError("trial_moves must be non-negative")
        if not 0 <= self.explore_moves_per_episode <= self.episode_length:
            raise ConfigError("explore_moves_per_episode must lie in [0, episode_length]")
        unknown = [b for b in self.bins if b not in SCHEMES]
        if unknown or not self.bins:
            raise ConfigError(f"unknown bin schemes {unknown}; choose from {sorted(SCHEMES)}")
        if self.baseline_states not in (7, 9):
            raise ConfigError("baseline_states must be 7 or 9")
        if self.arena_width_cm <= 0 or self.arena_height_cm <= 0 or self.robot_side_cm <= 0:
            raise ConfigError("arena and robot dimensions must be positive")

    @property
    def specs(self) -> SimSpecs:
        return SimSpecs(
            arena=ArenaSpec(self.arena_width_cm, self.arena_height_cm),
            robot=RobotSpec(self.robot_side_cm),
            noise=NoiseSpec() if self.noise else NoiseSpec.off(),
        )

    @property
    def learner(self) -> LearnerConfig:
        return LearnerConfig(
            trial_moves=self.trial_moves,
            episode_length=self.episode_length,
            explore_moves_per_episode=self.explore_moves_per_episode,
            seed=derive_seed(self.master_seed, LEARN_KEY),
            count_zero_rewards=self.count_zero_rewards,
        )

    @property
    def schemes(self) -> list[BinScheme]:
        return [SCHEMES[b] for b in self.bins]

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["bins"] = list(self.bins)
        return d

    def with_overrides(self, overrides: dict) -> "ExperimentConfig":
        """Return a copy with string-valued overrides coerced to field types."""
        fields = {f.name: f for f in dataclasses.fields(self)}
        changes = {}
        for key, raw in overrides.items():
            if key not in fields:
                raise ConfigError(f"unknown config key {key!r}")
            changes[key] = _coerce(getattr(self, key), raw, key)
        return dataclasses.replace(self, **changes)


def _coerce(current, raw, key):
    if not isinstance(raw, str):
        return tuple(raw) if isinstance(current, tuple) else raw
    try:
        if isinstance(current, bool):
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(current, int):
            return int(raw)
        if isinstance(current, float):
            return float(raw)
        if isinstance(current, tuple):
            return tuple(t.strip() for t in raw.split(",") if t.strip())
    except ValueError as e:
        raise ConfigError(f"bad value for {key}: {raw!r}") from e
    return raw


def read_config_file(path: str | Path) -> dict:
    """Parse ``key=value`` lines; blank lines and ``#`` comments are skipped."""
    out = {}
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key=value")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def derive_seed(master_seed: int, key: Sequence[int]) -> int:
    """Counter-based child seed: ``SeedSequence(master_seed, spawn_key=key)``."""
    ss = np.random.SeedSequence(master_seed, spawn_key=tuple(key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def replay_seed(master_seed: int, policy_id: int, replicate: int) -> int:
    return derive_seed(master_seed, (REPLAY_KEY, policy_id, replicate))


# ---------------------------------------------------------------- file formats


def _full(x: float) -> str:
    return repr(float(x))


def _sig6(x: float) -> str:
    return f"{x:.6g}"


def write_trajectory_csv(path: Path, records: Iterable[MoveRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_COLUMNS)
        for r in records:
            p = r.pose_after
            w.writerow(
                [
                    r.move_index,
                    r.episode_index,
                    r.phase,
                    r.state_before,
                    r.action.value,
                    r.state_after,
                    _full(r.reward),
                    _full(p.x_cm),
                    _full(p.y_cm),
                    _full(p.theta_rad),
                ]
            )


def read_trajectory_csv(path: Path) -> list[MoveRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in TRAJECTORY_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"{path}: missing columns {missing}")
        out = []
        for row in reader:
            out.append(
                MoveRecord(
                    move_index=int(row["move_index"]),
                    episode_index=int(row["episode_index"]),
                    phase=row["phase"],
                    state_before=int(row["state_before"]),
                    action=Action(row["action"]),
                    state_after=int(row["state_after"]),
                    reward=float(row["reward"]),
                    pose_after=Pose(float(row["x_cm"]), float(row["y_cm"]), float(row["theta_rad"])),
                )
            )
    return out


def trace_to_json(trace: Sequence[PolicyTraceEntry]) -> list[dict]:
    return [
        {
            "policy_id": e.policy.id,
            "adopted_at_move": e.adopted_at_move,
            "moves_used": e.moves_used,
            "entries": {str(s): tok for s, tok in e.policy.tokens().items()},
        }
        for e in trace
    ]


def write_trace_json(path: Path, trace: Sequence[PolicyTraceEntry]) -> None:
    path.write_text(json.dumps(trace_to_json(trace), indent=2) + "\n", encoding="utf-8")


def read_trace_json(path: Path) -> list[PolicyTraceEntry]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        out = []
        for item in data:
            pol = Policy.from_tokens(
                {int(k): v for k, v in item["entries"].items()}, id=int(item["policy_id"])
            )
            out.append(PolicyTraceEntry(pol, int(item["adopted_at_move"]), int(item["moves_used"])))
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as e:
        raise ValueError(f"malformed trace file {path}: {e}") from e
    if not out:
        raise ValueError(f"malformed trace file {path}: no policies")
    return out


def paper_trace() -> list[PolicyTraceEntry]:
    out, start = [], 1
    for pol, t in zip(PUBLISHED_POLICIES, PUBLISHED_MOVES_USED):
        out.append(PolicyTraceEntry(pol, start, t))
        start += t
    return out


def _write_rows(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ---------------------------------------------------------------- replay


def replay_policy(
    policy: Policy,
    moves: int,
    rng: np.random.Generator,
    specs: SimSpecs = SimSpecs(),
    explore: bool = False,
    episode_length: int = 5,
) -> list[MoveRecord]:
    """Run ``policy`` for ``moves`` moves from the start pose, without learning.

    With ``explore`` the first move of every episode is uniformly random, as
    during learning.
    """
    pose = Pose.start(specs.arena)
    out = []
    for m in range(1, moves + 1):
        episode, k = divmod(m - 1, episode_length)
        if explore and k == 0:
            rec = execute_policy_move(pose, Policy.all_random(policy.id), rng, specs, m, episode + 1, EXPLORE)
        else:
            rec = execute_policy_move(pose, policy, rng, specs, m, episode + 1, "policy")
        out.append(rec)
        pose = rec.pose_after
    return out


def replay_filename(policy_id: int, replicate: int) -> str:
    return f"replay_p{policy_id:02d}_r{replicate:03d}.csv"


_REPLAY_RE = re.compile(r"replay_p(\d+)_r(\d+)\.csv$")


def parse_replay_filename(path: Path) -> tuple[int, int]:
    m = _REPLAY_RE.search(Path(path).name)
    if not m:
        raise ValueError(f"cannot infer policy/replicate from file name {path}")
    return int(m.group(1)), int(m.group(2))


# ---------------------------------------------------------------- commands


def _out(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_learn(cfg: ExperimentConfig) -> dict:
    """Run the learning trial; write ``trace.json`` and ``learn_trajectory.csv``."""
    cfg.validate()
    out = _out(cfg)
    result: TrialResult = run_learning_trial(cfg.learner, cfg.specs)
    trace_path, traj_path = out / "trace.json", out / "learn_trajectory.csv"
    write_trace_json(trace_path, result.trace)
    write_trajectory_csv(traj_path, result.trajectory)
    log.info("learned %d policies over %d moves", len(result.trace), cfg.trial_moves)
    return {"trace": trace_path, "learn_trajectory": traj_path, "result": result}


def resolve_policies(
    cfg: ExperimentConfig,
    trace_path: Optional[Path] = None,
    policy_ids: Optional[Sequence[int]] = None,
    inline: Optional[Sequence[str]] = None,
) -> list[Policy]:
    """Pick the policies to work on: inline tokens, the published table, or a trace file."""
    if inline is not None:
        pol = Policy.from_tokens(inline, id=policy_ids[0] if policy_ids else 1)
        return [pol]
    if cfg.policies_from_paper:
        pols = list(PUBLISHED_POLICIES)
    else:
        if trace_path is None:
            trace_path = Path(cfg.out_dir) / "trace.json"
        pols = [e.policy for e in read_trace_json(trace_path)]
    if policy_ids:
        by_id = {p.id: p for p in pols}
        unknown = [i for i in policy_ids if i not in by_id]
        if unknown:
            raise KeyError(f"unknown policy id(s) {unknown}; available {sorted(by_id)}")
        pols = [by_id[i] for i in policy_ids]
    return pols


def cmd_replay(cfg: ExperimentConfig, policies: Sequence[Policy]) -> list[Path]:
    """Replay each policy ``replay_replicates`` times; one CSV per replicate."""
    cfg.validate()
    rdir = _out(cfg) / "replays"
    rdir.mkdir(exist_ok=True)
    paths = []
    for pol in policies:
        for rep in range(cfg.replay_replicates):
            rng = np.random.default_rng(replay_seed(cfg.master_seed, pol.id, rep))
            recs = replay_policy(
                pol, cfg.replay_moves, rng, cfg.specs, cfg.replay_explore, cfg.episode_length
            )
            path = rdir / replay_filename(pol.id, rep)
            write_trajectory_csv(path, recs)
            paths.append(path)
    return paths


def report_row(r: EntropyReport) -> list:
    rep = "mean" if r.replicate is None else r.replicate
    return [
        r.policy_id,
        rep,
        *(_sig6(v) for v in (r.H_state, r.H_action)),
        *(_sig6(r.H_reward[s]) if s in r.H_reward else "" for s in ("r0", "r1", "r2")),
        *(_sig6(v) for v in (r.H_action_pred, r.H_state_pred, r.total_reward)),
    ]


def mean_report(reports: Sequence[EntropyReport]) -> EntropyReport:
    first = reports[0]
    return EntropyReport(
        policy_id=first.policy_id,
        H_state=statistics.fmean(r.H_state for r in reports),
        H_action=statistics.fmean(r.H_action for r in reports),
        H_reward={k: statistics.fmean(r.H_reward[k] for r in reports) for k in first.H_reward},
        H_action_pred=first.H_action_pred,
        H_state_pred=first.H_state_pred,
        total_reward=statistics.fmean(r.total_reward for r in reports),
        replay_moves=first.replay_moves,
        replicate=None,
    )


def analyze_paths(
    cfg: ExperimentConfig, paths: Sequence[Path], policies: Sequence[Policy]
) -> tuple[list[EntropyReport], list[EntropyReport]]:
    """Per-replicate reports and per-policy replicate means, ordered by policy id."""
    by_id = {p.id: p for p in policies}
    states = baseline_states(cfg.baseline_states)
    grouped: dict[int, list[EntropyReport]] = {}
    for path in sorted(paths, key=parse_replay_filename):
        pid, rep = parse_replay_filename(path)
        if pid not in by_id:
            raise KeyError(f"{path}: no policy with id {pid}")
        recs = read_trajectory_csv(path)
        if not recs:
            raise ValueError(f"{path}: empty trajectory")
        grouped.setdefault(pid, []).append(
            analyze_replay(recs, by_id[pid], cfg.schemes, states, replicate=rep)
        )
    per_rep = [r for pid in sorted(grouped) for r in grouped[pid]]
    means = [mean_report(grouped[pid]) for pid in sorted(grouped)]
    return per_rep, means


def cmd_analyze(cfg: ExperimentConfig, paths: Sequence[Path], policies: Sequence[Policy]) -> dict:
    """Write ``entropy_report.csv`` and the three plot-data files."""
    cfg.validate()
    if not paths:
        raise ValueError("no replay files to analyze")
    out = _out(cfg)
    per_rep, means = analyze_paths(cfg, paths, policies)
    report = out / "entropy_report.csv"
    _write_rows(report, REPORT_COLUMNS, [report_row(r) for r in per_rep + means])

    fig4, fig5, fig6 = [], [], []
    for m in means:
        fig4 += [(m.policy_id, "H_state", m.H_state), (m.policy_id, "H_action", m.H_action)]
        fig4 += [(m.policy_id, f"H_reward_{k}", v) for k, v in m.H_reward.items()]
        fig5.append((m.policy_id, "total_reward", m.total_reward))
        fig6 += [
            (m.policy_id, "H_action_observed", m.H_action),
            (m.policy_id, "H_action_predicted", m.H_action_pred),
            (m.policy_id, "H_state_observed", m.H_state),
            (m.policy_id, "H_state_predicted", m.H_state_pred),
        ]
    files = {"entropy_report": report}
    for name, rows in (("plotdata_fig4", fig4), ("plotdata_fig5", fig5), ("plotdata_fig6", fig6)):
        path = out / f"{name}.csv"
        _write_rows(path, ["policy_id", "series", "value"], [(p, s, _sig6(v)) for p, s, v in rows])
        files[name] = path
    return {"files": files, "reports": per_rep, "means": means}


def baseline_rows(policies: Sequence[Policy], n_states: int = 9) -> list[tuple[int, float, float]]:
    states = baseline_states(n_states)
    h_state = predicted_state_entropy(states)
    return [(p.id, predicted_action_entropy(p, states), h_state) for p in policies]


def cmd_baseline(cfg: ExperimentConfig, policies: Sequence[Policy]) -> Path:
    cfg.validate()
    path = _out(cfg) / "baseline.csv"
    rows = baseline_rows(policies, cfg.baseline_states)
    _write_rows(path, ["policy_id", "H_action_pred", "H_state_pred"], [(i, _sig6(a), _sig6(s)) for i, a, s in rows])
    return path


def cmd_pipeline(cfg: ExperimentConfig) -> dict:
    """learn -> replay every traced policy -> analyze -> baseline -> manifest."""
    try:
        cfg.validate()
    except ConfigError as e:
        raise StageError("config", e) from e
    out = _out(cfg)
    files: dict[str, Path] = {}

    def stage(name, fn, *args):
        try:
            return fn(*args)
        except Exception as e:
            raise StageError(name, e) from e

    learned = stage("learn", cmd_learn, cfg)
    files["trace"] = learned["trace"]
    files["learn_trajectory"] = learned["learn_trajectory"]
    if cfg.policies_from_paper:
        trace = paper_trace()
        files["paper_trace"] = out / "paper_trace.json"
        write_trace_json(files["paper_trace"], trace)
    else:
        trace = learned["result"].trace
    policies = [e.policy for e in trace]
    replays = stage("replay", cmd_replay, cfg, policies)
    analysis = stage("analyze", cmd_analyze, cfg, replays, policies)
    files.update(analysis["files"])
    files["baseline"] = stage("baseline", cmd_baseline, cfg, policies)
    for p in replays:
        files[f"replays/{p.name}"] = p
    manifest = write_manifest(cfg, files, policies)
    return {"manifest": manifest, "files": files, "means": analysis["means"], "reports": analysis["reports"]}


def write_manifest(cfg: ExperimentConfig, files: dict[str, Path], policies: Sequence[Policy]) -> Path:
    out = Path(cfg.out_dir)
    seeds = {
        "learn": derive_seed(cfg.master_seed, LEARN_KEY),
        "replay": {
            f"{p.id}/{r}": replay_seed(cfg.master_seed, p.id, r)
            for p in policies
            for r in range(cfg.replay_replicates)
        },
    }
    manifest = {
        "tool": "arenabot",
        "version": __version__,
        # out_dir is left out so identical runs give identical manifests
        "config": {k: v for k, v in cfg.to_dict().items() if k != "out_dir"},
        "seed_scheme": "numpy SeedSequence(master_seed, spawn_key=(0,) learn | (1, policy_id, replicate) replay)",
        "seeds": seeds,
        "files": {
            k: {"path": str(Path(v).relative_to(out)), "sha256": sha256(v)}
            for k, v in sorted(files.items())
        },
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def config_from_manifest(path: str | Path) -> ExperimentConfig:
    """Config of a recorded run; out_dir defaults to the manifest's folder."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    overrides = {"out_dir": str(Path(path).parent), **data["config"]}
    return ExperimentConfig().with_overrides(overrides)
