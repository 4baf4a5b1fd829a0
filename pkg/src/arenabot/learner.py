"""On-policy Monte Carlo control over immediate rewards.

A trial is cut into fixed episodes: the first move(s) of each episode pick
a uniformly random action, the rest follow the current policy. Moves feed
the running mean of immediate reward for their (state, action) pair, and
every move that earns a reward resets the policy entry for its state to the
best pair seen so far.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .behavior import (
    ACTIONS,
    CANONICAL_STATES,
    Action,
    MoveRecord,
    Policy,
    SimSpecs,
    encode_state,
    execute_move,
    policy_action,
    random_action,
)
from .geometry import Pose, sense

EXPLORE = "explore"
EXPLOIT = "exploit"


@dataclass
class ValueTable:
    """Count and running mean of immediate reward per (state, action).

    Pairs never tried are absent, i.e. unknown.
    """

    counts: dict[tuple[int, Action], int] = field(default_factory=dict)
    means: dict[tuple[int, Action], float] = field(default_factory=dict)
    # insertion order of first observation, used to break fresh ties
    first_seen: dict[tuple[int, Action], int] = field(default_factory=dict)

    def observe(self, state: int, action: Action, reward: float) -> None:
        key = (state, action)
        n = self.counts.get(key, 0) + 1
        mean = self.means.get(key, 0.0)
        self.counts[key] = n
        self.means[key] = mean + (reward - mean) / n
        self.first_seen.setdefault(key, len(self.first_seen))

    def mean(self, state: int, action: Action) -> Optional[float]:
        return self.means.get((state, action))

    def best_action(self, state: int, incumbent: Optional[Action] = None) -> Optional[Action]:
        """Action with the highest positive mean at ``state``.

        Keeps ``incumbent`` if it is among the maxima; otherwise the
        earliest-observed maximum wins. ``None`` if nothing positive is known.
        """
        seen = [
            (self.means[(state, a)], self.first_seen[(state, a)], a)
            for a in ACTIONS
            if (state, a) in self.means and self.means[(state, a)] > 0.0
        ]
        if not seen:
            return None
        top = max(m for m, _, _ in seen)
        winners = [(order, a) for m, order, a in seen if m == top]
        if any(a is incumbent for _, a in winners):
            return incumbent
        return min(winners)[1]


@dataclass(frozen=True)
class LearnerConfig:
    trial_moves: int = 502
    episode_length: int = 5
    explore_moves_per_episode: int = 1
    seed: int = 0
    # False: only rewarded moves enter the means (conditional-on-success averages)
    count_zero_rewards: bool = True

    def __post_init__(self):
        if self.trial_moves < 0:
            raise ValueError("trial_moves must be non-negative")
        if self.episode_length < 1 or self.explore_moves_per_episode < 0:
            raise ValueError("episode_length must be positive")
        if self.explore_moves_per_episode > self.episode_length:
            raise ValueError("explore_moves_per_episode exceeds episode_length")


@dataclass
class PolicyTraceEntry:
    policy: Policy
    adopted_at_move: int
    moves_used: int = 0


def select_action(
    state: int,
    move_in_episode: int,
    policy: Policy,
    rng: np.random.Generator,
    explore_moves: int = 1,
) -> tuple[Action, str]:
    """Random action on the exploratory slots of an episode, policy action otherwise."""
    if move_in_episode <= explore_moves:
        return random_action(rng), EXPLORE
    return policy_action(policy, state, rng), EXPLOIT


def record_and_update(
    table: ValueTable,
    policy: Policy,
    record: MoveRecord,
    count_zero_rewards: bool = True,
) -> tuple[ValueTable, Policy, bool]:
    """Fold one move into the value table and re-derive that state's entry.

    The policy is only revisited on rewarded moves. Zero-reward moves still
    lower the pair's mean unless ``count_zero_rewards`` is False, in which
    case they are ignored entirely. Overflow states never touch the table.
    The table is updated in place and also returned.
    """
    s = record.state_before
    if s not in CANONICAL_STATES:
        return table, policy, False
    if record.reward <= 0.0:
        if count_zero_rewards:
            table.observe(s, record.action, record.reward)
        return table, policy, False
    table.observe(s, record.action, record.reward)
    incumbent = policy[s]
    best = table.best_action(s, incumbent)
    if best is None or best is incumbent:
        return table, policy, False
    return table, policy.with_entry(s, best, id=policy.id + 1), True


@dataclass
class TrialResult:
    trace: list[PolicyTraceEntry]
    trajectory: list[MoveRecord]
    table: ValueTable

    @property
    def final_policy(self) -> Policy:
        return self.trace[-1].policy


def run_learning_trial(
    config: LearnerConfig,
    specs: SimSpecs = SimSpecs(),
    rng: Optional[np.random.Generator] = None,
) -> TrialResult:
    """Learn from the arena centre, starting with an all-random policy."""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    pose = Pose.start(specs.arena)
    policy = Policy.all_random(1)
    table = ValueTable()
    trace = [PolicyTraceEntry(policy, adopted_at_move=1)]
    trajectory: list[MoveRecord] = []
    for m in range(1, config.trial_moves + 1):
        episode, k = divmod(m - 1, config.episode_length)
        state = encode_state(sense(pose, specs.arena, specs.robot))
        action, phase = select_action(state, k + 1, policy, rng, config.explore_moves_per_episode)
        rec = execute_move(pose, action, rng, specs, m, episode + 1, phase)
        trajectory.append(rec)
        trace[-1].moves_used += 1
        pose = rec.pose_after
        table, policy, changed = record_and_update(table, policy, rec, config.count_zero_rewards)
        if changed:
            trace.append(PolicyTraceEntry(policy, adopted_at_move=m + 1))
    return TrialResult(trace, trajectory, table)
