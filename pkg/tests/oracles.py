"""Independent reference computations used by the tests.

Nothing here calls the learner or the entropy estimator under test.
"""

from __future__ import annotations

import math
from collections import defaultdict

import numpy as np

from arenabot.behavior import ACTIONS, Policy, SimSpecs, execute_policy_move, step
from arenabot.geometry import Pose


def marching_forward_distance(pose, arena, robot, cap_cm=100.0, coarse=0.05):
    """Scan along the heading until a front sensor leaves the arena, then bisect.

    Slow and dumb on purpose; it shares no code with the closed-form solver.
    """
    h = robot.side_cm / 2
    c, s = math.cos(pose.theta_rad), math.sin(pose.theta_rad)
    front = [(pose.x_cm + h * c - l * s, pose.y_cm + h * s + l * c) for l in (h, -h)]

    def outside(t):
        for x, y in front:
            x, y = x + t * c, y + t * s
            if not (0 <= x <= arena.white_width_cm and 0 <= y <= arena.white_height_cm):
                return True
        return False

    t = 0.0
    limit = cap_cm + 1.0
    while t < limit and not outside(t):
        t += coarse
    if t >= limit:
        return cap_cm
    lo, hi = t - coarse, t
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if outside(mid):
            hi = mid
        else:
            lo = mid
    return min(cap_cm, hi + 0.1)


def plugin_entropy_reference(counts):
    """Entropy in nats converted to bits via numpy; independent of arenabot."""
    c = np.asarray([x for x in counts if x > 0], dtype=float)
    p = c / c.sum()
    return float(-(p * np.log(p)).sum() / np.log(2))


def multinomial_entropy_envelope(k=5, n=200, draws=20000, quantile=0.999, seed=0):
    """Quantile of |H_plugin - log2 k| for n uniform draws over k symbols."""
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(n, [1.0 / k] * k, size=draws)
    p = counts / n
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -np.where(p > 0, p * np.log2(p), 0.0).sum(axis=1)
    return float(np.quantile(np.abs(h - math.log2(k)), quantile))


def state_pose_pool(specs=SimSpecs(), walks=60, moves=400, seed=2024):
    """Poses at which each state is observed during all-random wandering."""
    rng = np.random.default_rng(seed)
    pool = defaultdict(list)
    pol = Policy.all_random()
    for _ in range(walks):
        pose = Pose.start(specs.arena)
        for _ in range(moves):
            rec = execute_policy_move(pose, pol, rng, specs)
            pool[rec.state_before].append(pose)
            pose = rec.pose_after
    return pool


def expected_immediate_reward(specs=SimSpecs(), samples=10_000, seed=7, pool=None):
    """Monte Carlo estimate of E[reward | state, action] for states 0-8.

    Each (state, action) pair is evaluated on ``samples`` poses drawn with
    replacement from the random-walk pose pool, each with fresh noise.
    """
    if pool is None:
        pool = state_pose_pool(specs)
    rng = np.random.default_rng(seed)
    table = {}
    for s in range(9):
        poses = pool[s]
        for a in ACTIONS:
            idx = rng.integers(len(poses), size=samples)
            table[(s, a)] = float(np.mean([step(poses[i], a, rng, specs)[2] for i in idx]))
    return table


def oracle_best_actions(table):
    """Argmax action per state, or None where no action pays on average."""
    best = {}
    for s in range(9):
        a = max(ACTIONS, key=lambda act: table[(s, act)])
        best[s] = a if table[(s, a)] > 0 else None
    return best
