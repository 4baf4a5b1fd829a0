"""Plug-in Shannon entropy, reward binning and uniform-state baselines."""

from __future__ import annotations

import bisect
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Optional, Sequence

from .behavior import ACTIONS, ALL_STATES, CANONICAL_STATES, MoveRecord, Policy


class EmptyHistogram(ValueError):
    pass


@dataclass
class Histogram:
    """Symbol counts over an ordered alphabet.

    Symbols seen but not declared in ``alphabet`` are appended to it.
    """

    alphabet: list = field(default_factory=list)
    counts: dict = field(default_factory=dict)

    @classmethod
    def from_samples(cls, samples: Iterable[Hashable], alphabet: Sequence = ()) -> "Histogram":
        h = cls(list(alphabet), {a: 0 for a in alphabet})
        for x in samples:
            h.add(x)
        return h

    @classmethod
    def from_counts(cls, counts: dict) -> "Histogram":
        return cls(list(counts), dict(counts))

    def add(self, symbol, n: int = 1) -> None:
        if n < 0:
            raise ValueError("counts must be non-negative")
        if symbol not in self.counts:
            self.alphabet.append(symbol)
            self.counts[symbol] = 0
        self.counts[symbol] += n

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def frequencies(self) -> dict:
        t = self.total
        if t == 0:
            raise EmptyHistogram("histogram has no samples")
        return {a: self.counts[a] / t for a in self.alphabet}


def entropy_from_probs(probs: Iterable[float]) -> float:
    """Shannon entropy in bits; zero probabilities contribute nothing."""
    h = 0.0
    for p in probs:
        if p > 0.0:
            h -= p * math.log2(p)
    # -0.0 and tiny negative rounding for degenerate distributions
    return max(h, 0.0)


def entropy(hist: Histogram) -> float:
    """Plug-in entropy ``-sum p log2 p`` of the empirical frequencies."""
    return entropy_from_probs(hist.frequencies().values())


@dataclass(frozen=True)
class BinScheme:
    """Reward partition: bin 0 is exactly zero, then half-open ``(e_i, e_{i+1}]`` bins.

    ``edges`` are the upper bounds of every positive bin except the last,
    which is open above.
    """

    name: str
    edges: tuple[float, ...]

    @property
    def n_bins(self) -> int:
        return len(self.edges) + 2

    def labels(self) -> list[str]:
        out = ["0"]
        lo = 0.0
        for e in self.edges:
            out.append(f"({lo:g},{e:g}]")
            lo = e
        out.append(f">{lo:g}")
        return out


R0 = BinScheme("r0", ())
R1 = BinScheme("r1", (2.0,))
R2 = BinScheme("r2", tuple(float(k) for k in range(1, 10)))
SCHEMES = {s.name: s for s in (R0, R1, R2)}


def bin_reward(r: float, scheme: BinScheme) -> int:
    if r < 0:
        raise ValueError(f"negative reward {r}")
    if r == 0:
        return 0
    return 1 + bisect.bisect_left(scheme.edges, r)


def predicted_action_entropy(policy: Policy, assumed_states: Sequence[int] = CANONICAL_STATES) -> float:
    """Action entropy if decision states were uniform over ``assumed_states``."""
    if not assumed_states:
        raise ValueError("assumed_states must be non-empty")
    w = 1.0 / len(assumed_states)
    p = dict.fromkeys(ACTIONS, 0.0)
    for s in assumed_states:
        entry = policy[s]
        if entry is None:
            for a in ACTIONS:
                p[a] += w / len(ACTIONS)
        else:
            p[entry] += w
    return entropy_from_probs(p.values())


def predicted_state_entropy(assumed_states: Sequence[int] = CANONICAL_STATES) -> float:
    if not assumed_states:
        raise ValueError("assumed_states must be non-empty")
    return math.log2(len(assumed_states))


def baseline_states(n: int) -> tuple[int, ...]:
    """State set for the uniform baseline: 9 (all observed) or 7 (states 0-6)."""
    if n not in (7, 9):
        raise ValueError("baseline state set must be 7 or 9")
    return tuple(range(n))


@dataclass
class EntropyReport:
    policy_id: int
    H_state: float
    H_action: float
    H_reward: dict[str, float]
    H_action_pred: float
    H_state_pred: float
    total_reward: float
    replay_moves: int
    replicate: Optional[int] = None


def analyze_replay(
    trajectory: Sequence[MoveRecord],
    policy: Policy,
    schemes: Sequence[BinScheme] = (R0, R1, R2),
    assumed_states: Sequence[int] = CANONICAL_STATES,
    replicate: Optional[int] = None,
) -> EntropyReport:
    """Entropies of decision state, action and binned reward over a replay."""
    if not trajectory:
        raise EmptyHistogram("empty trajectory")
    states = Histogram.from_samples((r.state_before for r in trajectory), ALL_STATES)
    actions = Histogram.from_samples((r.action for r in trajectory), ACTIONS)
    h_reward = {}
    for sch in schemes:
        h = Histogram.from_samples(
            (bin_reward(r.reward, sch) for r in trajectory), range(sch.n_bins)
        )
        h_reward[sch.name] = entropy(h)
    return EntropyReport(
        policy_id=policy.id,
        H_state=entropy(states),
        H_action=entropy(actions),
        H_reward=h_reward,
        H_action_pred=predicted_action_entropy(policy, assumed_states),
        H_state_pred=predicted_state_entropy(assumed_states),
        total_reward=sum(r.reward for r in trajectory),
        replay_moves=len(trajectory),
        replicate=replicate,
    )


def state_counts(trajectory: Iterable[MoveRecord]) -> Counter:
    return Counter(r.state_before for r in trajectory)
