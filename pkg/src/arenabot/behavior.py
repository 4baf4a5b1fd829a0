"""State encoding, action alphabet, reward rule, policies and single moves."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional

import numpy as np

from .geometry import (
    ArenaSpec,
    NoiseSpec,
    Pose,
    RobotSpec,
    SensorPattern,
    Turn,
    apply_forward,
    apply_turn,
    sense,
)


class Action(str, Enum):
    FORWARD = "F"
    LEFT90 = "L"
    RIGHT90 = "R"
    ABOUT180 = "A"
    NOMOVE = "N"

    def __str__(self) -> str:
        return self.value


ACTIONS: tuple[Action, ...] = tuple(Action)

# Marker used in serialized policies for the uniform-random entry.
RAND = "RAND"

CANONICAL_STATES = tuple(range(9))
ALL_STATES = tuple(range(16))
FRONT_ACTIVE_STATES = frozenset({1, 2, 3})

_TURNS = {
    Action.LEFT90: Turn.LEFT90,
    Action.RIGHT90: Turn.RIGHT90,
    Action.ABOUT180: Turn.ABOUT180,
}

# (fl, fr, rl, rr) -> state id for the nine patterns that occur in practice.
_CANONICAL = {
    (False, False, False, False): 0,
    (True, False, False, False): 1,
    (False, True, False, False): 2,
    (True, True, False, False): 3,
    (False, False, True, False): 4,
    (False, False, False, True): 5,
    (False, False, True, True): 6,
    (True, False, True, False): 7,
    (False, True, False, True): 8,
}


def _pattern_code(bits: tuple[bool, bool, bool, bool]) -> int:
    fl, fr, rl, rr = bits
    return 8 * fl + 4 * fr + 2 * rl + rr


def _build_tables():
    encode = dict(_CANONICAL)
    rest = sorted(
        (
            (fl, fr, rl, rr)
            for fl in (False, True)
            for fr in (False, True)
            for rl in (False, True)
            for rr in (False, True)
            if (fl, fr, rl, rr) not in _CANONICAL
        ),
        key=_pattern_code,
    )
    for i, bits in enumerate(rest, start=9):
        encode[bits] = i
    decode = {v: SensorPattern(*k) for k, v in encode.items()}
    return encode, decode


_ENCODE, _DECODE = _build_tables()


def encode_state(pattern: SensorPattern) -> int:
    """Map a sensor pattern to its state id.

    0: all light, 1: FL, 2: FR, 3: FL+FR, 4: RL, 5: RR, 6: RL+RR,
    7: FL+RL (left side), 8: FR+RR (right side). The seven remaining
    patterns get ids 9-15 in increasing order of the bit code
    ``fl fr rl rr`` read as a binary number.
    """
    return _ENCODE[(pattern.fl, pattern.fr, pattern.rl, pattern.rr)]


def decode_state(state: int) -> SensorPattern:
    return _DECODE[state]


def parse_action(token: str) -> Optional[Action]:
    """Parse an action letter; ``"RAND"`` gives ``None``."""
    if token == RAND:
        return None
    return Action(token)


def action_token(entry: Optional[Action]) -> str:
    return RAND if entry is None else entry.value


@dataclass(frozen=True)
class Policy:
    """State -> action table. ``None`` entries choose uniformly at random.

    Only the canonical states 0-8 are stored; overflow states are always
    random.
    """

    entries: tuple[Optional[Action], ...] = (None,) * 9
    id: int = 1

    def __post_init__(self):
        if len(self.entries) != len(CANONICAL_STATES):
            raise ValueError(f"policy needs {len(CANONICAL_STATES)} entries, got {len(self.entries)}")

    @classmethod
    def all_random(cls, id: int = 1) -> "Policy":
        return cls((None,) * 9, id)

    @classmethod
    def from_tokens(cls, tokens, id: int = 1) -> "Policy":
        """Build from a sequence of 9 tokens or a ``{state: token}`` mapping.

        Missing states in a mapping default to ``"RAND"``.
        """
        if isinstance(tokens, Mapping):
            seq = [tokens.get(s, tokens.get(str(s), RAND)) for s in CANONICAL_STATES]
        else:
            seq = list(tokens)
        return cls(tuple(parse_action(t) for t in seq), id)

    def __getitem__(self, state: int) -> Optional[Action]:
        if 0 <= state < len(self.entries):
            return self.entries[state]
        return None

    def with_entry(self, state: int, action: Optional[Action], id: Optional[int] = None) -> "Policy":
        entries = list(self.entries)
        entries[state] = action
        return Policy(tuple(entries), self.id if id is None else id)

    def tokens(self) -> dict[int, str]:
        return {s: action_token(a) for s, a in enumerate(self.entries)}


@dataclass(frozen=True)
class MoveRecord:
    move_index: int
    episode_index: int
    phase: str
    state_before: int
    action: Action
    state_after: int
    reward: float
    pose_after: Pose = field(repr=False)


def reward_for(state_before: int, action: Action, state_after: int, travel_cm: float = 0.0) -> float:
    """Points earned by one move.

    Forward earns one point per 10 cm actually travelled. A turn out of a
    front-active state (1, 2 or 3) into a state with both front sensors
    light earns 2 for a quarter turn and 1 for an about-face.
    """
    if action is Action.FORWARD:
        return travel_cm / 10.0
    if action is Action.NOMOVE:
        return 0.0
    clears = state_before in FRONT_ACTIVE_STATES and not decode_state(state_after).front_dark
    if not clears:
        return 0.0
    return 1.0 if action is Action.ABOUT180 else 2.0


def random_action(rng: np.random.Generator) -> Action:
    return ACTIONS[int(rng.integers(len(ACTIONS)))]


def policy_action(policy: Policy, state: int, rng: np.random.Generator) -> Action:
    entry = policy[state]
    if entry is None:
        return random_action(rng)
    return entry


@dataclass(frozen=True)
class SimSpecs:
    """Bundle of the physical specs a move needs."""

    arena: ArenaSpec = ArenaSpec()
    robot: RobotSpec = RobotSpec()
    noise: NoiseSpec = NoiseSpec()
    forward_cap_cm: float = 100.0


def step(pose: Pose, action: Action, rng: np.random.Generator, specs: SimSpecs = SimSpecs()):
    """Execute ``action`` from ``pose``.

    Returns ``(state_before, state_after, reward, new_pose)``. A forward
    move with a dark front sensor is refused: the pose is unchanged and no
    reward is paid.
    """
    before_pattern = sense(pose, specs.arena, specs.robot)
    before = encode_state(before_pattern)
    travel = 0.0
    if action is Action.FORWARD:
        if before_pattern.front_dark:
            return before, before, 0.0, pose
        new_pose, travel = apply_forward(
            pose, rng, specs.noise, specs.arena, specs.robot, specs.forward_cap_cm
        )
    elif action is Action.NOMOVE:
        new_pose = pose
    else:
        new_pose = apply_turn(pose, _TURNS[action], rng, specs.noise)
    after = encode_state(sense(new_pose, specs.arena, specs.robot))
    return before, after, reward_for(before, action, after, travel), new_pose


def execute_move(
    pose: Pose,
    action: Action,
    rng: np.random.Generator,
    specs: SimSpecs = SimSpecs(),
    move_index: int = 1,
    episode_index: int = 1,
    phase: str = "policy",
) -> MoveRecord:
    """Run one move and wrap the outcome in a :class:`MoveRecord`."""
    before, after, reward, new_pose = step(pose, action, rng, specs)
    return MoveRecord(move_index, episode_index, phase, before, action, after, reward, new_pose)


def execute_policy_move(
    pose: Pose,
    policy: Policy,
    rng: np.random.Generator,
    specs: SimSpecs = SimSpecs(),
    move_index: int = 1,
    episode_index: int = 1,
    phase: str = "policy",
) -> MoveRecord:
    """Sense, pick the policy's action for that state, then move."""
    state = encode_state(sense(pose, specs.arena, specs.robot))
    action = policy_action(policy, state, rng)
    return execute_move(pose, action, rng, specs, move_index, episode_index, phase)
