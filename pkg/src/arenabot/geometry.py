"""Arena geometry, robot pose, ground sensors and noisy kinematics.

Coordinates are in centimetres. The white floor is the axis-aligned
rectangle ``[0, width] x [0, height]`` with the long side along x; the
black border around it is unbounded. A heading of 0 points along +x and
angles increase counter-clockwise.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi

# Distance past the edge at which forward travel is stopped.
EDGE_OVERRUN_CM = 0.1


class ForwardBlocked(ValueError):
    """Raised when forward motion is requested while a front sensor reads dark."""


@dataclass(frozen=True)
class ArenaSpec:
    white_width_cm: float = 126.3
    white_height_cm: float = 100.0

    def __post_init__(self):
        if not (self.white_width_cm > 0 and self.white_height_cm > 0):
            raise ValueError("arena dimensions must be strictly positive")

    @property
    def center(self) -> tuple[float, float]:
        return self.white_width_cm / 2.0, self.white_height_cm / 2.0

    def contains(self, x: float, y: float) -> bool:
        """True if (x, y) lies on the closed white rectangle."""
        return 0.0 <= x <= self.white_width_cm and 0.0 <= y <= self.white_height_cm


@dataclass(frozen=True)
class RobotSpec:
    """Square robot with one ground sensor under each corner.

    Sensor offsets are body-frame ``(forward, left)`` pairs in the fixed
    order front-left, front-right, rear-left, rear-right.
    """

    side_cm: float = 12.0

    def __post_init__(self):
        if self.side_cm <= 0:
            raise ValueError("robot side must be strictly positive")

    @property
    def sensor_offsets(self) -> tuple[tuple[float, float], ...]:
        h = self.side_cm / 2.0
        return ((h, h), (h, -h), (-h, h), (-h, -h))

    @property
    def front_sensors(self) -> tuple[int, int]:
        return (0, 1)


def normalize_angle(theta: float) -> float:
    """Wrap an angle into [0, 2*pi)."""
    t = math.fmod(theta, TWO_PI)
    if t < 0.0:
        t += TWO_PI
    # fmod of a tiny negative can round back up to exactly 2*pi
    if t >= TWO_PI:
        t = 0.0
    return t


@dataclass(frozen=True)
class Pose:
    x_cm: float
    y_cm: float
    theta_rad: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "theta_rad", normalize_angle(self.theta_rad))

    @classmethod
    def start(cls, arena: ArenaSpec) -> "Pose":
        """Arena centre, heading 0."""
        x, y = arena.center
        return cls(x, y, 0.0)


@dataclass(frozen=True)
class NoiseSpec:
    """Uniform actuation noise.

    ``forward_overshoot`` is the interval for the extra forward travel in cm,
    ``rotation_noise`` the interval added to each turn in radians. Both
    intervals are open. With ``enabled=False`` the noise terms are exactly 0
    and no random numbers are consumed.
    """

    forward_overshoot: tuple[float, float] = (0.0, 1.5)
    rotation_noise: tuple[float, float] = (-0.06, 0.06)
    enabled: bool = True

    def __post_init__(self):
        for lo, hi in (self.forward_overshoot, self.rotation_noise):
            if lo > hi:
                raise ValueError(f"noise interval lower bound {lo} exceeds upper bound {hi}")

    @classmethod
    def off(cls) -> "NoiseSpec":
        return cls(enabled=False)

    @property
    def max_overshoot(self) -> float:
        return self.forward_overshoot[1] if self.enabled else 0.0


@dataclass(frozen=True)
class SensorPattern:
    """Four ground-sensor readings; True means the sensor sees dark."""

    fl: bool = False
    fr: bool = False
    rl: bool = False
    rr: bool = False

    @property
    def front_dark(self) -> bool:
        return self.fl or self.fr

    @property
    def bits(self) -> str:
        return "".join("1" if b else "0" for b in (self.fl, self.fr, self.rl, self.rr))


class Turn(Enum):
    LEFT90 = math.pi / 2.0
    RIGHT90 = -math.pi / 2.0
    ABOUT180 = math.pi


def _open_uniform(rng: np.random.Generator, lo: float, hi: float) -> float:
    """Draw from the open interval (lo, hi); degenerate intervals return lo."""
    if lo == hi:
        return lo
    while True:
        v = float(rng.uniform(lo, hi))
        if v != lo:
            return v


def sensor_positions(pose: Pose, robot: RobotSpec) -> list[tuple[float, float]]:
    """World-frame positions of the four sensors (FL, FR, RL, RR)."""
    c, s = math.cos(pose.theta_rad), math.sin(pose.theta_rad)
    out = []
    for fwd, left in robot.sensor_offsets:
        out.append((pose.x_cm + fwd * c - left * s, pose.y_cm + fwd * s + left * c))
    return out


def sense(pose: Pose, arena: ArenaSpec, robot: RobotSpec = RobotSpec()) -> SensorPattern:
    """Read the ground sensors: dark iff outside the closed white rectangle."""
    dark = [not arena.contains(x, y) for x, y in sensor_positions(pose, robot)]
    return SensorPattern(*dark)


def _exit_distance(px: float, py: float, ux: float, uy: float, arena: ArenaSpec) -> float:
    """Distance along (ux, uy) at which a point inside the arena reaches its edge."""
    d = math.inf
    if ux > 0.0:
        d = min(d, (arena.white_width_cm - px) / ux)
    elif ux < 0.0:
        d = min(d, -px / ux)
    if uy > 0.0:
        d = min(d, (arena.white_height_cm - py) / uy)
    elif uy < 0.0:
        d = min(d, -py / uy)
    return d


def forward_distance(
    pose: Pose,
    arena: ArenaSpec,
    robot: RobotSpec = RobotSpec(),
    cap_cm: float = 100.0,
) -> float:
    """Noise-free forward travel from ``pose``.

    The robot stops once either front sensor is ``EDGE_OVERRUN_CM`` past the
    edge, or after ``cap_cm``, whichever comes first.

    Raises:
        ForwardBlocked: if a front sensor already reads dark.
    """
    pos = sensor_positions(pose, robot)
    front = [pos[i] for i in robot.front_sensors]
    if any(not arena.contains(x, y) for x, y in front):
        raise ForwardBlocked(f"front sensor dark at {pose}")
    ux, uy = math.cos(pose.theta_rad), math.sin(pose.theta_rad)
    d_cross = min(_exit_distance(x, y, ux, uy, arena) for x, y in front)
    return min(cap_cm, d_cross + EDGE_OVERRUN_CM)


def apply_forward(
    pose: Pose,
    rng: np.random.Generator,
    noise: NoiseSpec = NoiseSpec(),
    arena: ArenaSpec = ArenaSpec(),
    robot: RobotSpec = RobotSpec(),
    cap_cm: float = 100.0,
) -> tuple[Pose, float]:
    """Move forward with overshoot noise. Returns ``(new_pose, travel_cm)``."""
    travel = forward_distance(pose, arena, robot, cap_cm)
    if noise.enabled:
        travel += _open_uniform(rng, *noise.forward_overshoot)
    new = Pose(
        pose.x_cm + travel * math.cos(pose.theta_rad),
        pose.y_cm + travel * math.sin(pose.theta_rad),
        pose.theta_rad,
    )
    if not arena.contains(new.x_cm, new.y_cm):
        logger.warning("robot centre left the white area: %s", new)
    return new, travel


def apply_turn(
    pose: Pose,
    kind: Turn,
    rng: np.random.Generator,
    noise: NoiseSpec = NoiseSpec(),
) -> Pose:
    """Rotate about the robot centre, adding rotation noise."""
    dtheta = kind.value
    if noise.enabled:
        dtheta += _open_uniform(rng, *noise.rotation_noise)
    return Pose(pose.x_cm, pose.y_cm, pose.theta_rad + dtheta)


def max_sensor_excursion(pose: Pose, arena: ArenaSpec, robot: RobotSpec = RobotSpec()) -> float:
    """Largest distance of any sensor outside the white rectangle (0 if all inside)."""
    worst = 0.0
    for x, y in sensor_positions(pose, robot):
        dx = max(0.0, -x, x - arena.white_width_cm)
        dy = max(0.0, -y, y - arena.white_height_cm)
        worst = max(worst, math.hypot(dx, dy))
    return worst
