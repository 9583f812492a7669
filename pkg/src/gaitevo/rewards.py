"""Per-step reward components, actuator power, and the wide stability margin.

Six weighted components: forward-speed tracking, energy use, base wobble,
foot slip, excess ground contacts, and unexpected contacts.  A curriculum
factor gates the secondary terms down until the speed target is met, so
the learner cannot settle for standing still.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_WEIGHTS = (1.5, 0.07, 0.6, 0.3, 0.1, 0.1)
CURRICULUM_GAIN = 4.5


@dataclass(frozen=True)
class RewardConfig:
    """Weights and coefficients of the six-component reward."""

    weights: tuple[float, ...] = DEFAULT_WEIGHTS
    base_motion_coef: float = 4.0     # c_b inside the wobble tanh
    foot_coef: float = 2.5            # c_f on the foot-velocity term
    desired_speed: float = 0.5        # m/s
    dt: float = 0.02                  # control step, s
    # energy term uses the signed sum(tau * qdot) as designed; the absolute
    # variant penalizes regeneration too
    absolute_energy: bool = False
    # replace the slip penalty with the literal per-contact speed bonus
    literal_foot_term: bool = False

    def __post_init__(self):
        if len(self.weights) != 6:
            raise ValueError("exactly six component weights required")
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")


@dataclass(frozen=True)
class RewardBreakdown:
    velocity: float
    energy: float
    base_motion: float
    foot_velocity: float
    contact: float
    unexpected: float
    curriculum: float
    total: float

    def components(self) -> tuple[float, ...]:
        return (self.velocity, self.energy, self.base_motion,
                self.foot_velocity, self.contact, self.unexpected)


def curriculum_factor(vx: float, vd: float) -> float:
    """1 - tanh(4.5 * min(vx - vd, 0)^2): 1 once the speed target is met,
    approaching 0 as the shortfall grows."""
    gap = min(vx - vd, 0.0)
    return 1.0 - math.tanh(CURRICULUM_GAIN * gap * gap)


def compute_reward(
    cfg: RewardConfig,
    forward_speed: float,
    torques: np.ndarray,
    joint_rates: np.ndarray,
    angular_velocity_xy: np.ndarray,
    foot_velocities: np.ndarray,
    foot_contacts: np.ndarray,
    ideal_support: int,
    unexpected_contacts: int,
) -> RewardBreakdown:
    """Evaluate all six components for one control step.

    foot_velocities is (4, 3) world-frame foot point velocities and
    foot_contacts the matching boolean flags; ideal_support is the stance
    count the gait phase prescribes right now.
    """
    torques = np.asarray(torques, dtype=float)
    joint_rates = np.asarray(joint_rates, dtype=float)
    contacts = np.asarray(foot_contacts, dtype=bool)

    ck = curriculum_factor(forward_speed, cfg.desired_speed)

    r_v = min(cfg.desired_speed, forward_speed)

    mech = torques * joint_rates
    if cfg.absolute_energy:
        r_e = -ck * float(np.sum(np.abs(mech))) * cfg.dt
    else:
        r_e = -ck * float(np.sum(mech)) * cfg.dt

    wobble = float(np.dot(angular_velocity_xy, angular_velocity_xy))
    r_b = ck * (math.tanh(cfg.base_motion_coef * wobble) - 1.0)

    if cfg.literal_foot_term:
        r_f = cfg.foot_coef * min(cfg.desired_speed, forward_speed) * int(contacts.sum())
    else:
        speeds_sq = np.sum(np.asarray(foot_velocities, dtype=float) ** 2, axis=1)
        r_f = -cfg.foot_coef * float(np.sum(speeds_sq[contacts])) * cfg.dt

    r_c = -max(int(contacts.sum()) - int(ideal_support), 0)
    r_u = -int(unexpected_contacts)

    comps = (r_v, r_e, r_b, r_f, r_c, r_u)
    total = float(np.dot(cfg.weights, comps))
    return RewardBreakdown(*comps, curriculum=ck, total=total)


def power(torques: np.ndarray, joint_rates: np.ndarray) -> float:
    """Total actuator power: sum of |tau * qdot| over all joints, watts."""
    torques = np.asarray(torques, dtype=float)
    joint_rates = np.asarray(joint_rates, dtype=float)
    if not (np.all(np.isfinite(torques)) and np.all(np.isfinite(joint_rates))):
        raise ValueError("torques and joint rates must be finite")
    return float(np.sum(np.abs(torques * joint_rates)))


def _segment_intersection(p1, p2, p3, p4) -> np.ndarray | None:
    d1 = p2 - p1
    d2 = p4 - p3
    denom = d1[0] * d2[1] - d1[1] * d2[0]
    if abs(denom) < 1e-12:
        return None
    t = ((p3[0] - p1[0]) * d2[1] - (p3[1] - p1[1]) * d2[0]) / denom
    return p1 + t * d1


def wsm(com_xy: np.ndarray, support_feet: list[np.ndarray]) -> float | None:
    """Distance from the CoM ground projection to the support-polygon pivot.

    With four supports (perimeter order LF, RF, RH, LH) the pivot is the
    intersection of the two diagonals; with three supports the triangle
    centroid.  Returns None when fewer than three feet support the robot
    or the diagonals are degenerate.  Smaller is more stable.
    """
    com = np.asarray(com_xy, dtype=float)[:2]
    feet = [np.asarray(f, dtype=float)[:2] for f in support_feet]
    if len(feet) < 3:
        return None
    if len(feet) == 3:
        pivot = (feet[0] + feet[1] + feet[2]) / 3.0
    else:
        pivot = _segment_intersection(feet[0], feet[2], feet[1], feet[3])
        if pivot is None:
            return None
    return float(np.linalg.norm(com - pivot))
