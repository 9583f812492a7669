"""Forward/inverse kinematics of the 3-joint leg (abduction, hip pitch, knee).

Leg frame: origin at the abduction axis, x forward, y lateral, z up.
The hip link offsets the thigh laterally (left +, right -); hip and knee
pitch about y, with the knee angle measured relative to the thigh.  Joint
order everywhere is (abd, hip, knee); legs are ordered LF, RF, LH, RH.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

HIP_LEN = 0.1
THIGH_LEN = 0.2
SHANK_LEN = 0.2

LEG_NAMES = ("LF", "RF", "LH", "RH")


class OutOfWorkspaceError(ValueError):
    """Foot target outside the reachable set; carries the shortfall in m."""

    def __init__(self, message: str, shortfall: float):
        super().__init__(message)
        self.shortfall = shortfall


@dataclass(frozen=True)
class LegGeometry:
    hip_len: float = HIP_LEN
    thigh_len: float = THIGH_LEN
    shank_len: float = SHANK_LEN
    side: str = "left"  # "left" or "right"

    def __post_init__(self):
        if min(self.hip_len, self.thigh_len, self.shank_len) <= 0.0:
            raise ValueError("link lengths must be positive")
        if self.side not in ("left", "right"):
            raise ValueError(f"side must be 'left' or 'right', got {self.side!r}")

    @property
    def lateral_sign(self) -> float:
        return 1.0 if self.side == "left" else -1.0

    @property
    def max_reach(self) -> float:
        return self.thigh_len + self.shank_len

    @property
    def min_reach(self) -> float:
        return abs(self.thigh_len - self.shank_len)


def planar_fk(q_hip: float, q_knee: float, geom: LegGeometry) -> tuple[float, float]:
    """Sagittal-plane foot position (x, z) below the hip pitch axis."""
    l1, l2 = geom.thigh_len, geom.shank_len
    x = l1 * math.sin(q_hip) + l2 * math.sin(q_hip + q_knee)
    z = -(l1 * math.cos(q_hip) + l2 * math.cos(q_hip + q_knee))
    return x, z


def leg_fk(q: np.ndarray, geom: LegGeometry) -> np.ndarray:
    """Foot position in the leg frame for joint angles q = (abd, hip, knee)."""
    q = np.asarray(q, dtype=float)
    if q.shape != (3,) or not np.all(np.isfinite(q)):
        raise ValueError("q must be 3 finite joint angles")
    q_abd, q_hip, q_knee = q
    x, zp = planar_fk(q_hip, q_knee, geom)
    yp = geom.lateral_sign * geom.hip_len
    # abduction rotates the (y, z) pair about the x axis
    ca, sa = math.cos(q_abd), math.sin(q_abd)
    return np.array([x, yp * ca - zp * sa, yp * sa + zp * ca])


def planar_ik(x: float, z: float, geom: LegGeometry) -> tuple[float, float]:
    """Hip and knee angles reaching sagittal target (x, z), knee-backward branch."""
    l1, l2 = geom.thigh_len, geom.shank_len
    d = math.hypot(x, z)
    if d > geom.max_reach:
        raise OutOfWorkspaceError(
            f"target at {d:.4f} m exceeds reach {geom.max_reach:.4f} m",
            shortfall=d - geom.max_reach,
        )
    if d < geom.min_reach:
        raise OutOfWorkspaceError(
            f"target at {d:.4f} m inside minimum reach {geom.min_reach:.4f} m",
            shortfall=geom.min_reach - d,
        )
    cos_knee = (d * d - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)
    q_knee = -math.acos(min(1.0, max(-1.0, cos_knee)))
    gamma = math.atan2(x, -z)
    cos_beta = (d * d + l1 * l1 - l2 * l2) / (2.0 * l1 * d)
    beta = math.acos(min(1.0, max(-1.0, cos_beta)))
    return gamma + beta, q_knee


def leg_ik(p: np.ndarray, geom: LegGeometry) -> np.ndarray:
    """Joint angles (abd, hip, knee) placing the foot at p in the leg frame.

    Selects the knee-backward branch (knee <= 0) with the foot below the
    hip pitch axis (planar depth <= 0), the branch every gait pose uses.
    Raises OutOfWorkspaceError when p cannot be reached.
    """
    p = np.asarray(p, dtype=float)
    if p.shape != (3,) or not np.all(np.isfinite(p)):
        raise ValueError("p must be a finite 3-vector")
    x, y, z = p
    lat2 = y * y + z * z
    h = geom.hip_len
    if lat2 < h * h:
        short = h - math.sqrt(lat2)
        raise OutOfWorkspaceError(
            f"target within {math.sqrt(lat2):.4f} m of the abduction axis, "
            f"below hip offset {h:.4f} m",
            shortfall=short,
        )
    # remove the abduction rotation: the planar depth is fixed by radius
    zp = -math.sqrt(lat2 - h * h)
    yp = geom.lateral_sign * h
    q_abd = math.atan2(z, y) - math.atan2(zp, yp)
    q_abd = math.atan2(math.sin(q_abd), math.cos(q_abd))  # wrap to (-pi, pi]
    q_hip, q_knee = planar_ik(x, zp, geom)
    return np.array([q_abd, q_hip, q_knee])


def planar_jacobian(q_hip: float, q_knee: float, geom: LegGeometry) -> np.ndarray:
    """2x2 Jacobian of planar_fk wrt (hip, knee)."""
    l1, l2 = geom.thigh_len, geom.shank_len
    s1, c1 = math.sin(q_hip), math.cos(q_hip)
    s12, c12 = math.sin(q_hip + q_knee), math.cos(q_hip + q_knee)
    return np.array([
        [l1 * c1 + l2 * c12, l2 * c12],
        [l1 * s1 + l2 * s12, l2 * s12],
    ])


def leg_jacobian(q: np.ndarray, geom: LegGeometry) -> np.ndarray:
    """3x3 Jacobian of leg_fk wrt (abd, hip, knee)."""
    q_abd, q_hip, q_knee = float(q[0]), float(q[1]), float(q[2])
    jp = planar_jacobian(q_hip, q_knee, geom)
    x, zp = planar_fk(q_hip, q_knee, geom)
    yp = geom.lateral_sign * geom.hip_len
    ca, sa = math.cos(q_abd), math.sin(q_abd)
    jac = np.zeros((3, 3))
    jac[0, 1:] = jp[0]
    # d/dq_abd of the rotated (y, z) pair
    jac[1, 0] = -yp * sa - zp * ca
    jac[2, 0] = yp * ca - zp * sa
    # hip/knee move zp only; rotation maps dz -> (-sa, ca)
    jac[1, 1:] = -sa * jp[1]
    jac[2, 1:] = ca * jp[1]
    return jac


def clamp_to_workspace(x: float, z: float, geom: LegGeometry, margin: float = 0.0) -> tuple[float, float]:
    """Radially project a sagittal point onto the reachable annulus."""
    d = math.hypot(x, z)
    hi = geom.max_reach - margin
    lo = geom.min_reach + margin if geom.min_reach > 0.0 else 0.0
    if d > hi:
        s = hi / d
        return x * s, z * s
    if 0.0 < d < lo:
        s = lo / d
        return x * s, z * s
    if d == 0.0 and lo > 0.0:
        return 0.0, -lo
    return x, z
