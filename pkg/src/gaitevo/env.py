"""Reduced-order quadruped simulation.

The model is a floating rigid base with the four leg masses lumped into
it, twelve PD-driven joints with decoupled rotor inertias, and kinematic
feet that interact with the terrain through a penalty spring-damper
normal force plus regularized Coulomb friction.  Contact forces act on
the base directly and fold the leg joints through the leg Jacobian
transpose, which is what makes an unpowered robot collapse and a powered
one stand.

Orientation uses roll-pitch-yaw with the angular velocity integrated as
the pose rate; adequate inside the termination envelope (|roll|, |pitch|
< 0.8 rad).  Contact is resolved along world axes: vertical normal,
horizontal friction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .kinematics import LegGeometry, leg_fk, leg_jacobian
from .terrain import TerrainSpec, terrain_height

GRAVITY = 9.81
NUM_LEGS = 4
NUM_JOINTS = 12

CONTROL_DT = 0.02
SUBSTEPS = 8

OBS_FULL_DIM = 49
OBS_PARTIAL_DIM = 37
# block boundaries of the full observation: v | qd | rpy | drpy | c_f | F_f | p_f
OBS_BLOCKS = (3, 15, 18, 21, 25, 37, 49)


class SimulationDivergedError(RuntimeError):
    """Dynamics produced a non-finite state; the episode must be aborted."""


@dataclass(frozen=True)
class RobotModel:
    """Masses, gains, limits, and contact constants of the reduced robot."""

    base_mass: float = 10.5
    leg_mass: float = 2.0
    torque_limit: float = 33.5
    kp: tuple[float, float, float] = (80.0, 120.0, 90.0)   # abd, hip, knee
    kd: tuple[float, float, float] = (2.0, 4.0, 3.0)
    init_height: float = 0.26
    init_angles: tuple[float, float, float] = (0.0, 0.9, -1.8)
    hip_x: float = 0.1881
    hip_y: float = 0.04675
    # reduced-model constants (not physical plate values); joint inertia
    # and damping include the reflected rotor and gearbox
    inertia: tuple[float, float, float] = (0.14, 0.45, 0.53)
    joint_inertia: float = 0.05
    joint_damping: float = 0.5
    contact_stiffness: float = 3.0e4
    contact_damping: float = 300.0
    friction: float = 0.8
    stiction_velocity: float = 1.0e-3
    # per-contact effective mass bounding the friction impulse; keeps the
    # regularized stiction stable at the 2.5 ms substep
    stiction_mass: float = 4.0
    body_clearance: float = 0.05
    fall_height: float = 0.12
    fall_angle: float = 0.8

    def __post_init__(self):
        if min(self.base_mass, self.leg_mass, self.torque_limit) <= 0.0:
            raise ValueError("masses and torque limit must be positive")
        if min(self.kp) <= 0.0 or min(self.kd) <= 0.0:
            raise ValueError("PD gains must be positive")

    @property
    def total_mass(self) -> float:
        return self.base_mass + NUM_LEGS * self.leg_mass

    def kp_vector(self) -> np.ndarray:
        return np.tile(np.asarray(self.kp, dtype=float), NUM_LEGS)

    def kd_vector(self) -> np.ndarray:
        return np.tile(np.asarray(self.kd, dtype=float), NUM_LEGS)

    def hip_offsets(self) -> np.ndarray:
        """Hip origins in the base frame, legs ordered LF, RF, LH, RH."""
        x, y = self.hip_x, self.hip_y
        return np.array([
            [x, y, 0.0],
            [x, -y, 0.0],
            [-x, y, 0.0],
            [-x, -y, 0.0],
        ])

    def leg_geometries(self) -> tuple[LegGeometry, ...]:
        return (
            LegGeometry(side="left"),
            LegGeometry(side="right"),
            LegGeometry(side="left"),
            LegGeometry(side="right"),
        )


@dataclass
class RobotState:
    """Full simulation state plus the contact summary of the last step."""

    base_pos: np.ndarray        # (3,) m, world
    base_rpy: np.ndarray        # (3,) rad
    base_vel: np.ndarray        # (3,) m/s, world
    base_angvel: np.ndarray     # (3,) rad/s
    q: np.ndarray               # (12,) rad
    qd: np.ndarray              # (12,) rad/s
    foot_contacts: np.ndarray = field(default_factory=lambda: np.zeros(NUM_LEGS, dtype=bool))
    foot_forces: np.ndarray = field(default_factory=lambda: np.zeros((NUM_LEGS, 3)))
    foot_positions: np.ndarray = field(default_factory=lambda: np.zeros((NUM_LEGS, 3)))
    foot_velocities: np.ndarray = field(default_factory=lambda: np.zeros((NUM_LEGS, 3)))
    torques: np.ndarray = field(default_factory=lambda: np.zeros(NUM_JOINTS))
    unexpected_contacts: int = 0

    def copy(self) -> "RobotState":
        return RobotState(
            base_pos=self.base_pos.copy(), base_rpy=self.base_rpy.copy(),
            base_vel=self.base_vel.copy(), base_angvel=self.base_angvel.copy(),
            q=self.q.copy(), qd=self.qd.copy(),
            foot_contacts=self.foot_contacts.copy(),
            foot_forces=self.foot_forces.copy(),
            foot_positions=self.foot_positions.copy(),
            foot_velocities=self.foot_velocities.copy(),
            torques=self.torques.copy(),
            unexpected_contacts=self.unexpected_contacts,
        )


def rpy_matrix(rpy: np.ndarray) -> np.ndarray:
    """Rotation matrix for roll-pitch-yaw (Rz @ Ry @ Rx)."""
    cr, sr = math.cos(rpy[0]), math.sin(rpy[0])
    cp, sp = math.cos(rpy[1]), math.sin(rpy[1])
    cy, sy = math.cos(rpy[2]), math.sin(rpy[2])
    return np.array([
        [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
        [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
        [-sp, cp * sr, cp * cr],
    ])


def pd_torque(q_target: np.ndarray, q: np.ndarray, qd: np.ndarray,
              kp: np.ndarray, kd: np.ndarray, limit: float = 33.5) -> np.ndarray:
    """PD law with zero desired velocity, clamped to the motor limit."""
    q_target = np.asarray(q_target, dtype=float)
    tau = kp * (q_target - q) - kd * qd
    return np.clip(tau, -limit, limit)


class QuadrupedSim:
    """Steps the reduced model at 50 Hz with 8 semi-implicit Euler substeps."""

    def __init__(self, spec: TerrainSpec | None = None, model: RobotModel | None = None,
                 max_episode_steps: int = 300, joint_jitter: float = 0.0):
        self.spec = spec if spec is not None else TerrainSpec()
        self.model = model if model is not None else RobotModel()
        self.max_episode_steps = max_episode_steps
        self.joint_jitter = joint_jitter
        self._kp = self.model.kp_vector()
        self._kd = self.model.kd_vector()
        self._hips = self.model.hip_offsets()
        self._geoms = self.model.leg_geometries()
        self._inertia = np.asarray(self.model.inertia, dtype=float)
        self.state: RobotState | None = None
        self.step_count = 0

    # -- lifecycle ---------------------------------------------------------

    def reset(self, rng: np.random.Generator | None = None) -> tuple[RobotState, np.ndarray]:
        """Place the robot at the initial pose over the terrain origin."""
        q = np.tile(np.asarray(self.model.init_angles, dtype=float), NUM_LEGS)
        if self.joint_jitter > 0.0:
            if rng is None:
                raise ValueError("joint_jitter requires an rng")
            q = q + rng.uniform(-self.joint_jitter, self.joint_jitter, NUM_JOINTS)
        z0 = terrain_height(self.spec, 0.0, 0.0) + self.model.init_height
        state = RobotState(
            base_pos=np.array([0.0, 0.0, z0]),
            base_rpy=np.zeros(3),
            base_vel=np.zeros(3),
            base_angvel=np.zeros(3),
            q=q,
            qd=np.zeros(NUM_JOINTS),
        )
        self._refresh_foot_summary(state)
        self.state = state
        self.step_count = 0
        return state, self.build_observation(state, "full")

    # -- per-substep physics -----------------------------------------------

    def _foot_kinematics(self, state: RobotState, rot: np.ndarray):
        """World positions, velocities, and leg Jacobians of all feet."""
        positions = np.empty((NUM_LEGS, 3))
        velocities = np.empty((NUM_LEGS, 3))
        jacobians = []
        omega = state.base_angvel
        for leg in range(NUM_LEGS):
            sl = slice(3 * leg, 3 * leg + 3)
            q_leg = state.q[sl]
            rel = self._hips[leg] + leg_fk(q_leg, self._geoms[leg])
            rel_w = rot @ rel
            jac = leg_jacobian(q_leg, self._geoms[leg])
            positions[leg] = state.base_pos + rel_w
            velocities[leg] = (state.base_vel + np.cross(omega, rel_w)
                               + rot @ (jac @ state.qd[sl]))
            jacobians.append(jac)
        return positions, velocities, jacobians

    def _contact_force(self, pos: np.ndarray, vel: np.ndarray, dt: float):
        """Penalty contact force at one point, world frame; zero when clear."""
        m = self.model
        pen = terrain_height(self.spec, pos[0], pos[1]) - pos[2]
        if pen <= 0.0:
            return np.zeros(3), False
        fn = m.contact_stiffness * pen - m.contact_damping * vel[2]
        if fn <= 0.0:
            return np.zeros(3), False
        vt = math.hypot(vel[0], vel[1])
        ft = np.zeros(2)
        if vt > 0.0:
            mag = m.friction * fn * min(vt / m.stiction_velocity, 1.0)
            mag = min(mag, m.stiction_mass * vt / dt)  # impulse cap
            ft = -mag / vt * vel[:2]
        return np.array([ft[0], ft[1], fn]), True

    def _substep(self, state: RobotState, q_target: np.ndarray, dt: float,
                 external_force: np.ndarray):
        m = self.model
        rot = rpy_matrix(state.base_rpy)
        tau = pd_torque(q_target, state.q, state.qd, self._kp, self._kd, m.torque_limit)

        positions, velocities, jacobians = self._foot_kinematics(state, rot)
        forces = np.zeros((NUM_LEGS, 3))
        contacts = np.zeros(NUM_LEGS, dtype=bool)
        total_force = m.total_mass * np.array([0.0, 0.0, -GRAVITY]) + external_force
        total_torque = np.zeros(3)
        joint_ext = np.zeros(NUM_JOINTS)
        for leg in range(NUM_LEGS):
            f, touching = self._contact_force(positions[leg], velocities[leg], dt)
            forces[leg] = f
            contacts[leg] = touching
            if touching:
                total_force += f
                total_torque += np.cross(positions[leg] - state.base_pos, f)
                # reaction folds the leg through the Jacobian transpose
                f_leg = rot.T @ f
                sl = slice(3 * leg, 3 * leg + 3)
                joint_ext[sl] = jacobians[leg].T @ f_leg

        # base belly contact: penalty force straight up at the base center
        belly = state.base_pos[2] - m.body_clearance
        ground = terrain_height(self.spec, state.base_pos[0], state.base_pos[1])
        if belly < ground:
            fb = m.contact_stiffness * (ground - belly) - m.contact_damping * state.base_vel[2]
            if fb > 0.0:
                total_force[2] += fb

        lin_acc = total_force / m.total_mass
        ang_acc = total_torque / self._inertia
        joint_acc = (tau + joint_ext - m.joint_damping * state.qd) / m.joint_inertia

        state.base_vel = state.base_vel + dt * lin_acc
        state.base_angvel = state.base_angvel + dt * ang_acc
        state.qd = state.qd + dt * joint_acc
        state.base_pos = state.base_pos + dt * state.base_vel
        state.base_rpy = state.base_rpy + dt * state.base_angvel
        state.q = state.q + dt * state.qd

        return tau, positions, velocities, forces, contacts

    def _refresh_foot_summary(self, state: RobotState):
        rot = rpy_matrix(state.base_rpy)
        positions, velocities, _ = self._foot_kinematics(state, rot)
        state.foot_positions = positions
        state.foot_velocities = velocities

    def _count_unexpected(self, state: RobotState) -> int:
        """Parts in unexpected ground contact at the control boundary:
        the base belly plus any knee below the terrain."""
        m = self.model
        count = 0
        ground = terrain_height(self.spec, state.base_pos[0], state.base_pos[1])
        if state.base_pos[2] - m.body_clearance < ground:
            count += 1
        rot = rpy_matrix(state.base_rpy)
        for leg in range(NUM_LEGS):
            q_leg = state.q[3 * leg:3 * leg + 3]
            knee_w = state.base_pos + rot @ (self._hips[leg]
                                             + knee_point(q_leg, self._geoms[leg]))
            if knee_w[2] < terrain_height(self.spec, knee_w[0], knee_w[1]):
                count += 1
        return count

    # -- public stepping -----------------------------------------------------

    def step(self, a_target: np.ndarray, external_force: np.ndarray | None = None
             ) -> tuple[RobotState, np.ndarray, bool, dict]:
        """Advance one 0.02 s control step toward the joint targets.

        Returns (state, full observation, done, info); info reports the
        fall flag, the per-step unexpected-contact count, and the applied
        torques of the final substep.
        """
        if self.state is None:
            raise RuntimeError("call reset() before step()")
        a_target = np.asarray(a_target, dtype=float)
        if a_target.shape != (NUM_JOINTS,) or not np.all(np.isfinite(a_target)):
            raise ValueError("a_target must be 12 finite joint angles")
        ext = np.zeros(3) if external_force is None else np.asarray(external_force, dtype=float)

        state = self.state
        dt = CONTROL_DT / SUBSTEPS
        tau = positions = velocities = forces = contacts = None
        for _ in range(SUBSTEPS):
            tau, positions, velocities, forces, contacts = \
                self._substep(state, a_target, dt, ext)

        if not (np.all(np.isfinite(state.base_pos)) and np.all(np.isfinite(state.q))
                and np.all(np.isfinite(state.base_vel)) and np.all(np.isfinite(state.qd))):
            raise SimulationDivergedError("non-finite state after substeps")
        unexpected = self._count_unexpected(state)

        state.torques = tau
        state.foot_positions = positions
        state.foot_velocities = velocities
        state.foot_forces = forces
        state.foot_contacts = contacts
        state.unexpected_contacts = unexpected
        self.step_count += 1

        ground = terrain_height(self.spec, state.base_pos[0], state.base_pos[1])
        height = state.base_pos[2] - ground
        fell = (height < self.model.fall_height
                or abs(state.base_rpy[0]) > self.model.fall_angle
                or abs(state.base_rpy[1]) > self.model.fall_angle)
        done = fell or self.step_count >= self.max_episode_steps

        info = {
            "fell": fell,
            "height": height,
            "unexpected_contacts": unexpected,
            "torques": tau,
            "step": self.step_count,
        }
        return state, self.build_observation(state, "full"), done, info

    # -- observations --------------------------------------------------------

    def build_observation(self, state: RobotState, mode: str) -> np.ndarray:
        """Concatenated observation: v, qd, rpy, drpy, c_f, F_f[, p_f]."""
        if mode not in ("full", "partial"):
            raise ValueError(f"mode must be 'full' or 'partial', got {mode!r}")
        rot = rpy_matrix(state.base_rpy)
        rel = (state.foot_positions - state.base_pos) @ rot  # body frame, (4,3)
        full = np.concatenate([
            state.base_vel,
            state.qd,
            state.base_rpy,
            state.base_angvel,
            state.foot_contacts.astype(float),
            state.foot_forces.reshape(-1),
            rel.reshape(-1),
        ])
        if mode == "partial":
            return full[:OBS_PARTIAL_DIM]
        return full


def knee_point(q_leg: np.ndarray, geom: LegGeometry) -> np.ndarray:
    """Knee joint position in the leg frame (thigh endpoint)."""
    q_abd, q_hip = float(q_leg[0]), float(q_leg[1])
    x = geom.thigh_len * math.sin(q_hip)
    zp = -geom.thigh_len * math.cos(q_hip)
    yp = geom.lateral_sign * geom.hip_len
    ca, sa = math.cos(q_abd), math.sin(q_abd)
    return np.array([x, yp * ca - zp * sa, yp * sa + zp * ca])


def observation_dim(mode: str) -> int:
    if mode == "full":
        return OBS_FULL_DIM
    if mode == "partial":
        return OBS_PARTIAL_DIM
    raise ValueError(f"mode must be 'full' or 'partial', got {mode!r}")
