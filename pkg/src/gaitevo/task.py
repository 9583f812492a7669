"""Gait task: couples the simulator, the reward, and the gait clock.

One step takes the learner's residual joint increment, adds the reference
rendered for the current gait phase, drives the simulator, and returns the
observation in the configured mode together with the reward breakdown.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cpg import CpgConfig, ideal_support_count
from .env import CONTROL_DT, QuadrupedSim
from .rbfn import RbfnParams, forward as rbfn_forward
from .rewards import RewardConfig, compute_reward, power, wsm
from .cpg import rhythm_at


# support order for the stability-margin quadrilateral: LF, RF, RH, LH
_WSM_ORDER = (0, 1, 3, 2)


@dataclass
class StepRecord:
    reward: float
    breakdown: object
    power: float
    wsm: float | None
    forward_speed: float
    fell: bool


class GaitTask:
    """RL-facing environment: observations, rewards, and Eq-style action
    composition (reference plus residual) on top of the raw simulator."""

    def __init__(self, sim: QuadrupedSim, cpg_cfg: CpgConfig,
                 reward_cfg: RewardConfig, obs_mode: str = "full"):
        if obs_mode not in ("full", "partial"):
            raise ValueError(f"obs_mode must be 'full' or 'partial', got {obs_mode!r}")
        self.sim = sim
        self.cpg_cfg = cpg_cfg
        self.reward_cfg = reward_cfg
        self.obs_mode = obs_mode

    @property
    def time(self) -> float:
        return self.sim.step_count * CONTROL_DT

    def reset(self, rng: np.random.Generator | None = None) -> np.ndarray:
        state, _ = self.sim.reset(rng)
        return self.sim.build_observation(state, self.obs_mode)

    def reference_action(self, params: RbfnParams) -> np.ndarray:
        return rbfn_forward(rhythm_at(self.cpg_cfg, self.time), params)

    def step(self, delta_action: np.ndarray, params: RbfnParams,
             external_force: np.ndarray | None = None
             ) -> tuple[np.ndarray, float, bool, StepRecord]:
        t = self.time
        a_target = self.reference_action(params) + np.asarray(delta_action, dtype=float)
        state, _, done, info = self.sim.step(a_target, external_force)
        breakdown = compute_reward(
            self.reward_cfg,
            forward_speed=float(state.base_vel[0]),
            torques=state.torques,
            joint_rates=state.qd,
            angular_velocity_xy=state.base_angvel[:2],
            foot_velocities=state.foot_velocities,
            foot_contacts=state.foot_contacts,
            ideal_support=ideal_support_count(self.cpg_cfg, t),
            unexpected_contacts=state.unexpected_contacts,
        )
        supports = [state.foot_positions[i][:2] for i in _WSM_ORDER
                    if state.foot_contacts[i]]
        record = StepRecord(
            reward=breakdown.total,
            breakdown=breakdown,
            power=power(state.torques, state.qd),
            wsm=wsm(state.base_pos[:2], supports),
            forward_speed=float(state.base_vel[0]),
            fell=bool(info["fell"]),
        )
        obs = self.sim.build_observation(state, self.obs_mode)
        return obs, breakdown.total, done, record
