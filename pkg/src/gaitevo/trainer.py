"""Alternating training loop: residual-policy learning and reference search.

Reinforcement learning runs in episode rounds; whenever the step counter
crosses a scheduled threshold, learning pauses at the episode boundary and
the trajectory optimizer reshapes the reference with the policy frozen,
after which learning resumes against the frozen new reference.  Both
phases feed the one shared replay buffer.

Workers: K replicas each collect one episode per round; gradient updates
then run in lockstep, averaging the K per-worker minibatch gradients into
one step of the global parameters.  The serial trainer is exactly the
K = 1 instance of this protocol, so single-worker parallel runs are
bit-identical to serial ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .cpg import CpgConfig
from .env import QuadrupedSim, RobotModel, SimulationDivergedError, observation_dim
from .nets import checksum, flatten, unflatten
from .rewards import RewardConfig
from .sac import ReplayBuffer, SacAgent, SacConfig
from .task import GaitTask
from .terrain import TerrainSpec
from .trajectory import (
    OptimizeConfig,
    ReferenceGenerator,
    default_trajectory,
    optimize_reference,
)

# named rng stream ids under the master seed
STREAM_INIT = 0
STREAM_ENV = 1
STREAM_POLICY = 2
STREAM_GA = 3


def make_rng(master_seed: int, *path: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(
        np.random.SeedSequence((master_seed, *path))))


@dataclass(frozen=True)
class TrainConfig:
    max_steps: int = 1_000_000
    rag_first_at: int = 10_000
    rag_interval: int = 50_000
    initial_steps: int = 10_000
    episode_steps: int = 300
    observation: str = "full"
    reference_mode: str = "optimized"   # optimized | fixed
    workers: int = 1
    seed: int = 0
    buffer_capacity: int = 1_000_000
    joint_jitter: float = 0.0
    desired_speed: float = 0.5
    checkpoint_interval: int = 0  # steps between snapshots; 0 = final only
    terrain: TerrainSpec = field(default_factory=TerrainSpec)
    model: RobotModel = field(default_factory=RobotModel)
    cpg: CpgConfig = field(default_factory=CpgConfig)
    optimize: OptimizeConfig = field(default_factory=OptimizeConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    # learner hyperparameters; observation size is derived
    hidden: tuple[int, ...] = (256, 256)
    act_scale: float = 0.2
    lr: float = 3e-4
    alpha: float = 0.2
    gamma: float = 0.99
    tau: float = 0.005
    batch_size: int = 256
    # initial reference trajectory
    waypoint_count: int = 20
    step_length: float = 0.12
    swing_height: float = 0.05
    stance_depth: float = 0.245

    def __post_init__(self):
        if self.max_steps < 0:
            raise ValueError("max_steps must be >= 0")
        if self.rag_interval <= 0:
            raise ValueError("rag_interval must be positive")
        if self.rag_first_at < self.initial_steps:
            raise ValueError("rag_first_at must not precede initial_steps")
        if self.observation not in ("full", "partial"):
            raise ValueError(f"observation must be 'full' or 'partial', got {self.observation!r}")
        if self.reference_mode not in ("optimized", "fixed"):
            raise ValueError(f"reference_mode must be 'optimized' or 'fixed', got {self.reference_mode!r}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def sac_config(self) -> SacConfig:
        return SacConfig(
            obs_dim=observation_dim(self.observation),
            act_dim=12,
            hidden=self.hidden,
            act_scale=self.act_scale,
            lr=self.lr,
            alpha=self.alpha,
            gamma=self.gamma,
            tau=self.tau,
            batch_size=self.batch_size,
        )


GROUP_PRESETS: dict[int, dict] = {
    0: {"observation": "partial", "reference_mode": "fixed"},
    1: {"observation": "full", "reference_mode": "fixed"},
    2: {"observation": "full", "reference_mode": "optimized", "source": "ga"},
    3: {"observation": "full", "reference_mode": "optimized", "source": "uniform"},
    4: {"observation": "full", "reference_mode": "optimized", "source": "normal"},
    5: {"observation": "partial", "reference_mode": "optimized", "source": "ga"},
}


def apply_group_preset(cfg: TrainConfig, group: int) -> TrainConfig:
    """Observation-mode / reference-mode bundle for the comparison groups."""
    if group not in GROUP_PRESETS:
        raise ValueError(f"group must be 0..5, got {group}")
    preset = dict(GROUP_PRESETS[group])
    source = preset.pop("source", None)
    out = replace(cfg, **preset)
    if source is not None:
        out = replace(out, optimize=replace(out.optimize, source=source))
    return out


class MetricsSink:
    """No-op metrics receiver; the CLI subclasses it with CSV writers."""

    def on_step(self, row: dict) -> None:
        pass

    def on_episode(self, row: dict) -> None:
        pass

    def on_rag(self, row: dict) -> None:
        pass

    def on_losses(self, row: dict) -> None:
        pass


@dataclass
class _Worker:
    index: int
    task: GaitTask
    env_rng: np.random.Generator
    policy_rng: np.random.Generator


@dataclass
class TrainState:
    """Everything the loop accumulated; returned to the caller."""

    config: TrainConfig
    agent: SacAgent
    refgen: ReferenceGenerator
    buffer: ReplayBuffer
    steps: int = 0
    episodes: int = 0
    rag_events: list = field(default_factory=list)
    rag_rollout_steps: int = 0
    diverged_episodes: int = 0
    episode_returns: list = field(default_factory=list)
    workers: list = field(default_factory=list)
    ga_rng: np.random.Generator | None = None
    rag_task: GaitTask | None = None


def _build_state(cfg: TrainConfig) -> TrainState:
    sac_cfg = cfg.sac_config()
    agent = SacAgent(sac_cfg, make_rng(cfg.seed, STREAM_INIT))
    trajectory = default_trajectory(cfg.waypoint_count, cfg.step_length,
                                    cfg.swing_height, cfg.stance_depth)
    refgen = ReferenceGenerator(cfg.cpg, trajectory)
    refgen.refit_current()
    buffer = ReplayBuffer(cfg.buffer_capacity, sac_cfg.obs_dim, sac_cfg.act_dim)
    reward_cfg = replace(cfg.reward, desired_speed=cfg.desired_speed)

    def build_task() -> GaitTask:
        sim = QuadrupedSim(cfg.terrain, cfg.model,
                           max_episode_steps=cfg.episode_steps,
                           joint_jitter=cfg.joint_jitter)
        return GaitTask(sim, cfg.cpg, reward_cfg, cfg.observation)

    workers = [
        _Worker(
            index=k,
            task=build_task(),
            env_rng=make_rng(cfg.seed, STREAM_ENV, k),
            policy_rng=make_rng(cfg.seed, STREAM_POLICY, k),
        )
        for k in range(cfg.workers)
    ]
    return TrainState(
        config=cfg, agent=agent, refgen=refgen, buffer=buffer,
        workers=workers,
        ga_rng=make_rng(cfg.seed, STREAM_GA),
        rag_task=build_task(),
    )


class _FrozenPolicy:
    """Read-only view used for candidate rollouts; never updates parameters."""

    def __init__(self, agent: SacAgent):
        self._agent = agent

    def act(self, obs, rng):
        return self._agent.policy.act(obs, rng)


def _collect_episode(state: TrainState, worker: _Worker, sink: MetricsSink) -> tuple[int, float]:
    """One worker episode; stops early when the global step budget is hit."""
    cfg = state.config
    task = worker.task
    obs = task.reset(worker.env_rng)
    ep_steps = 0
    ep_return = 0.0
    done = False
    while not done and state.steps < cfg.max_steps:
        delta = state.agent.policy.act(obs, worker.policy_rng)
        next_obs, reward, done, record = task.step(delta, state.refgen.params)
        # only a fall is a true terminal; the episode cap is a truncation and
        # must not cut the bootstrap
        state.buffer.push(obs, delta, reward, next_obs, record.fell)
        state.steps += 1
        ep_steps += 1
        ep_return += reward
        sink.on_step({
            "step": state.steps,
            "worker": worker.index,
            "episode": state.episodes,
            "reward": reward,
            "velocity": record.breakdown.velocity,
            "energy": record.breakdown.energy,
            "base_motion": record.breakdown.base_motion,
            "foot_velocity": record.breakdown.foot_velocity,
            "contact": record.breakdown.contact,
            "unexpected": record.breakdown.unexpected,
            "curriculum": record.breakdown.curriculum,
            "power": record.power,
            "wsm": record.wsm if record.wsm is not None else "",
            "forward_speed": record.forward_speed,
            "fell": int(record.fell),
        })
        obs = next_obs
    return ep_steps, ep_return


def _gradient_round(state: TrainState, updates: int, sink: MetricsSink,
                    grad_log: list | None = None) -> None:
    """Lockstep averaged updates: each worker contributes one minibatch
    gradient per update; their arithmetic mean steps the global nets."""
    agent = state.agent
    cfg = agent.cfg
    if state.buffer.size < cfg.batch_size:
        return
    k = len(state.workers)
    loss_acc = np.zeros(3)
    for _ in range(updates):
        batches = []
        for w in state.workers:
            idx = state.buffer.sample_indices(cfg.batch_size, w.policy_rng)
            batches.append(state.buffer.gather(idx))
        noises = [w.policy_rng.standard_normal((cfg.batch_size, cfg.act_dim))
                  for w in state.workers]
        critic_flat = []
        tmpl1 = tmpl2 = None
        l1 = l2 = 0.0
        for batch, noise in zip(batches, noises):
            a, b, g1, g2 = agent.critic_losses_and_grads(batch, noise)
            l1 += a
            l2 += b
            tmpl1, tmpl2 = g1, g2
            critic_flat.append(np.concatenate([flatten(g1), flatten(g2)]))
        avg_c = sum(critic_flat) / k
        n1 = flatten(tmpl1).size
        agent.apply_critic_grads(unflatten(avg_c[:n1], tmpl1),
                                 unflatten(avg_c[n1:], tmpl2))

        policy_flat = []
        tmplp = None
        lp = 0.0
        for w, batch in zip(state.workers, batches):
            pnoise = w.policy_rng.standard_normal((cfg.batch_size, cfg.act_dim))
            loss, grads = agent.policy_loss_and_grads(batch, pnoise)
            lp += loss
            tmplp = grads
            policy_flat.append(flatten(grads))
        avg_p = sum(policy_flat) / k
        agent.apply_policy_grads(unflatten(avg_p, tmplp))
        agent.soft_update_targets()
        loss_acc += (l1 / k, l2 / k, lp / k)
        if grad_log is not None:
            grad_log.append({
                "per_worker_critic": critic_flat,
                "per_worker_policy": policy_flat,
                "avg_critic": avg_c,
                "avg_policy": avg_p,
            })
    sink.on_losses({
        "step": state.steps,
        "updates": updates,
        "critic_loss_1": loss_acc[0] / max(updates, 1),
        "critic_loss_2": loss_acc[1] / max(updates, 1),
        "policy_loss": loss_acc[2] / max(updates, 1),
    })


def _rag_phase(state: TrainState, sink: MetricsSink) -> None:
    """Reference optimization with the policy locked."""
    cfg = state.config
    before = state.agent.policy_checksum()
    result = optimize_reference(
        state.refgen, _FrozenPolicy(state.agent), state.rag_task,
        state.buffer, cfg.optimize, state.ga_rng,
    )
    after = state.agent.policy_checksum()
    if before != after:
        raise RuntimeError("policy parameters changed during reference optimization")
    if result.params is not None:
        state.refgen.install(result.params, result.trajectory)
    state.rag_rollout_steps += result.rollout_steps
    event = {
        "step": state.steps,
        "best_fitness": result.best_fitness,
        "improved": int(result.improved),
        "rollout_steps": result.rollout_steps,
        "installed": int(result.params is not None),
    }
    state.rag_events.append(event)
    sink.on_rag({**event, "generations": result.generations})


def train(cfg: TrainConfig, sink: MetricsSink | None = None,
          grad_log: list | None = None, checkpoint_cb=None) -> TrainState:
    """Run the full alternating schedule; returns the final state.

    The step counter tracks learning-phase environment steps only;
    reference-optimization rollouts are accounted separately (they share
    the replay buffer but not the step budget).  checkpoint_cb(state) is
    invoked at the first round boundary past each checkpoint_interval.
    """
    sink = sink if sink is not None else MetricsSink()
    state = _build_state(cfg)
    next_rag = cfg.rag_first_at if cfg.reference_mode == "optimized" else None
    next_ckpt = cfg.checkpoint_interval if cfg.checkpoint_interval > 0 else None

    while state.steps < cfg.max_steps:
        if next_rag is not None and state.steps >= next_rag:
            _rag_phase(state, sink)
            next_rag += cfg.rag_interval
        round_steps = 0
        for worker in state.workers:
            if state.steps >= cfg.max_steps:
                break
            rbfn_before = checksum([state.refgen.params.weights, state.refgen.params.bias])
            try:
                ep_steps, ep_return = _collect_episode(state, worker, sink)
            except SimulationDivergedError:
                state.diverged_episodes += 1
                ep_steps, ep_return = 0, 0.0
            if checksum([state.refgen.params.weights, state.refgen.params.bias]) != rbfn_before:
                raise RuntimeError("reference parameters changed during a learning episode")
            state.episodes += 1
            round_steps += ep_steps
            state.episode_returns.append(ep_return)
            sink.on_episode({
                "episode": state.episodes,
                "worker": worker.index,
                "steps": ep_steps,
                "return": ep_return,
                "total_steps": state.steps,
            })
        if state.steps > cfg.initial_steps and round_steps > 0:
            updates = round_steps // len(state.workers)
            _gradient_round(state, updates, sink, grad_log)
        if checkpoint_cb is not None and next_ckpt is not None and state.steps >= next_ckpt:
            checkpoint_cb(state)
            while next_ckpt <= state.steps:
                next_ckpt += cfg.checkpoint_interval
    return state


def parallel_train(cfg: TrainConfig, sink: MetricsSink | None = None,
                   grad_log: list | None = None, checkpoint_cb=None) -> TrainState:
    """Multi-worker entry point; identical protocol, K from the config."""
    return train(cfg, sink, grad_log, checkpoint_cb)


def state_arrays(state: TrainState) -> dict[str, np.ndarray]:
    """Checkpoint content: learner and reference parameters, trajectory,
    optimizer moments, rng streams, and counters, all as float64 arrays."""
    from .checkpoint import encode_rng

    out = dict(state.agent.named_arrays())
    p = state.refgen.params
    out["rbfn/means"] = p.means
    out["rbfn/sigma_sq"] = np.array([p.sigma_sq])
    out["rbfn/weights"] = p.weights
    out["rbfn/bias"] = p.bias
    out["trajectory/waypoints"] = np.asarray(state.refgen.trajectory.waypoints, dtype=float)
    for w in state.workers:
        out[f"rng/env{w.index}"] = encode_rng(w.env_rng)
        out[f"rng/policy{w.index}"] = encode_rng(w.policy_rng)
    out["rng/ga"] = encode_rng(state.ga_rng)
    out["counters/steps"] = np.array([float(state.steps)])
    out["counters/episodes"] = np.array([float(state.episodes)])
    out["counters/rag_rollout_steps"] = np.array([float(state.rag_rollout_steps)])
    out["counters/diverged_episodes"] = np.array([float(state.diverged_episodes)])
    return out
