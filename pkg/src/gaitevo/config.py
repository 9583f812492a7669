"""Training configuration file: YAML with a strict, fully-checked schema.

Unknown keys are rejected and every diagnostic names the offending field,
because a silently ignored hyperparameter typo is the costliest failure
mode a long training run has.  `desired_speed` is the one required field;
everything else falls back to the built-in defaults.
"""

from __future__ import annotations

from pathlib import Path

import yaml

from .cpg import CpgConfig
from .env import RobotModel
from .rewards import RewardConfig
from .terrain import TerrainSpec
from .trainer import TrainConfig
from .trajectory import GaConfig, OptimizeConfig

_REQUIRED = object()


class ConfigError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"config error at '{field}': {message}")
        self.field = field


class _Section:
    """Tracks which keys of one mapping were consumed."""

    def __init__(self, data, path: str):
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigError(path or "<root>", "expected a mapping")
        self.data = dict(data)
        self.path = path

    def _full(self, key: str) -> str:
        return f"{self.path}.{key}" if self.path else key

    def take(self, key: str, conv, default=_REQUIRED):
        if key not in self.data:
            if default is _REQUIRED:
                raise ConfigError(self._full(key), "required field is missing")
            return default
        value = self.data.pop(key)
        try:
            return conv(value)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(self._full(key), str(exc)) from exc

    def section(self, key: str) -> "_Section":
        return _Section(self.data.pop(key, None), self._full(key))

    def finish(self) -> None:
        if self.data:
            key = sorted(self.data)[0]
            raise ConfigError(self._full(key), "unknown key")


def _num(v) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValueError(f"expected a number, got {v!r}")
    return float(v)


def _int(v) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ValueError(f"expected an integer, got {v!r}")
    return v


def _bool(v) -> bool:
    if not isinstance(v, bool):
        raise ValueError(f"expected true/false, got {v!r}")
    return v


def _str(v) -> str:
    if not isinstance(v, str):
        raise ValueError(f"expected a string, got {v!r}")
    return v


def _choice(*options):
    def conv(v):
        s = _str(v)
        if s not in options:
            raise ValueError(f"expected one of {options}, got {s!r}")
        return s
    return conv


def _num_list(n):
    def conv(v):
        if not isinstance(v, (list, tuple)) or len(v) != n:
            raise ValueError(f"expected a list of {n} numbers, got {v!r}")
        return tuple(_num(x) for x in v)
    return conv


def _int_list_any(v):
    if not isinstance(v, (list, tuple)) or not v:
        raise ValueError(f"expected a non-empty list of integers, got {v!r}")
    return tuple(_int(x) for x in v)


def parse_train_config(doc: dict) -> TrainConfig:
    """Validate a parsed YAML document and assemble the training config."""
    root = _Section(doc, "")

    terrain_sec = root.section("terrain")
    terrain = TerrainSpec(
        kind=terrain_sec.take("kind", _choice(*TerrainSpec.KINDS), "flat"),
        slope_deg=terrain_sec.take("slope_deg", _num, 15.0),
        rise=terrain_sec.take("rise", _num, 0.15),
        run=terrain_sec.take("run", _num, 0.33),
        repeats=terrain_sec.take("repeats", _int, 10),
    )
    terrain_sec.finish()

    cpg_sec = root.section("cpg")
    cpg = CpgConfig(
        mu=cpg_sec.take("mu", _num, 0.3),
        alpha=cpg_sec.take("alpha", _num, 10.0),
        period=cpg_sec.take("period", _num, 2.0),
        phase_offsets=cpg_sec.take("phase_offsets", _num_list(4),
                                   (0.0, 0.5, 0.25, 0.75)),
    )
    cpg_sec.finish()

    opt_sec = root.section("optimize")
    ga_sec = opt_sec.section("ga")
    ga = GaConfig(
        tournament_size=ga_sec.take("tournament_size", _int, 3),
        crossover_prob=ga_sec.take("crossover_prob", _num, 0.5),
        mutation_prob=ga_sec.take("mutation_prob", _num, 0.2),
        mutation_sigma=ga_sec.take("mutation_sigma", _num, 0.01),
    )
    ga_sec.finish()
    optimize = OptimizeConfig(
        episodes=opt_sec.take("episodes", _int, 10),
        candidates=opt_sec.take("candidates", _int, 40),
        rollout_steps=opt_sec.take("rollout_steps", _int, 300),
        source=opt_sec.take("source", _choice("ga", "uniform", "normal"), "ga"),
        sample_scale=opt_sec.take("sample_scale", _num, 0.01),
        per_leg=opt_sec.take("per_leg", _bool, False),
        ga=ga,
    )
    opt_sec.finish()

    reward_sec = root.section("reward")
    reward = RewardConfig(
        weights=reward_sec.take("weights", _num_list(6),
                                (1.5, 0.07, 0.6, 0.3, 0.1, 0.1)),
        base_motion_coef=reward_sec.take("base_motion_coef", _num, 4.0),
        foot_coef=reward_sec.take("foot_coef", _num, 2.5),
        absolute_energy=reward_sec.take("absolute_energy", _bool, False),
        literal_foot_term=reward_sec.take("literal_foot_term", _bool, False),
    )
    reward_sec.finish()

    sac_sec = root.section("sac")
    hidden = sac_sec.take("hidden", _int_list_any, (256, 256))
    act_scale = sac_sec.take("act_scale", _num, 0.2)
    lr = sac_sec.take("lr", _num, 3e-4)
    alpha = sac_sec.take("alpha", _num, 0.2)
    gamma = sac_sec.take("gamma", _num, 0.99)
    tau = sac_sec.take("tau", _num, 0.005)
    batch_size = sac_sec.take("batch_size", _int, 256)
    sac_sec.finish()

    traj_sec = root.section("trajectory")
    waypoint_count = traj_sec.take("waypoint_count", _int, 20)
    step_length = traj_sec.take("step_length", _num, 0.12)
    swing_height = traj_sec.take("swing_height", _num, 0.05)
    stance_depth = traj_sec.take("stance_depth", _num, 0.245)
    traj_sec.finish()

    model_sec = root.section("model")
    model = RobotModel(
        base_mass=model_sec.take("base_mass", _num, 10.5),
        leg_mass=model_sec.take("leg_mass", _num, 2.0),
        torque_limit=model_sec.take("torque_limit", _num, 33.5),
        kp=model_sec.take("kp", _num_list(3), (80.0, 120.0, 90.0)),
        kd=model_sec.take("kd", _num_list(3), (2.0, 4.0, 3.0)),
        init_height=model_sec.take("init_height", _num, 0.26),
        init_angles=model_sec.take("init_angles", _num_list(3), (0.0, 0.9, -1.8)),
        hip_x=model_sec.take("hip_x", _num, 0.1881),
        hip_y=model_sec.take("hip_y", _num, 0.04675),
        inertia=model_sec.take("inertia", _num_list(3), (0.14, 0.45, 0.53)),
        joint_inertia=model_sec.take("joint_inertia", _num, 0.05),
        joint_damping=model_sec.take("joint_damping", _num, 0.5),
        contact_stiffness=model_sec.take("contact_stiffness", _num, 3.0e4),
        contact_damping=model_sec.take("contact_damping", _num, 300.0),
        friction=model_sec.take("friction", _num, 0.8),
        stiction_velocity=model_sec.take("stiction_velocity", _num, 1.0e-3),
        stiction_mass=model_sec.take("stiction_mass", _num, 4.0),
        body_clearance=model_sec.take("body_clearance", _num, 0.05),
        fall_height=model_sec.take("fall_height", _num, 0.12),
        fall_angle=model_sec.take("fall_angle", _num, 0.8),
    )
    model_sec.finish()

    try:
        cfg = TrainConfig(
            max_steps=root.take("max_steps", _int, 1_000_000),
            rag_first_at=root.take("rag_first_at", _int, 10_000),
            rag_interval=root.take("rag_interval", _int, 50_000),
            initial_steps=root.take("initial_steps", _int, 10_000),
            episode_steps=root.take("episode_steps", _int, 300),
            observation=root.take("observation", _choice("full", "partial"), "full"),
            reference_mode=root.take("reference_mode",
                                     _choice("optimized", "fixed"), "optimized"),
            workers=root.take("workers", _int, 1),
            seed=root.take("seed", _int, 0),
            buffer_capacity=root.take("buffer_capacity", _int, 1_000_000),
            joint_jitter=root.take("joint_jitter", _num, 0.0),
            desired_speed=root.take("desired_speed", _num),
            checkpoint_interval=root.take("checkpoint_interval", _int, 0),
            terrain=terrain,
            cpg=cpg,
            optimize=optimize,
            reward=reward,
            hidden=hidden,
            act_scale=act_scale,
            lr=lr,
            alpha=alpha,
            gamma=gamma,
            tau=tau,
            batch_size=batch_size,
            waypoint_count=waypoint_count,
            step_length=step_length,
            swing_height=swing_height,
            stance_depth=stance_depth,
            model=model,
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("<root>", str(exc)) from exc
    root.finish()
    return cfg


def load_train_config(path: str | Path) -> TrainConfig:
    """Load a config file; a run manifest (with its config echo) also works."""
    text = Path(path).read_text()
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"not valid YAML: {exc}") from exc
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError("<file>", "top level must be a mapping")
    if "config" in doc and "artifact_version" in doc:
        doc = doc["config"]  # run manifest: reuse its embedded config
    return parse_train_config(doc)


def config_as_dict(cfg: TrainConfig) -> dict:
    """Config echo for the run manifest; loadable by load_train_config."""
    return {
        "max_steps": cfg.max_steps,
        "rag_first_at": cfg.rag_first_at,
        "rag_interval": cfg.rag_interval,
        "initial_steps": cfg.initial_steps,
        "episode_steps": cfg.episode_steps,
        "observation": cfg.observation,
        "reference_mode": cfg.reference_mode,
        "workers": cfg.workers,
        "seed": cfg.seed,
        "buffer_capacity": cfg.buffer_capacity,
        "joint_jitter": cfg.joint_jitter,
        "desired_speed": cfg.desired_speed,
        "checkpoint_interval": cfg.checkpoint_interval,
        "terrain": {
            "kind": cfg.terrain.kind,
            "slope_deg": cfg.terrain.slope_deg,
            "rise": cfg.terrain.rise,
            "run": cfg.terrain.run,
            "repeats": cfg.terrain.repeats,
        },
        "cpg": {
            "mu": cfg.cpg.mu,
            "alpha": cfg.cpg.alpha,
            "period": cfg.cpg.period,
            "phase_offsets": list(cfg.cpg.phase_offsets),
        },
        "optimize": {
            "episodes": cfg.optimize.episodes,
            "candidates": cfg.optimize.candidates,
            "rollout_steps": cfg.optimize.rollout_steps,
            "source": cfg.optimize.source,
            "sample_scale": cfg.optimize.sample_scale,
            "per_leg": cfg.optimize.per_leg,
            "ga": {
                "tournament_size": cfg.optimize.ga.tournament_size,
                "crossover_prob": cfg.optimize.ga.crossover_prob,
                "mutation_prob": cfg.optimize.ga.mutation_prob,
                "mutation_sigma": cfg.optimize.ga.mutation_sigma,
            },
        },
        "reward": {
            "weights": list(cfg.reward.weights),
            "base_motion_coef": cfg.reward.base_motion_coef,
            "foot_coef": cfg.reward.foot_coef,
            "absolute_energy": cfg.reward.absolute_energy,
            "literal_foot_term": cfg.reward.literal_foot_term,
        },
        "sac": {
            "hidden": list(cfg.hidden),
            "act_scale": cfg.act_scale,
            "lr": cfg.lr,
            "alpha": cfg.alpha,
            "gamma": cfg.gamma,
            "tau": cfg.tau,
            "batch_size": cfg.batch_size,
        },
        "trajectory": {
            "waypoint_count": cfg.waypoint_count,
            "step_length": cfg.step_length,
            "swing_height": cfg.swing_height,
            "stance_depth": cfg.stance_depth,
        },
        "model": {
            "base_mass": cfg.model.base_mass,
            "leg_mass": cfg.model.leg_mass,
            "torque_limit": cfg.model.torque_limit,
            "kp": list(cfg.model.kp),
            "kd": list(cfg.model.kd),
            "init_height": cfg.model.init_height,
            "init_angles": list(cfg.model.init_angles),
            "hip_x": cfg.model.hip_x,
            "hip_y": cfg.model.hip_y,
            "inertia": list(cfg.model.inertia),
            "joint_inertia": cfg.model.joint_inertia,
            "joint_damping": cfg.model.joint_damping,
            "contact_stiffness": cfg.model.contact_stiffness,
            "contact_damping": cfg.model.contact_damping,
            "friction": cfg.model.friction,
            "stiction_velocity": cfg.model.stiction_velocity,
            "stiction_mass": cfg.model.stiction_mass,
            "body_clearance": cfg.model.body_clearance,
            "fall_height": cfg.model.fall_height,
            "fall_angle": cfg.model.fall_angle,
        },
    }
