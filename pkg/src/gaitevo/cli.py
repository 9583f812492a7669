"""Command-line surface: train, eval, terrain.

train   runs the full loop from a config file into a self-describing run
        directory (manifest, checkpoints, metrics CSVs)
eval    rolls out a checkpointed policy deterministically and exports
        per-step metrics, optionally under pulsed base disturbances
terrain exports a heightfield profile as CSV

Exit codes: 0 success, 1 runtime failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import CheckpointError, load_arrays, save_arrays
from .config import ConfigError, config_as_dict, load_train_config
from .cpg import CpgConfig
from .env import CONTROL_DT, QuadrupedSim, RobotModel
from .rbfn import RbfnParams
from .rewards import RewardConfig
from .sac import SacAgent, SacConfig
from .task import GaitTask
from .terrain import TerrainSpec, terrain_profile
from .trainer import (
    MetricsSink,
    TrainState,
    apply_group_preset,
    state_arrays,
    train,
)

STEP_COLUMNS = [
    "step", "wall_time", "worker", "episode", "reward", "velocity", "energy",
    "base_motion", "foot_velocity", "contact", "unexpected", "curriculum",
    "power", "wsm", "forward_speed", "fell",
]
EPISODE_COLUMNS = ["episode", "worker", "steps", "return", "total_steps"]
RAG_COLUMNS = ["step", "best_fitness", "improved", "rollout_steps", "installed"]
RAG_GEN_COLUMNS = ["step", "generation", "best_ever", "gen_best", "gen_mean",
                   "failed_fits"]
LOSS_COLUMNS = ["step", "updates", "critic_loss_1", "critic_loss_2", "policy_loss"]
EVAL_COLUMNS = (
    ["step", "time", "reward", "velocity", "energy", "base_motion",
     "foot_velocity", "contact", "unexpected", "curriculum", "power", "wsm",
     "forward_speed", "fell",
     "base_x", "base_y", "base_z", "roll", "pitch", "yaw"]
    + [f"q{i}" for i in range(12)]
    + [f"foot{leg}_{ax}" for leg in range(4) for ax in ("x", "y", "z")]
)


class CsvSink(MetricsSink):
    """Streams the trainer's metric rows into the run directory."""

    def __init__(self, out_dir: Path):
        self._files = {}
        self._writers = {}
        for name, cols in (("steps", STEP_COLUMNS), ("episodes", EPISODE_COLUMNS),
                           ("rag", RAG_COLUMNS), ("rag_generations", RAG_GEN_COLUMNS),
                           ("losses", LOSS_COLUMNS)):
            fh = open(out_dir / f"{name}.csv", "w", newline="")
            writer = csv.DictWriter(fh, fieldnames=cols, extrasaction="ignore")
            writer.writeheader()
            self._files[name] = fh
            self._writers[name] = writer

    def on_step(self, row):
        self._writers["steps"].writerow({**row, "wall_time": time.time()})

    def on_episode(self, row):
        self._writers["episodes"].writerow(row)

    def on_rag(self, row):
        self._writers["rag"].writerow(row)
        for gen in row.get("generations", ()):
            self._writers["rag_generations"].writerow({**gen, "step": row["step"]})

    def on_losses(self, row):
        self._writers["losses"].writerow(row)

    def close(self):
        for fh in self._files.values():
            fh.close()


def _checkpoint_payload(state: TrainState) -> dict[str, np.ndarray]:
    cfg = state.config
    out = state_arrays(state)
    out["config/act_scale"] = np.array([cfg.act_scale])
    out["config/desired_speed"] = np.array([cfg.desired_speed])
    out["config/cpg"] = np.array([cfg.cpg.mu, cfg.cpg.alpha, cfg.cpg.period,
                                  *cfg.cpg.phase_offsets])
    out["config/hidden"] = np.asarray(cfg.hidden, dtype=float)
    return out


def _terrain_from_args(args) -> TerrainSpec:
    return TerrainSpec(kind=args.terrain, slope_deg=args.slope_deg,
                       rise=args.rise, run=args.run, repeats=args.repeats)


def cmd_train(args) -> int:
    try:
        cfg = load_train_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        if args.workers is not None:
            cfg = replace(cfg, workers=args.workers)
        if args.observation is not None:
            cfg = replace(cfg, observation=args.observation)
        if args.group is not None:
            cfg = apply_group_preset(cfg, args.group)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = datetime.datetime.now(datetime.timezone.utc).isoformat()
    sink = CsvSink(out_dir)

    def save_interval(state: TrainState):
        save_arrays(out_dir / f"checkpoint_{state.steps:09d}.ckpt",
                    _checkpoint_payload(state))

    try:
        state = train(cfg, sink, checkpoint_cb=save_interval)
        save_arrays(out_dir / "checkpoint_final.ckpt", _checkpoint_payload(state))
    except Exception as exc:  # noqa: BLE001 - surface as a runtime failure
        sink.close()
        print(f"error: training failed: {exc}", file=sys.stderr)
        return 1
    sink.close()

    manifest = {
        "artifact_version": __version__,
        "seed": cfg.seed,
        "started": started,
        "finished": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "steps": state.steps,
        "episodes": state.episodes,
        "rag_updates": len(state.rag_events),
        "rag_rollout_steps": state.rag_rollout_steps,
        "diverged_episodes": state.diverged_episodes,
        "config": config_as_dict(cfg),
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"run complete: {state.steps} steps, {state.episodes} episodes, "
          f"{len(state.rag_events)} reference updates -> {out_dir}")
    return 0


def _rebuild_from_checkpoint(arrays: dict[str, np.ndarray], obs_override: str | None):
    """Agent, reference parameters, and task settings from a checkpoint."""
    hidden = tuple(int(h) for h in arrays["config/hidden"])
    act_scale = float(arrays["config/act_scale"][0])
    desired_speed = float(arrays["config/desired_speed"][0])
    cpg_vec = arrays["config/cpg"]
    cpg = CpgConfig(mu=float(cpg_vec[0]), alpha=float(cpg_vec[1]),
                    period=float(cpg_vec[2]),
                    phase_offsets=tuple(float(x) for x in cpg_vec[3:7]))
    obs_dim = arrays["sac/policy/p0"].shape[0]
    mode = {49: "full", 37: "partial"}.get(obs_dim)
    if mode is None:
        raise CheckpointError(f"unsupported policy input width {obs_dim}")
    if obs_override is not None and obs_override != mode:
        raise CheckpointError(
            f"checkpoint was trained with {mode} observations, not {obs_override}")
    sac_cfg = SacConfig(obs_dim=obs_dim, act_dim=12, hidden=hidden,
                        act_scale=act_scale)
    agent = SacAgent(sac_cfg, np.random.default_rng(0))
    agent.load_named_arrays(arrays)
    params = RbfnParams(
        means=arrays["rbfn/means"], sigma_sq=float(arrays["rbfn/sigma_sq"][0]),
        weights=arrays["rbfn/weights"], bias=arrays["rbfn/bias"],
    )
    return agent, params, cpg, mode, desired_speed


def cmd_eval(args) -> int:
    try:
        arrays = load_arrays(args.checkpoint)
        agent, params, cpg, mode, desired_speed = _rebuild_from_checkpoint(
            arrays, args.observation)
    except (CheckpointError, FileNotFoundError, KeyError) as exc:
        print(f"error: cannot load checkpoint: {exc}", file=sys.stderr)
        return 1

    spec = _terrain_from_args(args)
    sim = QuadrupedSim(spec, RobotModel(), max_episode_steps=max(args.steps, 1))
    task = GaitTask(sim, cpg, RewardConfig(desired_speed=desired_speed), mode)
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)

    seed = args.seed if args.seed is not None else 0
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    speeds, powers, wsms = [], [], []
    with open(out_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=EVAL_COLUMNS)
        writer.writeheader()
        obs = task.reset(rng)
        for i in range(args.steps):
            t = task.time
            force = _disturbance_force(args.disturb, t, seed)
            delta = agent.policy.act_mean(obs)
            obs, reward, done, rec = task.step(delta, params, force)
            state = sim.state
            row = {
                "step": i + 1, "time": round(t + CONTROL_DT, 10),
                "reward": reward,
                "velocity": rec.breakdown.velocity,
                "energy": rec.breakdown.energy,
                "base_motion": rec.breakdown.base_motion,
                "foot_velocity": rec.breakdown.foot_velocity,
                "contact": rec.breakdown.contact,
                "unexpected": rec.breakdown.unexpected,
                "curriculum": rec.breakdown.curriculum,
                "power": rec.power,
                "wsm": rec.wsm if rec.wsm is not None else "",
                "forward_speed": rec.forward_speed,
                "fell": int(rec.fell),
                "base_x": state.base_pos[0], "base_y": state.base_pos[1],
                "base_z": state.base_pos[2],
                "roll": state.base_rpy[0], "pitch": state.base_rpy[1],
                "yaw": state.base_rpy[2],
            }
            for j in range(12):
                row[f"q{j}"] = state.q[j]
            for leg in range(4):
                for ax, val in zip(("x", "y", "z"), state.foot_positions[leg]):
                    row[f"foot{leg}_{ax}"] = val
            writer.writerow(row)
            speeds.append(rec.forward_speed)
            powers.append(rec.power)
            if rec.wsm is not None:
                wsms.append(rec.wsm)
            if done:
                break
    mean = lambda xs: sum(xs) / len(xs) if xs else float("nan")  # noqa: E731
    print(f"eval: {len(speeds)} steps  mean speed {mean(speeds):.4f} m/s  "
          f"mean power {mean(powers):.2f} W  mean WSM {mean(wsms):.4f} m")
    return 0


def _disturbance_force(magnitude: float, t: float, seed: int) -> np.ndarray | None:
    """Horizontal pulses at 1 s intervals, each lasting 1 s (on during odd
    seconds); each pulse keeps one direction, drawn from its index and the
    seed so rollouts replay identically."""
    if magnitude == 0.0:
        return None
    second = int(t)
    if second % 2 == 0:
        return None
    pulse = (second - 1) // 2
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, pulse))))
    angle = float(rng.uniform(0.0, 2.0 * np.pi))
    return np.array([magnitude * np.cos(angle), magnitude * np.sin(angle), 0.0])


def cmd_terrain(args) -> int:
    try:
        spec = _terrain_from_args(args)
        prof = terrain_profile(spec, args.span, args.resolution)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "z"])
        for x, z in prof:
            writer.writerow([f"{x:.10g}", f"{z:.10g}"])
    print(f"wrote {prof.shape[0]} samples to {out_path}")
    return 0


def _add_terrain_args(p: argparse.ArgumentParser, required: bool = False):
    p.add_argument("--terrain", default="flat" if not required else None,
                   required=required, choices=TerrainSpec.KINDS,
                   help="terrain kind")
    p.add_argument("--slope-deg", dest="slope_deg", type=float, default=15.0)
    p.add_argument("--rise", type=float, default=0.15)
    p.add_argument("--run", type=float, default=0.33)
    p.add_argument("--repeats", type=int, default=10)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gaitevo",
        description="Evolutionary reference-gait training for a reduced quadruped",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run the training loop")
    p_train.add_argument("--config", required=True, help="YAML config (or a run manifest)")
    p_train.add_argument("--out-dir", dest="out_dir", default="runs/latest")
    p_train.add_argument("--seed", type=int, default=None)
    p_train.add_argument("--workers", type=int, default=None)
    p_train.add_argument("--group", type=int, choices=range(6), default=None,
                         help="comparison-group preset (observation x reference mode)")
    p_train.add_argument("--observation", choices=("full", "partial"), default=None)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="deterministic rollout of a checkpoint")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--steps", type=int, default=300)
    p_eval.add_argument("--seed", type=int, default=None)
    p_eval.add_argument("--out", default="eval.csv")
    p_eval.add_argument("--observation", choices=("full", "partial"), default=None)
    p_eval.add_argument("--disturb", type=float, default=0.0,
                        help="pulsed base-force magnitude in N")
    _add_terrain_args(p_eval)
    p_eval.set_defaults(func=cmd_eval)

    p_ter = sub.add_parser("terrain", help="export a heightfield profile CSV")
    _add_terrain_args(p_ter)
    p_ter.add_argument("--span", type=float, default=10.0)
    p_ter.add_argument("--resolution", type=float, default=0.01)
    p_ter.add_argument("--out", default="terrain.csv")
    p_ter.set_defaults(func=cmd_terrain)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except KeyboardInterrupt:
        return 1


if __name__ == "__main__":
    sys.exit(main())
