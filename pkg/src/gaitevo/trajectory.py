"""Reference-trajectory optimizer: a genetic algorithm over foot waypoints.

A trajectory is k sagittal waypoints indexed uniformly over the gait
phase.  A genome is one 2-vector offset per waypoint (optionally per
leg); candidates are scored by rolling out the frozen policy on the
candidate reference and summing the reward, with every transition pushed
into the shared replay buffer.  The best candidate's fitted readout is
installed as the new reference.  Uniform- and normal-sampling candidate
sources reproduce the non-evolutionary baselines behind the same
interface.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rbfn
from .cpg import CpgConfig, NUM_LEGS, rhythm_at
from .kinematics import LegGeometry, clamp_to_workspace, planar_ik
from .rbfn import FitError, RbfnParams

NEG_INF = float("-inf")


@dataclass(frozen=True)
class FootTrajectory:
    """Planar waypoints (x, z) in the hip sagittal frame, phase-uniform.

    Shape (k, 2) when all legs share one cycle shape (leg phase offsets are
    applied downstream), or (4, k, 2) with one cycle per leg.
    """

    waypoints: np.ndarray

    def __post_init__(self):
        wp = np.asarray(self.waypoints, dtype=float)
        if wp.ndim not in (2, 3) or wp.shape[-1] != 2 or wp.shape[-2] < 4:
            raise ValueError("waypoints must be (k>=4, 2) or (4, k>=4, 2)")
        if wp.ndim == 3 and wp.shape[0] != NUM_LEGS:
            raise ValueError("per-leg waypoints must have 4 leg rows")
        if not np.all(np.isfinite(wp)):
            raise ValueError("waypoints must be finite")

    @property
    def k(self) -> int:
        return self.waypoints.shape[-2]

    @property
    def per_leg(self) -> bool:
        return self.waypoints.ndim == 3


def default_trajectory(k: int = 20, step_length: float = 0.12,
                       swing_height: float = 0.05, stance_depth: float = 0.245
                       ) -> FootTrajectory:
    """A rough hand-set walk cycle: straight stance drag, sine-arc swing.

    Phase 0 is mid-stance; stance occupies the half-cycle around it where
    the rhythm signal is non-negative.
    """
    wp = np.empty((k, 2))
    for i in range(k):
        f = i / k
        g = f - 1.0 if f > 0.75 else f
        if -0.25 <= g <= 0.25:  # stance: foot travels backward under the hip
            wp[i] = (-2.0 * step_length * g, -stance_depth)
        else:  # swing: forward and lifted
            s = (f - 0.25) / 0.5
            wp[i] = (-step_length / 2.0 + step_length * s,
                     -stance_depth + swing_height * math.sin(math.pi * s))
    return FootTrajectory(wp)


def sample_waypoints(traj: FootTrajectory, k: int) -> np.ndarray:
    """k phase-uniform samples per leg of the closed trajectory polygon.

    Sampling at the stored count returns the stored waypoints unchanged.
    """
    if k < 4:
        raise ValueError("need at least 4 samples")
    if k == traj.k:
        return traj.waypoints.copy()
    if traj.per_leg:
        return np.stack([
            np.asarray([waypoint_at_phase(traj.waypoints[leg], j / k) for j in range(k)])
            for leg in range(NUM_LEGS)
        ])
    out = np.empty((k, 2))
    for j in range(k):
        out[j] = waypoint_at_phase(traj.waypoints, j / k)
    return out


def waypoint_at_phase(waypoints: np.ndarray, phase: float) -> np.ndarray:
    """Linear interpolation around the closed waypoint loop, phase in [0, 1)."""
    k = waypoints.shape[0]
    pos = (phase % 1.0) * k
    i = int(math.floor(pos)) % k
    frac = pos - math.floor(pos)
    nxt = (i + 1) % k
    return (1.0 - frac) * waypoints[i] + frac * waypoints[nxt]


@dataclass(frozen=True)
class Genome:
    """Per-waypoint perturbation 2-vectors; (k, 2) shared across legs or
    (4, k, 2) per leg."""

    deltas: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.deltas, dtype=float)
        if d.shape[-1] != 2 or d.ndim not in (2, 3):
            raise ValueError("deltas must be (k, 2) or (4, k, 2)")
        if d.ndim == 3 and d.shape[0] != NUM_LEGS:
            raise ValueError("per-leg deltas must have 4 leg rows")
        if not np.all(np.isfinite(d)):
            raise ValueError("deltas must be finite")

    @property
    def per_leg(self) -> bool:
        return self.deltas.ndim == 3


def zero_genome(k: int, per_leg: bool = False) -> Genome:
    shape = (NUM_LEGS, k, 2) if per_leg else (k, 2)
    return Genome(np.zeros(shape))


def apply_genome(waypoints: np.ndarray, genome: Genome,
                 geom: LegGeometry | None = None) -> np.ndarray:
    """Shift waypoints by the genome and repair them into the workspace.

    Shapes broadcast: a (k, 2) genome on (k, 2) waypoints stays shared; any
    per-leg side yields (4, k, 2).  Repair is a radial projection onto the
    reachable boundary.
    """
    geom = geom if geom is not None else LegGeometry()
    wp = waypoints if waypoints.ndim == genome.deltas.ndim or waypoints.ndim == 3 \
        else waypoints[None, :, :]
    moved = wp + genome.deltas
    flat = moved.reshape(-1, 2)
    for i in range(flat.shape[0]):
        flat[i] = clamp_to_workspace(flat[i, 0], flat[i, 1], geom)
    return moved


@dataclass
class FitnessRecord:
    genome: Genome
    fitness: float
    params: RbfnParams | None
    steps: int


# -- candidate generation -----------------------------------------------------


@dataclass(frozen=True)
class GaConfig:
    tournament_size: int = 3
    crossover_prob: float = 0.5   # per waypoint
    mutation_prob: float = 0.2    # per coordinate
    mutation_sigma: float = 0.01  # m


def _tournament(pop: list[tuple[Genome, float]], size: int,
                rng: np.random.Generator) -> Genome:
    idx = rng.integers(0, len(pop), size=size)
    best = max((int(i) for i in idx), key=lambda i: pop[i][1])
    return pop[best][0]


def ga_generation(pop: list[tuple[Genome, float]], n: int,
                  rng: np.random.Generator, cfg: GaConfig = GaConfig()
                  ) -> list[Genome]:
    """N offspring by tournament selection, per-waypoint uniform crossover,
    and additive Gaussian mutation; the best parent passes through intact."""
    if not pop:
        raise ValueError("population must be non-empty")
    elite = max(pop, key=lambda gf: gf[1])[0]
    out = [Genome(elite.deltas.copy())]
    while len(out) < n:
        pa = _tournament(pop, cfg.tournament_size, rng)
        pb = _tournament(pop, cfg.tournament_size, rng)
        child = pa.deltas.copy()
        if cfg.crossover_prob > 0.0:
            take_b = rng.random(child.shape[:-1]) < cfg.crossover_prob
            child[take_b] = pb.deltas[take_b]
        if cfg.mutation_prob > 0.0 and cfg.mutation_sigma > 0.0:
            mask = rng.random(child.shape) < cfg.mutation_prob
            child = child + mask * rng.normal(0.0, cfg.mutation_sigma, child.shape)
        out.append(Genome(child))
    return out[:n]


def random_candidates(kind: str, template: Genome, n: int, scale: float,
                      rng: np.random.Generator) -> list[Genome]:
    """Non-evolutionary baselines: i.i.d. uniform [0, scale] or normal(0, scale)."""
    out = []
    for _ in range(n):
        if kind == "uniform":
            d = rng.uniform(0.0, scale, template.deltas.shape)
        elif kind == "normal":
            d = rng.normal(0.0, scale, template.deltas.shape)
        else:
            raise ValueError(f"unknown candidate source {kind!r}")
        out.append(Genome(d))
    return out


# -- reference rendering --------------------------------------------------------


class ReferenceGenerator:
    """Owns the oscillator, the readout network, and the base trajectory.

    Fitting maps each leg's phase-shifted waypoint through planar inverse
    kinematics to joint targets, then solves the readout so the rhythm
    signal reproduces them.
    """

    def __init__(self, cpg_cfg: CpgConfig, trajectory: FootTrajectory,
                 hidden: int = rbfn.DEFAULT_HIDDEN,
                 sigma_sq: float = rbfn.DEFAULT_VARIANCE,
                 fit_delta: float = 0.05,
                 geom: LegGeometry | None = None):
        self.cpg_cfg = cpg_cfg
        self.trajectory = trajectory
        self.fit_delta = fit_delta
        self.geom = geom if geom is not None else LegGeometry()
        self.params = rbfn.initial_params(cpg_cfg, hidden, sigma_sq)

    def joint_targets_for(self, waypoints: np.ndarray
                          ) -> list[tuple[np.ndarray, np.ndarray]]:
        """(rhythm sample, 12 joint angles) pairs at the waypoint phases."""
        k = waypoints.shape[0] if waypoints.ndim == 2 else waypoints.shape[1]
        cfg = self.cpg_cfg
        pairs = []
        for s in range(k):
            t = s * cfg.period / k
            rho = rhythm_at(cfg, t)
            target = np.empty(12)
            for leg in range(NUM_LEGS):
                phase = (t / cfg.period - cfg.phase_offsets[leg]) % 1.0
                wp_leg = waypoints if waypoints.ndim == 2 else waypoints[leg]
                x, z = waypoint_at_phase(wp_leg, phase)
                hip, knee = planar_ik(x, z, self.geom)
                target[3 * leg:3 * leg + 3] = (0.0, hip, knee)
            pairs.append((rho, target))
        return pairs

    def fit_params_for(self, waypoints: np.ndarray) -> RbfnParams:
        """Readout parameters reproducing the candidate trajectory."""
        return rbfn.fit(self.joint_targets_for(waypoints), self.fit_delta, self.params)

    def install(self, params: RbfnParams, trajectory: FootTrajectory) -> None:
        self.params = params
        self.trajectory = trajectory

    def reference_at(self, t: float) -> np.ndarray:
        return rbfn.forward(rhythm_at(self.cpg_cfg, t), self.params)

    def refit_current(self) -> None:
        """Fit the readout to the currently installed trajectory."""
        self.params = self.fit_params_for(self.trajectory.waypoints)


# -- evaluation and search ---------------------------------------------------------


def ec_evaluate(genome: Genome, policy, task, refgen: ReferenceGenerator,
                buffer, n_steps: int, rng: np.random.Generator) -> FitnessRecord:
    """Score one candidate by a fixed-policy rollout on its reference.

    The candidate trajectory is fitted into readout parameters; failure to
    fit scores -inf with no rollout.  Otherwise the policy (parameters
    untouched) runs for up to n_steps, rewards accumulate into the
    fitness, and every executed transition is appended to the buffer.
    """
    waypoints = apply_genome(refgen.trajectory.waypoints, genome, refgen.geom)
    try:
        params = refgen.fit_params_for(waypoints)
    except FitError:
        return FitnessRecord(genome, NEG_INF, None, 0)

    obs = task.reset(rng)
    fitness = 0.0
    steps = 0
    for _ in range(n_steps):
        delta = policy.act(obs, rng)
        next_obs, reward, done, record = task.step(delta, params)
        # a fall terminates the value bootstrap; running out of rollout
        # budget is only a truncation
        terminal = record.fell if record is not None else done
        buffer.push(obs, delta, reward, next_obs, terminal)
        fitness += reward
        steps += 1
        obs = next_obs
        if done:
            break
    return FitnessRecord(genome, fitness, params, steps)


@dataclass(frozen=True)
class OptimizeConfig:
    episodes: int = 10        # GA generations per optimizer run
    candidates: int = 40      # genomes per generation
    rollout_steps: int = 300  # cap per fitness rollout
    source: str = "ga"        # ga | uniform | normal
    sample_scale: float = 0.01
    per_leg: bool = False
    ga: GaConfig = field(default_factory=GaConfig)

    def __post_init__(self):
        if self.episodes < 1 or self.candidates < 1 or self.rollout_steps < 0:
            raise ValueError("episodes, candidates must be >= 1; steps >= 0")
        if self.source not in ("ga", "uniform", "normal"):
            raise ValueError(f"unknown candidate source {self.source!r}")


@dataclass
class OptimizeResult:
    params: RbfnParams | None
    trajectory: FootTrajectory | None
    best_fitness: float
    improved: bool
    generations: list[dict]
    rollout_steps: int


def optimize_reference(refgen: ReferenceGenerator, policy, task, buffer,
                       cfg: OptimizeConfig, rng: np.random.Generator
                       ) -> OptimizeResult:
    """Search perturbation genomes for a better reference trajectory.

    The unperturbed genome is evaluated first, so the running best never
    falls below the current reference's own score and the best-ever record
    is monotone across generations.  Returns the best candidate's fitted
    readout and trajectory; when nothing fits, reports no improvement and
    leaves the current reference in place.
    """
    k = refgen.trajectory.k
    base = zero_genome(k, cfg.per_leg)
    best = ec_evaluate(base, policy, task, refgen, buffer, cfg.rollout_steps, rng)
    baseline_fitness = best.fitness
    total_steps = best.steps
    pop: list[tuple[Genome, float]] = [(base, best.fitness)]
    generations: list[dict] = []

    for gen in range(cfg.episodes):
        if cfg.source == "ga":
            cands = ga_generation(pop, cfg.candidates, rng, cfg.ga)
        else:
            cands = random_candidates(cfg.source, base, cfg.candidates,
                                      cfg.sample_scale, rng)
        scored: list[tuple[Genome, float]] = []
        for genome in cands:
            rec = ec_evaluate(genome, policy, task, refgen, buffer,
                              cfg.rollout_steps, rng)
            total_steps += rec.steps
            scored.append((genome, rec.fitness))
            if rec.fitness > best.fitness:
                best = rec
        finite = [f for _, f in scored if f > NEG_INF]
        generations.append({
            "generation": gen + 1,
            "best_ever": best.fitness,
            "gen_best": max(finite) if finite else NEG_INF,
            "gen_mean": float(np.mean(finite)) if finite else NEG_INF,
            "failed_fits": sum(1 for _, f in scored if f == NEG_INF),
        })
        pop = scored if finite else pop

    if best.params is None:
        return OptimizeResult(None, None, NEG_INF, False, generations, total_steps)
    new_wp = apply_genome(refgen.trajectory.waypoints, best.genome, refgen.geom)
    improved = best.fitness > baseline_fitness
    return OptimizeResult(best.params, FootTrajectory(new_wp), best.fitness,
                          improved, generations, total_steps)
