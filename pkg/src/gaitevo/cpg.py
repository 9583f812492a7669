"""Central pattern generator: a Hopf oscillator per leg.

The oscillator is the supercritical normal form

    dx/dt = alpha * (mu - r^2) * x - (2*pi/T) * y
    dy/dt = alpha * (mu - r^2) * y + (2*pi/T) * x,   r^2 = x^2 + y^2

whose limit cycle is the circle of radius sqrt(mu) traversed once per
period T.  Each leg reads the same base signal shifted by a fixed
fraction of the cycle, which fixes the footfall order of the gait.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Cycle fractions for (LF, RF, LH, RH).
WALK_OFFSETS = (0.0, 0.5, 0.25, 0.75)
TROT_OFFSETS = (0.0, 0.5, 0.5, 0.0)

NUM_LEGS = 4


@dataclass(frozen=True)
class CpgConfig:
    """Oscillator parameters shared by all four legs.

    The default amplitude (sqrt(mu) ~ 0.55) keeps adjacent readout centers
    within the Gaussian width of the reference network, which the rendered
    reference needs to stay smooth between fit samples.
    """

    mu: float = 0.3
    alpha: float = 10.0
    period: float = 2.0
    phase_offsets: tuple[float, float, float, float] = WALK_OFFSETS

    def __post_init__(self):
        if not (self.period > 0.0 and math.isfinite(self.period)):
            raise ValueError(f"period must be positive, got {self.period}")
        if not (self.mu > 0.0 and math.isfinite(self.mu)):
            raise ValueError(f"mu must be positive, got {self.mu}")
        if not (self.alpha > 0.0 and math.isfinite(self.alpha)):
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if len(self.phase_offsets) != NUM_LEGS:
            raise ValueError("phase_offsets must have one entry per leg")
        for off in self.phase_offsets:
            if not (0.0 <= off < 1.0):
                raise ValueError(f"phase offsets must lie in [0, 1), got {off}")

    @property
    def amplitude(self) -> float:
        return math.sqrt(self.mu)

    @property
    def angular_rate(self) -> float:
        return 2.0 * math.pi / self.period


@dataclass(frozen=True)
class OscillatorState:
    x: float
    y: float

    def radius(self) -> float:
        return math.hypot(self.x, self.y)


def _derivative(x: float, y: float, cfg: CpgConfig) -> tuple[float, float]:
    gain = cfg.alpha * (cfg.mu - (x * x + y * y))
    w = cfg.angular_rate
    return gain * x - w * y, gain * y + w * x


def step_oscillator(state: OscillatorState, cfg: CpgConfig, dt: float) -> OscillatorState:
    """Advance the oscillator by one fixed RK4 step of length dt.

    dt must be positive and no coarser than period/100; the limit cycle is
    only resolved accurately at fine steps, and callers integrate at the
    control substep anyway.
    """
    if not (math.isfinite(state.x) and math.isfinite(state.y)):
        raise ValueError("oscillator state must be finite")
    if not (0.0 < dt <= cfg.period / 100.0):
        raise ValueError(f"dt must lie in (0, period/100], got {dt}")

    x, y = state.x, state.y
    k1x, k1y = _derivative(x, y, cfg)
    k2x, k2y = _derivative(x + 0.5 * dt * k1x, y + 0.5 * dt * k1y, cfg)
    k3x, k3y = _derivative(x + 0.5 * dt * k2x, y + 0.5 * dt * k2y, cfg)
    k4x, k4y = _derivative(x + dt * k3x, y + dt * k3y, cfg)
    return OscillatorState(
        x=x + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
        y=y + dt / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y),
    )


def base_rhythm(cfg: CpgConfig, t: float) -> float:
    """x-component of the converged oscillator started at (sqrt(mu), 0).

    On the limit cycle the dynamics reduce to uniform rotation, so the
    converged signal is exactly sqrt(mu) * cos(2*pi*t/period).
    """
    return cfg.amplitude * math.cos(cfg.angular_rate * t)


def rhythm_at(cfg: CpgConfig, t: float) -> np.ndarray:
    """Per-leg rhythm samples at time t, shape (4,).

    Leg j reads the base signal delayed by its cycle fraction:
    rho_j(t) = base(t - offset_j * period).
    """
    if t < 0.0:
        raise ValueError(f"t must be non-negative, got {t}")
    out = np.empty(NUM_LEGS)
    for j, off in enumerate(cfg.phase_offsets):
        out[j] = base_rhythm(cfg, t - off * cfg.period)
    return out


def leg_phases(cfg: CpgConfig, t: float) -> np.ndarray:
    """Cycle fraction in [0, 1) of each leg at time t."""
    frac = t / cfg.period
    return np.array([(frac - off) % 1.0 for off in cfg.phase_offsets])


def stance_flags(cfg: CpgConfig, t: float) -> np.ndarray:
    """Boolean per-leg stance indicator: the half-cycle where the rhythm
    signal is non-negative counts as stance."""
    return rhythm_at(cfg, t) >= 0.0


def ideal_support_count(cfg: CpgConfig, t: float) -> int:
    """Number of legs whose preset phase puts them in stance at time t."""
    return int(np.count_nonzero(stance_flags(cfg, t)))
