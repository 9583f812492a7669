import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from gaitevo.cpg import (
    CpgConfig,
    OscillatorState,
    ideal_support_count,
    rhythm_at,
    base_rhythm,
    step_oscillator,
)


def hopf_rhs(t, s, mu, alpha, period):
    x, y = s
    gain = alpha * (mu - (x * x + y * y))
    w = 2.0 * math.pi / period
    return [gain * x - w * y, gain * y + w * x]


def integrate_oracle(cfg, x0, y0, duration):
    """Independent high-accuracy ODE solution of the oscillator."""
    sol = solve_ivp(
        hopf_rhs, (0.0, duration), [x0, y0],
        args=(cfg.mu, cfg.alpha, cfg.period),
        rtol=1e-12, atol=1e-14, dense_output=False,
    )
    return sol.y[0, -1], sol.y[1, -1]


def integrate_steps(state, cfg, dt, n):
    for _ in range(n):
        state = step_oscillator(state, cfg, dt)
    return state


def test_origin_is_fixed_point():
    cfg = CpgConfig()
    s = integrate_steps(OscillatorState(0.0, 0.0), cfg, cfg.period / 200.0, 50)
    assert s.x == 0.0 and s.y == 0.0


def test_one_period_returns_to_start():
    cfg = CpgConfig()
    dt = cfg.period / 800.0
    s = integrate_steps(OscillatorState(math.sqrt(cfg.mu), 0.0), cfg, dt, 800)
    # oracle confirms the true flow returns to the start point
    ox, oy = integrate_oracle(cfg, math.sqrt(cfg.mu), 0.0, cfg.period)
    assert math.hypot(ox - math.sqrt(cfg.mu), oy) < 1e-9
    rel = math.hypot(s.x - math.sqrt(cfg.mu), s.y) / math.sqrt(cfg.mu)
    assert rel < 1e-3


def test_limit_cycle_attraction_from_outside():
    cfg = CpgConfig()
    dt = cfg.period / 400.0
    s = integrate_steps(OscillatorState(2.0 * math.sqrt(cfg.mu), 0.0), cfg, dt, 4000)
    ox, oy = integrate_oracle(cfg, 2.0 * math.sqrt(cfg.mu), 0.0, 10.0 * cfg.period)
    assert abs(math.hypot(ox, oy) - math.sqrt(cfg.mu)) < 1e-6
    assert abs(s.radius() - math.sqrt(cfg.mu)) < 0.01 * math.sqrt(cfg.mu)


@pytest.mark.parametrize("radius_frac", [0.05, 0.3, 1.7, 4.0])
def test_limit_cycle_attraction_property(radius_frac):
    cfg = CpgConfig(mu=1.3, alpha=8.0, period=1.6)
    r0 = radius_frac * math.sqrt(cfg.mu)
    dt = cfg.period / 400.0
    s = integrate_steps(OscillatorState(r0, 0.0), cfg, dt, 4000)
    assert abs(s.radius() - math.sqrt(cfg.mu)) < 0.01 * math.sqrt(cfg.mu)


def test_period_from_zero_crossings():
    cfg = CpgConfig()
    dt = cfg.period / 1000.0
    s = OscillatorState(math.sqrt(cfg.mu), 0.0)
    xs = [s.x]
    for _ in range(3000):
        s = step_oscillator(s, cfg, dt)
        xs.append(s.x)
    crossings = []
    for i in range(1, len(xs)):
        if xs[i - 1] * xs[i] < 0.0:
            # linear interpolation of the crossing time
            frac = xs[i - 1] / (xs[i - 1] - xs[i])
            crossings.append((i - 1 + frac) * dt)
    spacings = np.diff(crossings)
    assert np.all(np.abs(spacings - cfg.period / 2.0) < 0.005 * cfg.period / 2.0)


def test_step_determinism():
    cfg = CpgConfig()
    a = integrate_steps(OscillatorState(0.4, -0.2), cfg, 0.004, 500)
    b = integrate_steps(OscillatorState(0.4, -0.2), cfg, 0.004, 500)
    assert a.x == b.x and a.y == b.y


def test_step_rejects_bad_inputs():
    cfg = CpgConfig()
    with pytest.raises(ValueError):
        step_oscillator(OscillatorState(math.nan, 0.0), cfg, 0.001)
    with pytest.raises(ValueError):
        step_oscillator(OscillatorState(1.0, 0.0), cfg, cfg.period)  # too coarse
    with pytest.raises(ValueError):
        step_oscillator(OscillatorState(1.0, 0.0), cfg, 0.0)


def test_rhythm_identical_offsets():
    cfg = CpgConfig(phase_offsets=(0.0, 0.0, 0.0, 0.0))
    for t in (0.0, 0.3, 1.7, 5.1):
        rho = rhythm_at(cfg, t)
        assert np.all(rho == rho[0])


def test_rhythm_periodicity():
    cfg = CpgConfig()
    for t in np.linspace(0.0, 2.0 * cfg.period, 17):
        assert np.max(np.abs(rhythm_at(cfg, t + cfg.period) - rhythm_at(cfg, t))) < 1e-6


def test_rhythm_half_period_shift():
    cfg = CpgConfig(phase_offsets=(0.0, 0.5, 0.25, 0.75))
    for t in np.linspace(0.0, 4.0, 23):
        rho = rhythm_at(cfg, t)
        assert abs(rho[1] - base_rhythm(cfg, t - cfg.period / 2.0)) < 1e-6


def test_rhythm_rejects_negative_time():
    with pytest.raises(ValueError):
        rhythm_at(CpgConfig(), -0.1)


def test_config_validation():
    with pytest.raises(ValueError):
        CpgConfig(period=0.0)
    with pytest.raises(ValueError):
        CpgConfig(mu=-1.0)
    with pytest.raises(ValueError):
        CpgConfig(phase_offsets=(0.0, 0.5, 0.25, 1.5))


def test_ideal_support_count_walk():
    cfg = CpgConfig()
    counts = [ideal_support_count(cfg, t) for t in np.linspace(0.0, cfg.period, 40, endpoint=False)]
    assert all(1 <= c <= 3 for c in counts)
