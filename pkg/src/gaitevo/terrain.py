"""Procedural heightfields: flat ground, slopes, stairs, and composites.

A terrain is a pure single-valued height function z(x, y).  Composite
terrains concatenate a unit profile N times along x after a flat lead-in;
all profiles are invariant along y.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

UNIT_FLAT_LEN = 1.0       # l0: flat segment inside a composite unit
UNIT_SLOPE_LEN = 1.0      # l1: horizontal run of a slope segment
UNIT_STAIR_LEN = 1.65     # l2: horizontal run of a stair flight
STAIR_RISE = 0.15         # h: rise of one step
DEFAULT_REPEATS = 10      # N: units per composite
LEAD_IN = 1.0             # flat approach before any feature
DEFAULT_STAIR_RUN = 0.33  # tread depth giving 5 steps per flight


def _slope_profile(x: float, run: float, rise: float) -> float:
    if x <= 0.0:
        return 0.0
    if x >= run:
        return rise
    return rise * x / run


def _stair_profile(x: float, run: float, rise: float, length: float) -> float:
    if x <= 0.0:
        return 0.0
    if x >= length:
        x = length
    steps = math.floor(x / run + 1e-12)
    return min(steps, math.floor(length / run)) * rise


@dataclass(frozen=True)
class TerrainSpec:
    """Heightfield description.

    kind: one of "flat", "slope", "stairs", "up_downslope", "up_downstairs",
    "upslope_downstairs".  slope_deg applies to slope-like kinds; rise/run
    shape stair steps; repeats is the number of composite units.
    """

    kind: str = "flat"
    slope_deg: float = 15.0
    rise: float = STAIR_RISE
    run: float = DEFAULT_STAIR_RUN
    repeats: int = DEFAULT_REPEATS
    flat_len: float = UNIT_FLAT_LEN
    slope_len: float = UNIT_SLOPE_LEN
    stair_len: float = UNIT_STAIR_LEN

    KINDS = ("flat", "slope", "stairs", "up_downslope", "up_downstairs",
             "upslope_downstairs")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown terrain kind {self.kind!r}")
        if self.kind != "flat":
            if self.rise <= 0.0 or self.run <= 0.0:
                raise ValueError("rise and run must be positive")
            if self.repeats < 1:
                raise ValueError("repeats must be >= 1")

    @property
    def slope_rise(self) -> float:
        return math.tan(math.radians(self.slope_deg)) * self.slope_len

    def unit_length(self) -> float:
        if self.kind == "up_downslope":
            return self.flat_len + 2.0 * self.slope_len
        if self.kind == "up_downstairs":
            return self.flat_len + 2.0 * self.stair_len
        if self.kind == "upslope_downstairs":
            return self.flat_len + self.slope_len + self.stair_len
        return 0.0

    def _unit_height(self, u: float) -> float:
        """Height inside one composite unit, local coordinate u in [0, L)."""
        f, s, st = self.flat_len, self.slope_len, self.stair_len
        if self.kind == "up_downslope":
            h = self.slope_rise
            if u < s:
                return _slope_profile(u, s, h)
            if u < s + f:
                return h
            return h - _slope_profile(u - s - f, s, h)
        if self.kind == "up_downstairs":
            h = self.rise * math.floor(st / self.run)
            if u < st:
                return _stair_profile(u, self.run, self.rise, st)
            if u < st + f:
                return h
            return h - _stair_profile(u - st - f, self.run, self.rise, st)
        if self.kind == "upslope_downstairs":
            h = self.slope_rise
            if u < s:
                return _slope_profile(u, s, h)
            if u < s + f:
                return h
            return h - _stair_profile(u - s - f, self.run, self.rise, st)
        return 0.0


def terrain_height(spec: TerrainSpec, x: float, y: float) -> float:
    """Ground height under (x, y); deterministic and y-invariant."""
    if spec.kind == "flat":
        return 0.0
    u = x - LEAD_IN
    if spec.kind == "slope":
        rise_total = math.tan(math.radians(spec.slope_deg)) * spec.slope_len * spec.repeats
        if u <= 0.0:
            return 0.0
        span = spec.slope_len * spec.repeats
        if u >= span:
            return rise_total
        return math.tan(math.radians(spec.slope_deg)) * u
    if spec.kind == "stairs":
        flight = spec.stair_len * spec.repeats
        if u <= 0.0:
            return 0.0
        return _stair_profile(min(u, flight), spec.run, spec.rise, flight)
    # composite kinds concatenate units directly: each starts at the
    # elevation the previous one ended on
    unit = spec.unit_length()
    net = spec._unit_height(unit)
    if u <= 0.0:
        return 0.0
    if u >= unit * spec.repeats:
        return net * spec.repeats
    idx = math.floor(u / unit)
    local = u - idx * unit
    return net * idx + spec._unit_height(local)


def terrain_profile(spec: TerrainSpec, span: float, resolution: float = 0.01) -> np.ndarray:
    """(x, z) samples along y = 0 from 0 to span inclusive, shape (n, 2)."""
    if span < 0.0 or resolution <= 0.0:
        raise ValueError("span must be >= 0 and resolution positive")
    n = int(round(span / resolution)) + 1
    out = np.empty((n, 2))
    for i in range(n):
        x = i * resolution
        out[i] = (x, terrain_height(spec, x, 0.0))
    return out
