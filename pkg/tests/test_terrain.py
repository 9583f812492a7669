import math

import numpy as np
import pytest

from gaitevo.terrain import LEAD_IN, TerrainSpec, terrain_height, terrain_profile


def test_flat_everywhere_zero():
    spec = TerrainSpec()
    for x, y in [(-5.0, 0.0), (0.0, 3.0), (12.5, -1.0)]:
        assert terrain_height(spec, x, y) == 0.0


def test_slope_rise():
    spec = TerrainSpec(kind="slope", slope_deg=15.0)
    z = terrain_height(spec, LEAD_IN + 1.0, 0.0)
    assert abs(z - math.tan(math.radians(15.0)) * 1.0) < 1e-12
    assert terrain_height(spec, 0.5, 0.0) == 0.0


def test_stairs_levels():
    spec = TerrainSpec(kind="stairs", rise=0.15, run=0.33)
    assert abs(terrain_height(spec, LEAD_IN + 0.33, 0.0) - 0.15) < 1e-12
    xs = np.linspace(0.0, LEAD_IN + 5.0, 800)
    levels = {round(terrain_height(spec, x, 0.0) / 0.15) for x in xs}
    for x in xs:
        z = terrain_height(spec, x, 0.0)
        assert abs(z - round(z / 0.15) * 0.15) < 1e-9
    assert 0 in levels and 1 in levels


def test_height_is_pure():
    spec = TerrainSpec(kind="up_downstairs")
    for x in np.linspace(-1.0, 20.0, 57):
        assert terrain_height(spec, x, 0.0) == terrain_height(spec, x, 0.0)
        assert terrain_height(spec, x, 0.0) == terrain_height(spec, x, 5.0)


def test_up_downslope_symmetric_about_apex():
    spec = TerrainSpec(kind="up_downslope", slope_deg=15.0)
    unit = spec.unit_length()
    for rep in range(3):
        apex = LEAD_IN + rep * unit + unit / 2.0
        for d in np.linspace(0.0, unit / 2.0 - 1e-9, 40):
            za = terrain_height(spec, apex - d, 0.0)
            zb = terrain_height(spec, apex + d, 0.0)
            assert abs(za - zb) < 1e-9


def test_up_downstairs_unit_closes():
    spec = TerrainSpec(kind="up_downstairs")
    unit = spec.unit_length()
    assert abs(terrain_height(spec, LEAD_IN + unit - 1e-9, 0.0)) < 1e-9


def test_upslope_downstairs_accumulates():
    spec = TerrainSpec(kind="upslope_downstairs", slope_deg=15.0)
    unit = spec.unit_length()
    net = spec._unit_height(unit)
    z2 = terrain_height(spec, LEAD_IN + unit + 1e-9, 0.0)
    assert abs(z2 - net) < 1e-6


def test_profile_rows_and_flat_values():
    spec = TerrainSpec()
    prof = terrain_profile(spec, 10.0, 0.01)
    assert prof.shape == (1001, 2)
    assert np.all(prof[:, 1] == 0.0)
    assert prof[0, 0] == 0.0 and abs(prof[-1, 0] - 10.0) < 1e-12


def test_spec_validation():
    with pytest.raises(ValueError):
        TerrainSpec(kind="lava")
    with pytest.raises(ValueError):
        TerrainSpec(kind="stairs", rise=-0.1)
    with pytest.raises(ValueError):
        terrain_profile(TerrainSpec(), -1.0)
