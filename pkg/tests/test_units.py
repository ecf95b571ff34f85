import math

import pytest
import scipy.constants as sc

from diracfdtd.units import MAX_CFL_SAFETY, UNITS, GridSpec, cfl_limit, index_to_position


def test_hbar_in_mev_nm():
    # independent route: hbar*c = 197.3269804 MeV fm
    assert UNITS.hbar == pytest.approx(197.3269804e-6, rel=1e-9)


def test_electron_rest_energy():
    assert UNITS.electron_rest_energy == pytest.approx(0.51099895, rel=1e-8)


def test_field_conversions_round_trip():
    assert float(UNITS.internal_to_tesla(UNITS.tesla_to_internal(1e8))) == pytest.approx(1e8)
    assert float(UNITS.internal_to_weber(UNITS.weber_to_internal(5.2e-14))) == pytest.approx(5.2e-14)
    assert float(UNITS.internal_to_dipole_density(UNITS.dipole_density_to_internal(1.7e-17))) == \
        pytest.approx(1.7e-17)


def test_orbit_radius_from_si():
    # r = p/(eB) computed fully in SI
    p_si = 0.53e6 * sc.e / sc.c
    r_si = p_si / (sc.e * 1e8)
    r_int = 0.53 / float(UNITS.tesla_to_internal(1e8))
    assert r_int == pytest.approx(r_si * 1e9, rel=1e-12)


def test_cfl_limit_default_and_errors():
    assert cfl_limit(1.0) == pytest.approx(0.5 / math.sqrt(3))
    with pytest.raises(ValueError):
        cfl_limit(0.0)


def test_grid_rejects_unstable_step():
    with pytest.raises(ValueError):
        GridSpec(8, 8, 8, 1.0, 1.01 * MAX_CFL_SAFETY / math.sqrt(3))


def test_grid_rejects_bad_counts():
    with pytest.raises(ValueError):
        GridSpec(0, 4, 4, 1.0, 0.1)


def test_centered_grid_middle_cell():
    g = GridSpec.centered(5, 1, 7, 0.5, center=(1.0, 2.0, -3.0))
    assert g.axis(0)[2] == pytest.approx(1.0)
    assert g.axis(2)[3] == pytest.approx(-3.0)
    assert g.planar and g.spatial_axes() == (0, 2)


def test_index_to_position():
    g = GridSpec.with_cfl(4, 4, 4, 0.25, origin=(1.0, 0.0, -1.0))
    assert list(index_to_position(g, 1, 2, 3)) == pytest.approx([1.25, 0.5, -0.25])
