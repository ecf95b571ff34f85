import math

import numpy as np
import pytest

from diracfdtd.classical import (ClassicalOracleError, ClassicalState, classical_orbit_radius,
                                 conserved_quantity_check, energy_deviation, integrate_canonical_conservation,
                                 integrate_dipole_parallel, integrate_dipole_perpendicular,
                                 integrate_velocity_form, rk4_path)
from diracfdtd.potentials import DipoleLineSpec, SolenoidPairSpec
from diracfdtd.units import UNITS

M = UNITS.electron_rest_energy
DIP_PAR = DipoleLineSpec(1.7e-17, 0.19, "parallel")
DIP_PERP = DipoleLineSpec(1.7e-17, 0.19, "perpendicular")
SOL = SolenoidPairSpec(-5.2e-14, 0.05)


def test_state_constructors():
    s = ClassicalState.from_momentum(-0.4, 0.53)
    assert s.v == pytest.approx(0.53 / math.hypot(0.53, M))
    back = ClassicalState.from_velocity(-0.4, s.v)
    assert back.p == pytest.approx(0.53)
    with pytest.raises(ClassicalOracleError):
        ClassicalState.from_velocity(0.0, 1.0)


def test_rk4_exact_for_cubic_in_time():
    # dy/dt = 3 t^2 with x = t: RK4 integrates cubics exactly
    t, x, y = rk4_path(lambda x, y: 3 * x * x, 0.0, 0.0, 0.0, 0.1, 1.0, lambda y: 1.0)
    assert x[-1] == pytest.approx(1.0, abs=1e-14)
    assert y[-1] == pytest.approx(1.0, abs=1e-13)


def test_rk4_lands_on_x_end():
    t, x, y = rk4_path(lambda x, y: 0.0, 0.0, 0.0, 0.0, 0.3, 1.0, lambda y: 0.5)
    assert x[-1] == 1.0
    assert t[-1] == pytest.approx(2.0, rel=1e-12)


def test_rk4_turning_point_error():
    with pytest.raises(ClassicalOracleError):
        rk4_path(lambda x, y: -1.0, 0.5, 0.0, 0.0, 0.01, 10.0, lambda y: y)
    with pytest.raises(ClassicalOracleError):
        rk4_path(lambda x, y: 0.0, -0.5, 0.0, 0.0, 0.01, 1.0, lambda y: y)


def _order(make, dt):
    """Observed order from max |v(t)| errors against a 64x finer run."""
    ref = make(dt / 64)
    errs = []
    for i in (2, 3):
        tr = make(dt / 2 ** i)
        m = len(tr) - 1  # drop the shortened final step
        stride = 2 ** (6 - i)
        errs.append(np.abs(tr.v[:m] - ref.v[: m * stride : stride]).max())
    return math.log2(errs[0] / errs[1])


@pytest.mark.parametrize("name", ["parallel", "perpendicular", "canonical", "velocity"])
def test_fourth_order_convergence(name):
    init = ClassicalState.from_momentum(-0.4, 0.09)
    if name == "parallel":
        make = lambda h: integrate_dipole_parallel(DIP_PAR, init, 0.4, dt=h, refine=False)  # noqa: E731
        dt = 0.4
    elif name == "perpendicular":
        make = lambda h: integrate_dipole_perpendicular(DIP_PERP, init, 0.4, dt=h, refine=False)  # noqa: E731
        dt = 0.4
    else:
        init = ClassicalState.from_momentum(-0.4, 0.447)
        dt = 0.06
        if name == "canonical":
            make = lambda h: integrate_canonical_conservation(SOL, init, 0.4, dt=h, refine=False)  # noqa: E731
        else:
            make = lambda h: integrate_velocity_form(SOL, init, 0.4, dt=h)  # noqa: E731
    assert _order(make, dt) == pytest.approx(4.0, abs=0.3)


def test_canonical_momentum_conserved():
    init = ClassicalState.from_momentum(-0.4, 0.53)
    traj = integrate_canonical_conservation(SOL, init, 0.4)
    assert conserved_quantity_check(traj, SOL) < 1e-6 * 0.53
    vf = integrate_velocity_form(SOL, init, 0.4, dt=traj.dt)
    assert vf.v[-1] == pytest.approx(traj.v[-1], rel=1e-8)
    assert np.abs(traj.extra["neglected_term"]).max() > 0


def test_solenoid_peak_at_center_and_symmetric():
    init = ClassicalState.from_momentum(-0.4, 0.53)
    traj = integrate_canonical_conservation(SOL, init, 0.4)
    i = int(np.argmax(traj.v))
    assert abs(traj.x[i]) < SOL.half_separation / 10
    assert traj.v[-1] == pytest.approx(traj.v[0], rel=1e-9)
    assert traj.v_of_x(-0.1) == pytest.approx(traj.v_of_x(0.1), rel=1e-6)


def test_dipole_energy_conserved():
    init = ClassicalState.from_momentum(-0.4, 0.09)
    for spec, fn in ((DIP_PAR, integrate_dipole_parallel), (DIP_PERP, integrate_dipole_perpendicular)):
        traj = fn(spec, init, 0.4)
        assert energy_deviation(traj, spec) < 1e-9
        assert traj.richardson_change < 1e-6


def test_zero_source_gives_constant_velocity():
    init = ClassicalState.from_momentum(-0.4, 0.09)
    for spec, fn in ((DipoleLineSpec(0.0, 0.19, "parallel"), integrate_dipole_parallel),
                     (DipoleLineSpec(0.0, 0.19, "perpendicular"), integrate_dipole_perpendicular)):
        traj = fn(spec, init, 0.4, refine=False)
        assert np.all(traj.v == init.v)
    traj = integrate_canonical_conservation(SolenoidPairSpec(0.0, 0.05), ClassicalState.from_momentum(-0.4, 0.53),
                                            0.4, refine=False)
    assert np.all(traj.p == 0.53)


def test_orientation_and_start_checks():
    init = ClassicalState.from_momentum(-0.4, 0.09)
    with pytest.raises(ValueError):
        integrate_dipole_parallel(DIP_PERP, init, 0.4)
    with pytest.raises(ValueError):
        integrate_canonical_conservation(SOL, ClassicalState.from_momentum(-0.3, 0.53), 0.4)


def test_orbit_radius():
    assert classical_orbit_radius(0.53, 1e8) == pytest.approx(0.0176789, rel=1e-5)
    assert classical_orbit_radius(0.53, -1e8) == classical_orbit_radius(0.53, 1e8)
    with pytest.raises(ValueError):
        classical_orbit_radius(0.53, 0.0)
