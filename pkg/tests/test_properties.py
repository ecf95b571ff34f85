"""Property-based checks of invariants across the package."""

import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from diracfdtd.classical import ClassicalState, integrate_canonical_conservation
from diracfdtd.field import SpinorField, probability_density_slice, total_norm
from diracfdtd.formats import read_series, read_snapshot, write_series, write_snapshot
from diracfdtd.observables import PacketSpec, init_packet, lattice_moments
from diracfdtd.potentials import SolenoidPairSpec, solenoid_pair, uniform_b
from diracfdtd.scenario import load_preset, oracle_for
from diracfdtd.stepper import Stepper, StepperConfig, run
from diracfdtd.units import UNITS, GridSpec, cfl_limit, index_to_position

FAST = settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@FAST
@given(st.floats(1e-6, 1e3), st.floats(1e-3, 1e3), st.floats(0.01, 1.99))
def test_cfl_homogeneous(delta, scale, safety):
    assert cfl_limit(scale * delta, safety) == pytest.approx(scale * cfl_limit(delta, safety), rel=1e-14)


@FAST
@given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50), st.floats(1e-4, 1.0))
def test_index_to_position_affine(i, j, k, delta):
    g = GridSpec.with_cfl(60, 60, 60, delta, origin=(0.3, -0.2, 0.1))
    step = index_to_position(g, i + 1, j, k) - index_to_position(g, i, j, k)
    assert step == pytest.approx([delta, 0.0, 0.0], abs=1e-12 * delta)


def _random_field(seed, shape=(6, 5, 7)):
    rng = np.random.default_rng(seed)
    g = GridSpec.with_cfl(*shape, 0.1)
    psi = rng.standard_normal((4,) + shape) + 1j * rng.standard_normal((4,) + shape)
    return SpinorField(g, psi)


@FAST
@given(st.integers(0, 2 ** 32 - 1), st.floats(-10, 10))
def test_norm_phase_invariant(seed, theta):
    f = _random_field(seed)
    g = f.copy()
    g.psi *= np.exp(1j * theta)
    # |e^{i theta} z|^2 equals |z|^2 up to rounding of the rotation itself
    assert total_norm(g) == pytest.approx(total_norm(f), rel=1e-14)


@FAST
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from([0, 1, 2]))
def test_slices_reproduce_norm(seed, axis):
    f = _random_field(seed)
    total = sum(probability_density_slice(f, axis, i).sum() for i in range(f.grid.shape[axis]))
    assert total * f.grid.delta ** 2 == pytest.approx(total_norm(f) / f.grid.delta, rel=1e-12)


@FAST
@given(st.floats(-0.2, 0.2), st.floats(-0.2, 0.2), st.floats(1e5, 1e9))
def test_gauges_share_curl(x, z, b0):
    h = 1e-5
    curls = []
    for gauge in ("symmetric", "landau_x", "landau_z"):
        pot = uniform_b(b0, gauge)
        ax_up = pot.a_vec((x, 0.0, z + h))[0]
        ax_dn = pot.a_vec((x, 0.0, z - h))[0]
        az_r = pot.a_vec((x + h, 0.0, z))[2]
        az_l = pot.a_vec((x - h, 0.0, z))[2]
        curls.append((ax_up - ax_dn) / (2 * h) - (az_r - az_l) / (2 * h))
    b_int = float(UNITS.tesla_to_internal(b0))
    for c in curls:
        assert c == pytest.approx(b_int, rel=1e-9)


@FAST
@given(st.floats(-1e-13, 1e-13), st.floats(0.02, 0.2), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
def test_solenoid_pair_odd_in_flux(flux, a, x, z):
    p = solenoid_pair(SolenoidPairSpec(flux, a))
    m = solenoid_pair(SolenoidPairSpec(-flux, a))
    _, ax1, _, az1, _ = p.fields(x, 0.0, z)
    _, ax2, _, az2, _ = m.fields(x, 0.0, z)
    assert ax1 == -ax2 and az1 == -az2


@FAST
@given(st.floats(1e-15, 1e-13), st.floats(0.3, 0.7))
def test_oracle_depends_on_charge_times_flux(flux, p):
    spec_p = SolenoidPairSpec(flux, 0.05)
    spec_m = SolenoidPairSpec(-flux, 0.05)
    init = ClassicalState.from_momentum(-0.4, p)
    a = integrate_canonical_conservation(spec_p, init, 0.4, charge=-1.0, refine=False)
    b = integrate_canonical_conservation(spec_m, init, 0.4, charge=1.0, refine=False)
    assert np.array_equal(a.v, b.v)


@FAST
@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6)), elements=finite),
       finite, st.integers(0, 2), st.integers(0, 2 ** 32 - 1), st.text(max_size=12))
def test_snapshot_round_trip_any(tmp_path, data, t, axis, index, name):
    p = write_snapshot(tmp_path / "p.bin", data, t, axis, index, name)
    back, meta = read_snapshot(p)
    assert back.tobytes() == np.ascontiguousarray(data).tobytes()
    assert meta.time == t or (math.isnan(t) and math.isnan(meta.time))
    assert (tmp_path / "q.bin").write_bytes(p.read_bytes()) and \
        write_snapshot(tmp_path / "r.bin", back, meta.time, meta.axis, meta.index, name).read_bytes() == p.read_bytes()


@FAST
@given(st.lists(st.lists(finite, min_size=15, max_size=15), max_size=5))
def test_series_round_trip_any(tmp_path, rows):
    p = write_series(tmp_path / "s.csv", rows)
    back = read_series(p)
    assert np.array_equal(back, np.array(rows, dtype=float).reshape(len(rows), 15))
    assert write_series(tmp_path / "t.csv", back.tolist()).read_bytes() == p.read_bytes()


def _packet(momentum=(0.3, 0.0, 0.1)):
    g = GridSpec.centered(40, 1, 40, 1e-3)
    return init_packet(g, PacketSpec(width=2.5e-3, momentum=momentum))


@FAST
@given(st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False),
       st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False))
def test_step_is_linear(a, b):
    f1 = _packet()
    f2 = _packet((-0.2, 0.0, 0.3))
    st_ = Stepper(f1.grid, uniform_b(1e8))
    mix = f1.copy()
    mix.psi = a * f1.psi + b * f2.psi
    st_.step(f1)
    st_.step(f2)
    st_.step(mix)
    ref = a * f1.psi + b * f2.psi
    scale = max(1.0, abs(a) + abs(b)) * np.abs(f1.psi).max()
    assert np.abs(mix.psi - ref).max() <= 1e-13 * scale


def test_charge_flip_equals_flux_flip():
    g = GridSpec.centered(64, 1, 48, 2e-3, center=(0.03, 0.0, 0.0))
    spec = PacketSpec(width=4e-3, momentum=(0.3, 0.0, 0.0), center=(0.0, 0.0, 0.0))
    runs = []
    for charge, flux in ((1.0, 5e-14), (-1.0, -5e-14)):
        pot = solenoid_pair(SolenoidPairSpec(flux, 0.03))
        f = init_packet(g, spec)
        runs.append(run(f, pot, StepperConfig(charge=charge), n_steps=60, record_every=20))
        runs[-1] = (runs[-1], f)
    (s1, f1), (s2, f2) = runs
    assert np.array_equal(f1.psi, f2.psi)
    assert np.array_equal(s1.velocities, s2.velocities)


def test_deterministic_across_thread_counts():
    import numba

    f1, f2 = _packet(), _packet()
    st_ = Stepper(f1.grid, uniform_b(1e8))
    n0 = numba.get_num_threads()
    try:
        numba.set_num_threads(1)
        for _ in range(5):
            st_.step(f1)
        m1 = lattice_moments(f1)
        numba.set_num_threads(numba.config.NUMBA_NUM_THREADS)
        for _ in range(5):
            st_.step(f2)
        m2 = lattice_moments(f2)
    finally:
        numba.set_num_threads(n0)
    assert np.array_equal(f1.psi, f2.psi)
    assert m1["energy"] == m2["energy"] and np.array_equal(m1["center"], m2["center"])


def test_reflecting_boundary_keeps_norm_bounded():
    g = GridSpec.centered(80, 1, 80, 2e-4)
    f = init_packet(g, PacketSpec(width=1.2e-3, momentum=(0.3, 0.0, 0.12)))
    series = run(f, n_steps=1500, record_every=10)
    # allowance: the O(dt) excursion from reading the staggered pairs together
    assert series.norms.max() <= 1.0 + 5e-3
    assert series.norms[-1] <= 1.0 + 1e-3


def test_velocity_matches_momentum_over_energy():
    # resolved packet: k delta = 0.1, momentum spread 10%
    delta = 0.1 * UNITS.hbar / 0.3
    width = PacketSpec.default_width((0.3, 0.0, 0.0))
    g = GridSpec.centered(900, 1, 720, delta, center=(0.004, 0.0, 0.0))
    f = init_packet(g, PacketSpec(width=width, momentum=(0.3, 0.0, 0.0)))
    series = run(f, n_steps=300, record_every=30)
    # interior records only: the one-sided end differences are first order
    v = series.velocities[1:-1, 0]
    vp = series.momentum_velocities[1:-1, 0]
    assert np.all(np.abs(v - vp) <= 0.02 * np.abs(vp))


@pytest.mark.parametrize("name", ["fig6_dipoles_parallel", "fig6_dipoles_perpendicular", "fig8_two_solenoids",
                                  "fig8_two_solenoids_p064", "fig9_electron_positron", "fig10_oracle_overlay"])
def test_preset_oracles_have_fourth_order(name):
    (traj, _), _ = oracle_for(load_preset(name))
    assert traj.richardson_change < 1e-6
    from diracfdtd.classical import integrate_dipole_parallel, integrate_dipole_perpendicular  # noqa: F401
    scn = load_preset(name)
    desc = scn.potential
    init = ClassicalState(traj.t[0], traj.x[0], traj.v[0], traj.p[0])
    if desc["kind"] == "dipole_lines":
        from diracfdtd.potentials import DipoleLineSpec
        from diracfdtd import classical as cl
        spec = DipoleLineSpec(desc["line_density"], desc["half_separation"], desc["orientation"], desc["sign"])
        fn = cl.integrate_dipole_parallel if spec.orientation == "parallel" else cl.integrate_dipole_perpendicular
        make = lambda h: fn(spec, init, traj.x[-1], dt=h, refine=False)  # noqa: E731
    else:
        spec = SolenoidPairSpec(desc["flux"], desc["half_separation"], desc["radius"])
        make = lambda h: integrate_canonical_conservation(spec, init, traj.x[-1], dt=h, refine=False)  # noqa: E731
    dt = abs(traj.x[-1] - traj.x[0]) / abs(traj.v[0]) / 100
    ref = make(dt / 64)
    errs = []
    for i in (2, 3):
        tr = make(dt / 2 ** i)
        m = len(tr) - 1
        stride = 2 ** (6 - i)
        errs.append(np.abs(tr.v[:m] - ref.v[: m * stride: stride]).max())
    assert math.log2(errs[0] / errs[1]) == pytest.approx(4.0, abs=0.3)
