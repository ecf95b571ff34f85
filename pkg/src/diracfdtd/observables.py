"""Initial Gaussian packets and expectation values of a spinor field.

Momentum and energy expectations use the same two-sided differences as the
stepper, with the field taken as zero outside the lattice. On that lattice
-i d/dx is Hermitian, so the off-diagonal part of H can be evaluated as
2 Re <upper | sigma.pi | lower>.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .field import NumericalBlowUp, SpinorField, probability_density, total_norm
from .units import UNITS, GridSpec

__all__ = [
    "PacketSpec",
    "PacketSupportError",
    "init_packet",
    "spinor_weights",
    "center_of_probability",
    "velocity_series",
    "expectation_energy",
    "expectation_canonical_momentum",
    "expectation_mechanical_momentum",
    "ObservableRecord",
    "ObservableSeries",
    "ObservableRecorder",
    "finalize_velocities",
    "SUPPORT_WIDTHS",
    "lattice_moments",
]

SUPPORT_WIDTHS = 6.0


class PacketSupportError(ValueError):
    pass


@dataclass(frozen=True)
class PacketSpec:
    width: float
    momentum: tuple = (0.0, 0.0, 0.0)
    center: tuple = (0.0, 0.0, 0.0)
    spin: str = "up"
    mass: float = UNITS.electron_rest_energy

    def __post_init__(self):
        object.__setattr__(self, "momentum", tuple(float(p) for p in self.momentum))
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if not self.width > 0:
            raise ValueError("packet width must be positive")
        if self.spin not in ("up", "down"):
            raise ValueError(f"spin must be 'up' or 'down', got {self.spin!r}")
        if self.mass < 0:
            raise ValueError("mass must be >= 0")

    @property
    def energy(self) -> float:
        return math.sqrt(sum(p * p for p in self.momentum) + self.mass ** 2)

    @staticmethod
    def default_width(momentum, hbar=UNITS.hbar, spread=0.1) -> float:
        """Width whose momentum spread hbar/(2 width) is ``spread`` times |p|."""
        p = math.sqrt(sum(c * c for c in momentum))
        if p == 0:
            raise ValueError("default width needs a nonzero momentum")
        return hbar / (2 * spread * p)


def spinor_weights(spec: PacketSpec) -> np.ndarray:
    """Positive-energy spinor for momentum p with spin along +z or -z, unit length."""
    p1, p2, p3 = spec.momentum
    e, m = spec.energy, spec.mass
    if e + m == 0:
        raise ValueError("massless packet at rest has no spinor")
    if spec.spin == "up":
        u = np.array([1.0, 0.0, p3 / (e + m), (p1 + 1j * p2) / (e + m)], complex)
    else:
        u = np.array([0.0, 1.0, (p1 - 1j * p2) / (e + m), -p3 / (e + m)], complex)
    return u * math.sqrt((e + m) / (2 * e))


def _check_support(grid: GridSpec, spec: PacketSpec):
    reach = SUPPORT_WIDTHS * spec.width
    for ax in grid.spatial_axes():
        lo, hi = grid.extent(ax)
        c = spec.center[ax]
        if c - reach < lo or c + reach > hi:
            raise PacketSupportError(
                f"packet support [{c - reach:.6g}, {c + reach:.6g}] on axis {'xyz'[ax]} "
                f"leaves the grid [{lo:.6g}, {hi:.6g}]")


def init_packet(grid: GridSpec, spec: PacketSpec, potential_energy: float = 0.0,
                hbar: float = UNITS.hbar, check_support: bool = True) -> SpinorField:
    """Gaussian packet with plane-wave phase, normalized to 1 on the lattice.

    Components 3-4 are set at t = 0. Components 1-2 are set half a step
    earlier, at -dt/2, by the phase factor exp(+i E dt / 2 hbar) with
    E = sqrt(p^2 + m^2) + ``potential_energy``, because the stepper
    advances 1-2 first.
    """
    if grid.planar and spec.momentum[1] != 0:
        raise ValueError("planar grids cannot carry momentum along y")
    if check_support:
        _check_support(grid, spec)
    factors = []
    for ax in range(3):
        r = grid.axis(ax) - spec.center[ax]
        if ax not in grid.spatial_axes():
            r = np.zeros_like(r)
        factors.append(np.exp(-r * r / (4 * spec.width ** 2) + 1j * spec.momentum[ax] * r / hbar))
    env = factors[0][:, None, None] * factors[1][None, :, None] * factors[2][None, None, :]
    u = spinor_weights(spec)
    f = SpinorField(grid)
    for c in range(4):
        if u[c] != 0:
            f.psi[c] = u[c] * env
    f.psi /= math.sqrt(total_norm(f))
    e_tot = spec.energy + potential_energy
    f.psi[:2] *= np.exp(0.5j * e_tot * grid.delta_t / hbar)
    return f


# -- reductions ----------------------------------------------------------------

def _norm_or_raise(field: SpinorField) -> float:
    n = total_norm(field)
    if n <= 0:
        raise ZeroDivisionError("field has zero norm")
    return n


def _diff(f: np.ndarray, axis: int) -> np.ndarray:
    """f(+1) - f(-1) along ``axis`` with zero outside the lattice."""
    out = np.zeros_like(f)
    n = f.shape[axis]
    if n == 1:
        return out
    sl = lambda a, b: tuple(slice(a, b) if i == axis else slice(None) for i in range(f.ndim))
    out[sl(1, n - 1)] = f[sl(2, n)] - f[sl(0, n - 2)]
    out[sl(0, 1)] = f[sl(1, 2)]
    out[sl(n - 1, n)] = -f[sl(n - 2, n - 1)]
    return out


def _cdot(a, b) -> complex:
    """sum conj(a) * b with numpy's fixed pairwise order."""
    return complex((np.conj(a) * b).sum())


def center_of_probability(field: SpinorField) -> np.ndarray:
    rho = probability_density(field)
    total = rho.sum()
    if not np.isfinite(total):
        raise NumericalBlowUp("field contains non-finite values")
    if total <= 0:
        raise ZeroDivisionError("field has zero norm")
    g = field.grid
    out = np.empty(3)
    for ax in range(3):
        other = tuple(i for i in range(3) if i != ax)
        marginal = rho.sum(axis=other)
        out[ax] = (marginal * g.axis(ax)).sum() / total
    return out


def velocity_series(times, centers) -> np.ndarray:
    """d<x>/dt by central differences, one-sided at the ends."""
    times = np.asarray(times, float)
    centers = np.asarray(centers, float)
    if len(times) < 2:
        raise ValueError("velocity needs at least 2 records")
    return np.gradient(centers, times, axis=0, edge_order=1)


def expectation_canonical_momentum(field: SpinorField, hbar: float = UNITS.hbar) -> np.ndarray:
    """Re <psi| -i hbar grad |psi> / norm."""
    n = _norm_or_raise(field)
    g = field.grid
    out = np.zeros(3)
    for ax in g.spatial_axes():
        acc = 0j
        for c in range(4):
            acc += _cdot(field.psi[c], _diff(field.psi[c], ax))
        out[ax] = (-1j * hbar * acc / (2 * g.delta)).real * g.cell_volume / n
    return out


def _mean_potential(field: SpinorField, potential):
    """|psi|^2 weighted averages of (A0, Ax, Ay, Az)."""
    rho = probability_density(field).sum(axis=1, keepdims=True)
    total = rho.sum()
    if total <= 0:
        raise ZeroDivisionError("field has zero norm")
    if potential is None:
        return np.zeros(4)
    return np.array([(rho * arr).sum() / total for arr in potential.components()])


def expectation_mechanical_momentum(field: SpinorField, potential=None, cfg=None,
                                    hbar: float = UNITS.hbar) -> np.ndarray:
    """<-i hbar grad> - q <A>."""
    q = -1.0 if cfg is None else cfg.charge
    pc = expectation_canonical_momentum(field, hbar)
    return pc - q * _mean_potential(field, potential)[1:]


def expectation_energy(field: SpinorField, potential=None, cfg=None,
                       hbar: float = UNITS.hbar, c: float = UNITS.c) -> float:
    """Re <psi|H|psi> / norm with lattice derivatives."""
    q = -1.0 if cfg is None else cfg.charge
    m = UNITS.electron_rest_energy if cfg is None else cfg.mass
    n = _norm_or_raise(field)
    g = field.grid
    p1, p2, p3, p4 = field.psi
    a0 = ax = ay = az = 0.0
    if potential is not None:
        a0, ax, ay, az = potential.components()

    rho_u = (p1.real ** 2 + p1.imag ** 2 + p2.real ** 2 + p2.imag ** 2)
    rho_l = (p3.real ** 2 + p3.imag ** 2 + p4.real ** 2 + p4.imag ** 2)
    diag = ((m + q * a0) * rho_u).sum() + ((-m + q * a0) * rho_l).sum()

    k = -1j * hbar / (2 * g.delta)
    # pi_j w = k D_j w - q A_j w
    def pi(w, axis, a):
        out = k * _diff(w, axis) if axis in g.spatial_axes() else np.zeros_like(w)
        if np.any(a):
            out = out - q * a * w
        return out

    off = 0j
    off += _cdot(p1, pi(p3, 2, az))
    off += _cdot(p2, pi(p3, 0, ax)) + 1j * _cdot(p2, pi(p3, 1, ay))
    off += _cdot(p1, pi(p4, 0, ax)) - 1j * _cdot(p1, pi(p4, 1, ay))
    off -= _cdot(p2, pi(p4, 2, az))
    return float((diag + 2 * c * off.real) * g.cell_volume / n)


# -- time series -----------------------------------------------------------------

@dataclass
class ObservableRecord:
    t: float
    norm: float
    center: np.ndarray
    velocity: np.ndarray
    energy: float
    p_mech: np.ndarray
    p_canon: np.ndarray
    mean_a0: float = 0.0
    kinetic_energy: float = float("nan")

    @property
    def velocity_from_momentum(self) -> np.ndarray:
        """p_mech c^2 / (E - q<A0>)."""
        return self.p_mech / self.kinetic_energy


@dataclass
class ObservableSeries:
    records: list = dc_field(default_factory=list)
    failed: bool = False
    failure: str = ""

    def __len__(self):
        return len(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def __iter__(self):
        return iter(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    @property
    def times(self):
        return self.column("t")

    @property
    def centers(self):
        return self.column("center").reshape(-1, 3)

    @property
    def velocities(self):
        return self.column("velocity").reshape(-1, 3)

    @property
    def energies(self):
        return self.column("energy")

    @property
    def norms(self):
        return self.column("norm")

    @property
    def p_mech(self):
        return self.column("p_mech").reshape(-1, 3)

    @property
    def p_canon(self):
        return self.column("p_canon").reshape(-1, 3)

    @property
    def momentum_velocities(self):
        return np.array([r.velocity_from_momentum for r in self.records]).reshape(-1, 3)


class ObservableRecorder:
    """Appends one :class:`ObservableRecord` per call; velocities come later."""

    def __init__(self, potential, cfg, series: ObservableSeries | None = None, units=UNITS):
        self.potential = potential
        self.cfg = cfg
        self.series = series if series is not None else ObservableSeries()
        self.units = units

    def __call__(self, field: SpinorField, step_index: int = 0):
        mo = lattice_moments(field, self.potential, self.cfg, self.units)
        q = self.cfg.charge
        rec = ObservableRecord(t=field.time, norm=mo["norm"], center=mo["center"],
                               velocity=np.full(3, np.nan), energy=mo["energy"], p_mech=mo["p_mech"],
                               p_canon=mo["p_canon"], mean_a0=mo["mean_a0"],
                               kinetic_energy=mo["energy"] - q * mo["mean_a0"])
        self.series.records.append(rec)
        return rec


def finalize_velocities(series: ObservableSeries) -> ObservableSeries:
    """Fill record velocities from the center track (needs >= 2 records)."""
    if len(series) >= 2:
        v = velocity_series(series.times, series.centers)
        for r, vi in zip(series.records, v):
            r.velocity = vi
    return series


def lattice_moments(field: SpinorField, potential=None, cfg=None, units=UNITS) -> dict:
    """All recorded observables from one compiled pass over the field.

    Same definitions as the standalone functions above; the sums are taken
    per x-row and then added in row order.
    """
    from . import kernels as K

    g = field.grid
    q = -1.0 if cfg is None else cfg.charge
    m = units.electron_rest_energy if cfg is None else cfg.mass
    hk = units.hbar / (2 * g.delta)
    if potential is not None:
        a0, ax, ay, az = potential.components()
        has = True
    else:
        a0 = ax = ay = az = K.dummy_real()
        has = False
    rows = K.moments(field.psi, a0, ax, ay, az, has, q, hk)
    tot = rows.sum(axis=0)
    rho_rows = rows[:, K.M_RHO_U] + rows[:, K.M_RHO_L]
    s = tot[K.M_RHO_U] + tot[K.M_RHO_L]
    if not np.isfinite(s):
        raise NumericalBlowUp("field contains non-finite values")
    if s <= 0:
        raise ZeroDivisionError("field has zero norm")
    center = np.array([
        (rho_rows * g.axis(0)).sum() / s,
        g.origin[1] + g.delta * tot[K.M_J] / s,
        g.origin[2] + g.delta * tot[K.M_K] / s,
    ])
    pc = hk * tot[K.M_PC:K.M_PC + 3] / s
    mean_a = tot[K.M_A:K.M_A + 4] / s
    energy = (m * (tot[K.M_RHO_U] - tot[K.M_RHO_L]) + q * tot[K.M_A]
              + 2 * units.c * tot[K.M_OFF_RE]) / s
    return {
        "norm": s * g.cell_volume,
        "center": center,
        "p_canon": pc,
        "p_mech": pc - q * mean_a[1:],
        "energy": float(energy),
        "mean_a0": float(mean_a[0]),
    }
