"""Analytic four-potentials and their lattice samples.

Every evaluator works on broadcastable numpy arrays of positions in nm and
returns potentials per unit elementary charge in internal units: ``a0`` in MV
and ``a_vec`` components in MeV/c. All configurations are static and
invariant along y.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .units import UNITS, GridSpec

__all__ = [
    "FourPotential",
    "SampledPotential",
    "SingularPotentialError",
    "DipoleLineSpec",
    "SolenoidPairSpec",
    "zero_potential",
    "uniform_b_symmetric",
    "uniform_b_landau_x",
    "uniform_b_landau_z",
    "uniform_b",
    "dipole_lines",
    "solenoid_single",
    "solenoid_pair",
    "sample_on_grid",
    "from_descriptor",
]


class SingularPotentialError(ValueError):
    """Evaluation requested on a singular line of the potential."""


@dataclass(frozen=True)
class FourPotential:
    """Scalar and vector potential evaluators plus a descriptor of the configuration.

    ``_fields(x, y, z, t)`` returns ``(a0, ax, ay, az, singular)`` arrays
    broadcast to a common shape; ``singular`` marks points where the analytic
    expression diverges (those carry 0 instead of Inf).
    """

    descriptor: dict
    _fields: Callable = field(repr=False, compare=False)
    has_scalar: bool = True
    has_vector: bool = True
    singular_lines: tuple = ()  # (x, z) positions of lines parallel to y

    def fields(self, x, y, z, t=0.0):
        return self._fields(np.asarray(x, float), np.asarray(y, float), np.asarray(z, float), t)

    def a0(self, position, t=0.0) -> float:
        x, y, z = position
        a0, _, _, _, sing = self.fields(x, y, z, t)
        if np.any(sing):
            raise SingularPotentialError(f"scalar potential is singular at {tuple(position)}")
        return float(a0)

    def a_vec(self, position, t=0.0) -> np.ndarray:
        x, y, z = position
        _, ax, ay, az, sing = self.fields(x, y, z, t)
        if np.any(sing):
            raise SingularPotentialError(f"vector potential is singular at {tuple(position)}")
        return np.array([float(ax), float(ay), float(az)])

    def __call__(self, position, t=0.0):
        return self.a0(position, t), self.a_vec(position, t)

    def __neg__(self):
        def neg(x, y, z, t):
            a0, ax, ay, az, s = self._fields(x, y, z, t)
            return -a0, -ax, -ay, -az, s
        return FourPotential({"kind": "negated", "of": self.descriptor}, neg,
                             self.has_scalar, self.has_vector, self.singular_lines)


def _zeros_like(*arrays):
    shape = np.broadcast_shapes(*(np.shape(a) for a in arrays))
    return np.zeros(shape)


def zero_potential() -> FourPotential:
    def f(x, y, z, t):
        zero = _zeros_like(x, y, z)
        return zero, zero, zero.copy(), zero.copy(), np.zeros(zero.shape, bool)
    return FourPotential({"kind": "none"}, f, has_scalar=False, has_vector=False)


# -- uniform magnetic field along +y ----------------------------------------

def _uniform(b0_tesla, gauge, cx, cz):
    b = float(UNITS.tesla_to_internal(b0_tesla))

    def f(x, y, z, t):
        zero = _zeros_like(x, y, z)
        xr = x - cx + zero
        zr = z - cz + zero
        if gauge == "symmetric":
            ax, az = 0.5 * b * zr, -0.5 * b * xr
        elif gauge == "landau_x":
            ax, az = b * zr, zero.copy()
        else:
            ax, az = zero.copy(), -b * xr
        return zero.copy(), ax, zero.copy(), az, np.zeros(zero.shape, bool)

    desc = {"kind": "uniform_b", "b_tesla": float(b0_tesla), "gauge": gauge,
            "center_x_nm": float(cx), "center_z_nm": float(cz)}
    return FourPotential(desc, f, has_scalar=False, has_vector=True)


def uniform_b_symmetric(b0_tesla: float, center=(0.0, 0.0)) -> FourPotential:
    """A = (B0/2)(z, 0, -x): rotationally invariant gauge for B = (0, B0, 0)."""
    return _uniform(b0_tesla, "symmetric", *center)


def uniform_b_landau_x(b0_tesla: float, center=(0.0, 0.0)) -> FourPotential:
    """A = B0 (z, 0, 0)."""
    return _uniform(b0_tesla, "landau_x", *center)


def uniform_b_landau_z(b0_tesla: float, center=(0.0, 0.0)) -> FourPotential:
    """A = B0 (0, 0, -x)."""
    return _uniform(b0_tesla, "landau_z", *center)


def uniform_b(b0_tesla: float, gauge: str = "symmetric", center=(0.0, 0.0)) -> FourPotential:
    if gauge not in ("symmetric", "landau_x", "landau_z"):
        raise ValueError(f"unknown gauge {gauge!r}")
    return _uniform(b0_tesla, gauge, *center)


# -- two lines of electric dipoles ------------------------------------------

@dataclass(frozen=True)
class DipoleLineSpec:
    """Two infinite dipole lines parallel to y through (x=0, z=+-a).

    ``line_density`` is in C m / m (SI); ``half_separation`` in nm.
    """

    line_density: float
    half_separation: float
    orientation: str = "parallel"
    sign: int = 1

    def __post_init__(self):
        if not math.isfinite(self.line_density):
            raise ValueError("line_density must be finite")
        if not self.half_separation > 0:
            raise ValueError("half_separation must be positive")
        if self.orientation not in ("parallel", "perpendicular"):
            raise ValueError(f"orientation must be parallel or perpendicular, got {self.orientation!r}")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")

    @property
    def strength(self) -> float:
        """sign * wp / (2 pi eps0) in MV nm."""
        return self.sign * float(UNITS.dipole_density_to_internal(self.line_density)) / (2 * math.pi)

    def a0_midline(self, x):
        """A0 on z = 0 (MV)."""
        a, k = self.half_separation, self.strength
        x = np.asarray(x, float)
        if self.orientation == "parallel":
            return k * 2 * x / (x * x + a * a)
        return -k * 2 * a / (x * x + a * a)

    def da0_dx_midline(self, x):
        """dA0/dx on z = 0 (MV/nm)."""
        a, k = self.half_separation, self.strength
        x = np.asarray(x, float)
        d = x * x + a * a
        if self.orientation == "parallel":
            return 2 * k / d * (1 - 2 * x * x / d)
        return 2 * k * 2 * a * x / (d * d)


def dipole_lines(spec: DipoleLineSpec) -> FourPotential:
    """Scalar potential of two dipole lines; A = 0.

    parallel:      A0 = +-wp/(2 pi eps0) [x/(x^2+(z-a)^2) + x/(x^2+(z+a)^2)]
    perpendicular: A0 = +-wp/(2 pi eps0) [(z-a)/(x^2+(z-a)^2) - (z+a)/(x^2+(z+a)^2)]
    """
    a, k = spec.half_separation, spec.strength
    parallel = spec.orientation == "parallel"

    def f(x, y, z, t):
        zero = _zeros_like(x, y, z)
        x = x + zero
        z = z + zero
        d1 = x * x + (z - a) ** 2
        d2 = x * x + (z + a) ** 2
        sing = (d1 == 0) | (d2 == 0)
        d1 = np.where(d1 == 0, 1.0, d1)
        d2 = np.where(d2 == 0, 1.0, d2)
        if parallel:
            a0 = k * (x / d1 + x / d2)
        else:
            a0 = k * ((z - a) / d1 - (z + a) / d2)
        a0 = np.where(sing, 0.0, a0)
        return a0, zero.copy(), zero.copy(), zero.copy(), sing

    desc = {"kind": "dipole_lines", **asdict(spec)}
    return FourPotential(desc, f, has_scalar=True, has_vector=False,
                         singular_lines=((0.0, a), (0.0, -a)))


# -- solenoids along y -------------------------------------------------------

@dataclass(frozen=True)
class SolenoidPairSpec:
    """Two opposite infinite solenoids along y at (x=0, z=+-a).

    ``flux`` (Wb, signed) is carried by the solenoid at z = +a along +y; the
    one at z = -a carries the opposite flux. ``radius`` R0 in nm, ``None``
    selects a/5.
    """

    flux: float
    half_separation: float
    radius: float | None = None

    def __post_init__(self):
        if not math.isfinite(self.flux):
            raise ValueError("flux must be finite")
        if self.radius is None:
            object.__setattr__(self, "radius", self.half_separation / 5)
        if not self.half_separation > self.radius >= 0:
            raise ValueError("need half_separation > radius >= 0")

    @property
    def flux_internal(self) -> float:
        return float(UNITS.weber_to_internal(self.flux))

    def ax_midline(self, x):
        """A_x on z = 0: -flux * a / (pi (x^2 + a^2)) (MeV/c per e)."""
        a = self.half_separation
        x = np.asarray(x, float)
        return -self.flux_internal * a / (math.pi * (x * x + a * a))

    def dax_dx_midline(self, x):
        a = self.half_separation
        x = np.asarray(x, float)
        return 2 * self.flux_internal * a * x / (math.pi * (x * x + a * a) ** 2)


def _solenoid_fields(flux_int, radius, cx, cz, x, z):
    xr = x - cx
    zr = z - cz
    r2 = xr * xr + zr * zr
    inside = r2 <= radius * radius
    denom = np.where(inside, radius * radius, r2)
    # r = 0 with R0 = 0 is the only genuine singularity
    sing = denom == 0
    denom = np.where(sing, 1.0, denom)
    coef = flux_int / (2 * math.pi * denom)
    ax = np.where(sing, 0.0, coef * zr)
    az = np.where(sing, 0.0, -coef * xr)
    return ax, az, sing


def solenoid_single(flux_wb: float, radius: float, center=(0.0, 0.0)) -> FourPotential:
    """Infinite solenoid along y centred at (x, z) = ``center``.

    A = flux/(2 pi R0^2) (z, 0, -x) inside, flux/(2 pi r^2) (z, 0, -x) outside,
    with coordinates relative to the centre.
    """
    if radius < 0:
        raise ValueError("radius must be >= 0")
    flux_int = float(UNITS.weber_to_internal(flux_wb))
    cx, cz = center

    def f(x, y, z, t):
        zero = _zeros_like(x, y, z)
        ax, az, sing = _solenoid_fields(flux_int, radius, cx, cz, x + zero, z + zero)
        return zero, ax, zero.copy(), az, sing

    desc = {"kind": "solenoid_single", "flux": float(flux_wb), "radius": float(radius),
            "center_x_nm": float(cx), "center_z_nm": float(cz)}
    return FourPotential(desc, f, has_scalar=False, has_vector=True)


def solenoid_pair(spec: SolenoidPairSpec) -> FourPotential:
    """Superposition of +flux at z = +a and -flux at z = -a.

    Outside both windings this is exactly the closed two-solenoid expression;
    inside one winding its interior branch adds to the exterior branch of the
    other.
    """
    a, r0, flux_int = spec.half_separation, spec.radius, spec.flux_internal

    def f(x, y, z, t):
        zero = _zeros_like(x, y, z)
        x = x + zero
        z = z + zero
        ax1, az1, s1 = _solenoid_fields(flux_int, r0, 0.0, a, x, z)
        ax2, az2, s2 = _solenoid_fields(-flux_int, r0, 0.0, -a, x, z)
        return zero, ax1 + ax2, zero.copy(), az1 + az2, s1 | s2

    desc = {"kind": "solenoid_pair", **asdict(spec)}
    return FourPotential(desc, f, has_scalar=False, has_vector=True)


# -- lattice samples ---------------------------------------------------------

@dataclass
class SampledPotential:
    """Potential sampled at cell positions.

    Arrays have shape (n_x, 1, n_z): every supported configuration is
    y-invariant, so the y axis is stored once and broadcast.
    """

    grid: GridSpec
    a0: np.ndarray
    ax: np.ndarray
    ay: np.ndarray
    az: np.ndarray
    singular: np.ndarray
    descriptor: dict
    has_scalar: bool = True
    has_vector: bool = True

    @property
    def n_singular(self) -> int:
        return int(self.singular.sum())

    @property
    def warning_count(self) -> int:
        return self.n_singular

    def components(self):
        return self.a0, self.ax, self.ay, self.az

    def full(self, name: str) -> np.ndarray:
        """Broadcast one component to the full grid shape (a view)."""
        return np.broadcast_to(getattr(self, name), self.grid.shape)


def _singular_columns(grid: GridSpec, lines) -> np.ndarray:
    """Cells whose half-open (x, z) box contains a singular line."""
    x, _, z = grid.axes()
    h = grid.delta / 2
    mask = np.zeros((grid.n_x, 1, grid.n_z), bool)
    for lx, lz in lines:
        ix = (x - h <= lx) & (lx < x + h)
        iz = (z - h <= lz) & (lz < z + h)
        mask[:, 0, :] |= ix[:, None] & iz[None, :]
    return mask


def sample_on_grid(pot: FourPotential, grid: GridSpec, t: float = 0.0) -> SampledPotential:
    """Evaluate ``pot`` at every cell; singular cells are zeroed and flagged."""
    x, _, z = grid.axes()
    y0 = grid.origin[1]
    a0, ax, ay, az, sing = pot.fields(x[:, None, None], np.array([[[y0]]]), z[None, None, :], t)
    shape = (grid.n_x, 1, grid.n_z)
    arrays = [np.array(np.broadcast_to(v, shape), dtype=float, order="C") for v in (a0, ax, ay, az)]
    sing = np.broadcast_to(sing, shape).copy()
    if pot.singular_lines:
        sing |= _singular_columns(grid, pot.singular_lines)
    for arr in arrays:
        arr[sing] = 0.0
    return SampledPotential(grid, *arrays, singular=sing, descriptor=dict(pot.descriptor),
                            has_scalar=pot.has_scalar, has_vector=pot.has_vector)


def from_descriptor(desc: dict) -> FourPotential:
    """Rebuild a potential from its descriptor record."""
    kind = desc.get("kind", "none")
    if kind == "none":
        return zero_potential()
    if kind == "uniform_b":
        return uniform_b(desc["b_tesla"], desc.get("gauge", "symmetric"),
                         (desc.get("center_x_nm", 0.0), desc.get("center_z_nm", 0.0)))
    if kind == "dipole_lines":
        return dipole_lines(DipoleLineSpec(desc["line_density"], desc["half_separation"],
                                           desc.get("orientation", "parallel"), int(desc.get("sign", 1))))
    if kind == "solenoid_pair":
        return solenoid_pair(SolenoidPairSpec(desc["flux"], desc["half_separation"], desc.get("radius")))
    if kind == "solenoid_single":
        return solenoid_single(desc["flux"], desc["radius"],
                               (desc.get("center_x_nm", 0.0), desc.get("center_z_nm", 0.0)))
    raise ValueError(f"unknown potential kind {kind!r}")
