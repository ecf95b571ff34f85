"""Unit system, lattice geometry and the time-step stability contract.

Internal units: energies in MeV, lengths in nm, times in nm/c (so c = 1),
momenta in MeV/c and charges in multiples of the elementary charge.
Potentials are stored per unit elementary charge: the vector potential in
MeV/c (so ``q*A`` is a momentum) and the scalar potential in MV (so ``q*A0``
is an energy in MeV).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.constants as sc

__all__ = [
    "UnitSystem",
    "UNITS",
    "GridSpec",
    "cfl_limit",
    "index_to_position",
    "MAX_CFL_SAFETY",
]

# leapfrog + Crank-Nicolson stability: c*dt/delta <= 2/sqrt(d); with the
# sqrt(3)-based limit below this is a safety factor of exactly 2 in 3D.
MAX_CFL_SAFETY = 2.0


@dataclass(frozen=True)
class UnitSystem:
    """Physical constants expressed in the internal MeV / nm / (nm/c) system."""

    hbar: float = sc.hbar * sc.c / sc.e * 1e3  # MeV nm  (hbar*c with c = 1)
    c: float = 1.0
    electron_rest_energy: float = sc.physical_constants[
        "electron mass energy equivalent in MeV"][0]
    elementary_charge_magnitude: float = 1.0

    # -- SI <-> internal -------------------------------------------------
    @staticmethod
    def tesla_to_internal(b_tesla):
        """Magnetic field in T -> MeV/(c nm) per unit charge."""
        return np.asarray(b_tesla) * sc.c * 1e-15

    @staticmethod
    def internal_to_tesla(b):
        return np.asarray(b) / (sc.c * 1e-15)

    @staticmethod
    def weber_to_internal(flux_wb):
        """Magnetic flux in Wb -> MeV nm / c per unit charge."""
        return np.asarray(flux_wb) * sc.c * 1e3

    @staticmethod
    def internal_to_weber(flux):
        return np.asarray(flux) / (sc.c * 1e3)

    @staticmethod
    def tesla_metre_to_internal(a_tm):
        """Vector potential in T m (= Wb/m) -> MeV/c per unit charge."""
        return np.asarray(a_tm) * sc.c * 1e-6

    @staticmethod
    def internal_to_tesla_metre(a):
        return np.asarray(a) / (sc.c * 1e-6)

    @staticmethod
    def volt_to_internal(v):
        return np.asarray(v) * 1e-6

    @staticmethod
    def internal_to_volt(a0):
        return np.asarray(a0) * 1e6

    @staticmethod
    def dipole_density_to_internal(p_cm_per_m):
        """Dipole line density (C m / m) -> wp/eps0 in MV nm."""
        return np.asarray(p_cm_per_m) / sc.epsilon_0 * 1e3

    @staticmethod
    def internal_to_dipole_density(k):
        return np.asarray(k) * sc.epsilon_0 * 1e-3

    @staticmethod
    def metre_to_nm(x):
        return np.asarray(x) * 1e9

    @staticmethod
    def nm_to_metre(x):
        return np.asarray(x) * 1e-9

    @staticmethod
    def second_to_internal(t):
        return np.asarray(t) * sc.c * 1e9

    @staticmethod
    def internal_to_second(t):
        return np.asarray(t) / (sc.c * 1e9)

    @staticmethod
    def momentum_si_to_internal(p):
        """kg m/s -> MeV/c."""
        return np.asarray(p) * sc.c / sc.e * 1e-6

    @staticmethod
    def internal_to_momentum_si(p):
        return np.asarray(p) / (sc.c / sc.e * 1e-6)


UNITS = UnitSystem()


def cfl_limit(delta: float, safety: float = 0.5, c: float = 1.0) -> float:
    """Largest admissible time step for lattice spacing ``delta``.

    Returns ``safety * delta / (c * sqrt(3))``. The scheme itself is stable up
    to ``safety = 2`` (see :data:`MAX_CFL_SAFETY`); 0.5 leaves room for the
    norm-drift budget.
    """
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    return safety * delta / (c * math.sqrt(3.0))


@dataclass(frozen=True)
class GridSpec:
    """Uniform cubic-cell lattice.

    ``n_y == 1`` selects planar mode: the field is taken uniform along y and
    the y-derivatives vanish. Every configuration in the preset catalog is
    y-invariant, so planar runs capture the x-z dynamics at a fraction of the
    cost. All other counts must be at least 3.
    """

    n_x: int
    n_y: int
    n_z: int
    delta: float
    delta_t: float
    origin: tuple = (0.0, 0.0, 0.0)
    cfl_safety: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))
        if len(self.origin) != 3:
            raise ValueError("origin must have three components")
        for name in ("n_x", "n_z"):
            if int(getattr(self, name)) < 3:
                raise ValueError(f"{name} must be >= 3 (central differences need two neighbours)")
        if not (self.n_y == 1 or self.n_y >= 3):
            raise ValueError("n_y must be 1 (planar mode) or >= 3")
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if not self.delta_t > 0:
            raise ValueError(f"delta_t must be positive, got {self.delta_t}")
        if not 0 < self.cfl_safety < MAX_CFL_SAFETY:
            raise ValueError(f"cfl_safety must lie in (0, {MAX_CFL_SAFETY})")
        limit = cfl_limit(self.delta, self.cfl_safety)
        if self.delta_t > limit * (1 + 1e-12):
            raise ValueError(
                f"delta_t={self.delta_t:.6g} exceeds the CFL limit {limit:.6g} "
                f"(safety {self.cfl_safety})")

    @classmethod
    def with_cfl(cls, n_x, n_y, n_z, delta, origin=(0.0, 0.0, 0.0), cfl_safety=0.5):
        """Grid whose time step sits exactly at the CFL limit."""
        return cls(n_x, n_y, n_z, delta, cfl_limit(delta, cfl_safety), origin, cfl_safety)

    @classmethod
    def centered(cls, n_x, n_y, n_z, delta, center=(0.0, 0.0, 0.0), cfl_safety=0.5):
        """Grid at the CFL limit whose middle cell sits at ``center``."""
        origin = tuple(c - delta * (n - 1) / 2 for c, n in zip(center, (n_x, n_y, n_z)))
        if n_y == 1:
            origin = (origin[0], center[1], origin[2])
        return cls.with_cfl(n_x, n_y, n_z, delta, origin, cfl_safety)

    @property
    def shape(self) -> tuple:
        return (self.n_x, self.n_y, self.n_z)

    @property
    def planar(self) -> bool:
        return self.n_y == 1

    @property
    def cell_volume(self) -> float:
        return self.delta ** 3

    def axis(self, which: int) -> np.ndarray:
        """1D coordinates along axis 0 (x), 1 (y) or 2 (z)."""
        n = self.shape[which]
        return self.origin[which] + self.delta * np.arange(n, dtype=float)

    def axes(self):
        return self.axis(0), self.axis(1), self.axis(2)

    def mesh(self):
        """Broadcastable coordinate arrays of shapes (nx,1,1), (1,ny,1), (1,1,nz)."""
        x, y, z = self.axes()
        return x[:, None, None], y[None, :, None], z[None, None, :]

    def extent(self, which: int) -> tuple:
        a = self.axis(which)
        return float(a[0]), float(a[-1])

    def spatial_axes(self) -> tuple:
        """Indices of the axes that carry a real lattice (y is skipped in planar mode)."""
        return (0, 2) if self.planar else (0, 1, 2)


def index_to_position(grid: GridSpec, i: int, j: int, k: int) -> np.ndarray:
    """Physical position of lattice index (i, j, k); i->x, j->y, k->z."""
    for idx, n, name in zip((i, j, k), grid.shape, "ijk"):
        if not 0 <= idx < n:
            raise IndexError(f"index {name}={idx} outside [0, {n})")
    return np.asarray(grid.origin) + grid.delta * np.array([i, j, k], dtype=float)
