"""Four-component spinor storage on the lattice plus elementary reductions.

The four components live in one complex128 array of shape (4, n_x, n_y, n_z)
in C order, so k (z) varies fastest, then j, then i. Components 1-2 and 3-4
are staggered by half a time step (leapfrog); reductions use them as stored.

All reductions go through numpy's pairwise summation on C-ordered arrays,
which fixes the reduction order and makes results bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .units import GridSpec

__all__ = ["SpinorField", "Stagger", "NumericalBlowUp", "total_norm", "probability_density",
           "probability_density_slice"]

_AXES = {"x": 0, "y": 1, "z": 2, 0: 0, 1: 1, 2: 2}


class NumericalBlowUp(FloatingPointError):
    """The field contains NaN or Inf."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


@dataclass
class Stagger:
    time_of_12: float
    time_of_34: float


class SpinorField:
    """Dirac spinor on a :class:`GridSpec`.

    ``psi`` has shape (4, n_x, n_y, n_z); ``psi1``..``psi4`` are views into it.
    """

    def __init__(self, grid: GridSpec, psi=None, stagger: Stagger | None = None):
        self.grid = grid
        shape = (4,) + grid.shape
        if psi is None:
            psi = np.zeros(shape, dtype=np.complex128)
        else:
            psi = np.ascontiguousarray(psi, dtype=np.complex128)
            if psi.shape != shape:
                raise ValueError(f"psi has shape {psi.shape}, expected {shape}")
        self.psi = psi
        self.stagger = stagger or Stagger(time_of_12=-grid.delta_t / 2, time_of_34=0.0)
        self.step_count = 0

    psi1 = property(lambda self: self.psi[0])
    psi2 = property(lambda self: self.psi[1])
    psi3 = property(lambda self: self.psi[2])
    psi4 = property(lambda self: self.psi[3])

    @property
    def time(self) -> float:
        """Time of the integer-level components (3-4)."""
        return self.stagger.time_of_34

    def copy(self) -> "SpinorField":
        out = SpinorField(self.grid, self.psi.copy(),
                          Stagger(self.stagger.time_of_12, self.stagger.time_of_34))
        out.step_count = self.step_count
        return out

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.psi.view(np.float64)).all())

    def __repr__(self):
        return (f"SpinorField(shape={self.grid.shape}, t34={self.stagger.time_of_34:.6g}, "
                f"t12={self.stagger.time_of_12:.6g})")


def probability_density(field: SpinorField) -> np.ndarray:
    """Per-cell |psi|^2 summed over components, shape (n_x, n_y, n_z)."""
    v = field.psi.view(np.float64)  # interleaved re/im along the last axis
    sq = v * v
    return sq.reshape((4,) + field.grid.shape + (2,)).sum(axis=(0, 4))


def total_norm(field: SpinorField) -> float:
    """Discrete norm sum |psi|^2 * delta^3.

    The half-step skew between the component pairs is ignored; it is an
    O(delta_t) co-location error.
    """
    n = float(probability_density(field).sum()) * field.grid.cell_volume
    if not np.isfinite(n):
        raise NumericalBlowUp("field contains non-finite values")
    return n


def probability_density_slice(field: SpinorField, axis, index: int) -> np.ndarray:
    """|psi|^2 on the plane ``axis == index``.

    ``axis`` is 'x', 'y', 'z' or 0..2. The plane of classical motion in the
    preset catalog is the x-z plane, i.e. ``axis='y'``; the result then has
    shape (n_x, n_z) with rows along x.
    """
    try:
        ax = _AXES[axis]
    except KeyError:
        raise ValueError(f"unknown axis {axis!r}") from None
    n = field.grid.shape[ax]
    if not 0 <= index < n:
        raise IndexError(f"plane index {index} outside [0, {n}) on axis {ax}")
    sl = [slice(None)] * 3
    sl[ax] = index
    comp = field.psi[(slice(None),) + tuple(sl)]
    return (comp.real ** 2 + comp.imag ** 2).sum(axis=0)
