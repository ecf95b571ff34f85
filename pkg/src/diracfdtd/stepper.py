"""Leapfrog FDTD stepper for the Dirac equation with minimal coupling.

H = c alpha.(p - qA) + beta mc^2 + q A0 in the Dirac representation. One
full step first advances components 1-2 from t-dt/2 to t+dt/2 using 3-4 at t,
then advances 3-4 from t to t+dt using the new 1-2. The diagonal
(mass + q A0) term is averaged over the two time levels, which gives the
rational factor (2 - C)/C with C = 1 + i dt/(2 hbar) (+-mc^2 + q A0).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from . import kernels
from .field import NumericalBlowUp, SpinorField
from .potentials import FourPotential, sample_on_grid, zero_potential
from .units import UNITS, GridSpec

__all__ = ["StepperConfig", "Stepper", "Observer", "MovingWindow", "step", "run", "damping_mask"]


@dataclass(frozen=True)
class StepperConfig:
    """Particle and boundary parameters.

    ``charge`` is the signed charge in units of e (-1 electron, +1 positron);
    a positron is modelled by flipping this sign, not by charge-conjugating
    the spinor. ``mass`` is the rest energy in MeV.
    """

    charge: float = -1.0
    mass: float = UNITS.electron_rest_energy
    boundary: str = "reflecting"
    damping_width: int = 0
    damping_strength: float = 0.0

    def __post_init__(self):
        if self.mass < 0:
            raise ValueError("mass must be >= 0")
        if self.boundary not in ("reflecting", "damping"):
            raise ValueError(f"unknown boundary {self.boundary!r}")
        if self.boundary == "damping":
            if self.damping_width < 1:
                raise ValueError("damping layer needs width >= 1 cell")
            if not 0 < self.damping_strength <= 1:
                raise ValueError("damping_strength must lie in (0, 1]")

    def validate_for(self, grid: GridSpec):
        if self.boundary == "damping":
            dims = [grid.shape[a] for a in grid.spatial_axes()]
            if not self.damping_width < min(dims) / 4:
                raise ValueError(
                    f"damping width {self.damping_width} must be < min grid dimension / 4 ({min(dims) / 4})")


def damping_mask(grid: GridSpec, width: int, strength: float) -> np.ndarray:
    """Multiplicative cosine-ramp mask: 1 - strength at the wall, 1 beyond ``width`` cells."""
    mask = np.ones(grid.shape)
    for ax in grid.spatial_axes():
        n = grid.shape[ax]
        d = np.minimum(np.arange(n), np.arange(n)[::-1]).astype(float)
        ramp = np.where(d < width, 1 - strength * 0.5 * (1 + np.cos(np.pi * d / width)), 1.0)
        shape = [1, 1, 1]
        shape[ax] = n
        mask = mask * ramp.reshape(shape)
    return mask


class Stepper:
    """Pre-computed update coefficients for one grid, potential and particle."""

    def __init__(self, grid: GridSpec, potential=None, cfg: StepperConfig | None = None, units=UNITS):
        cfg = cfg or StepperConfig()
        cfg.validate_for(grid)
        if potential is None:
            potential = zero_potential()
        if isinstance(potential, FourPotential):
            potential = sample_on_grid(potential, grid)
        if potential.grid.shape != grid.shape:
            raise ValueError("sampled potential does not match the grid")
        self.grid = grid
        self.potential = potential
        self.cfg = cfg
        self.units = units

        tau = grid.delta_t / units.hbar
        q = cfg.charge
        self.kd = units.c * grid.delta_t / (2 * grid.delta)
        self.diag_uniform = not (potential.has_scalar and np.any(potential.a0 != 0))
        if self.diag_uniform:
            qa0 = np.zeros((1, 1, 1))
        else:
            qa0 = q * potential.a0
        self.ru_u, self.cu_u = self._diag(cfg.mass + qa0, tau)
        self.ru_l, self.cu_l = self._diag(-cfg.mass + qa0, tau)

        self.has_vec = bool(potential.has_vector and (np.any(potential.ax != 0) or np.any(potential.ay != 0)
                                                      or np.any(potential.az != 0)))
        if self.has_vec:
            s = tau * q
            self.am = np.ascontiguousarray(s * (potential.ax - 1j * potential.ay))
            self.ap = np.ascontiguousarray(s * (potential.ax + 1j * potential.ay))
            self.a3 = np.ascontiguousarray(s * potential.az)
        else:
            self.am = kernels.dummy_complex()
            self.ap = kernels.dummy_complex()
            self.a3 = kernels.dummy_real()

        self.mask = None
        if cfg.boundary == "damping":
            self.mask = damping_mask(grid, cfg.damping_width, cfg.damping_strength)

    @staticmethod
    def _diag(energy, tau):
        c = 1 + 0.5j * tau * np.asarray(energy, float)
        return np.ascontiguousarray((2 - c) / c), np.ascontiguousarray(1 / c)

    def step(self, field: SpinorField) -> None:
        """Advance ``field`` by one full time step in place."""
        if field.grid.shape != self.grid.shape:
            raise ValueError("field does not match the stepper grid")
        psi = field.psi
        dt = self.grid.delta_t
        bad = kernels.half_update(psi[0], psi[1], psi[2], psi[3], self.ru_u, self.cu_u,
                                  self.am, self.ap, self.a3, self.kd, self.diag_uniform, self.has_vec)
        field.stagger.time_of_12 += dt
        bad += kernels.half_update(psi[2], psi[3], psi[0], psi[1], self.ru_l, self.cu_l,
                                   self.am, self.ap, self.a3, self.kd, self.diag_uniform, self.has_vec)
        field.stagger.time_of_34 += dt
        if self.mask is not None:
            kernels.apply_mask(psi, self.mask)
        field.step_count += 1
        if bad:
            raise NumericalBlowUp(f"non-finite field values after step {field.step_count}",
                                  step=field.step_count)


def step(field: SpinorField, potential=None, cfg: StepperConfig | None = None) -> None:
    """Advance ``field`` by one time step (builds the coefficients each call)."""
    Stepper(field.grid, potential, cfg).step(field)


@dataclass
class Observer:
    """Read-only callback invoked every ``stride`` steps (including step 0)."""

    stride: int
    fn: Callable

    def __call__(self, field, step_index):
        return self.fn(field, step_index)


@dataclass
class MovingWindow:
    """Re-centre the lattice on the packet along one axis.

    Every ``check_every`` steps, if the center of probability sits
    ``threshold`` or more cells away from the middle of the grid, the field
    is shifted by whole cells (zero fill), the grid origin moves with it and
    the potential is re-sampled from its analytic form.
    """

    potential: FourPotential
    axis: int = 0
    check_every: int = 20
    threshold: int = 8
    shifts: int = 0

    def maybe_shift(self, field: SpinorField, stepper: "Stepper") -> "Stepper":
        g = field.grid
        ax = self.axis
        if ax == 0:
            marginal = kernels.row_density(field.psi)
        else:
            other = tuple(i for i in range(3) if i != ax)
            marginal = np.sum(np.abs(field.psi) ** 2, axis=0).sum(axis=other)
        total = marginal.sum()
        if not total > 0:
            return stepper
        center = float((marginal * np.arange(g.shape[ax])).sum() / total)
        n = int(round(center - (g.shape[ax] - 1) / 2))
        if abs(n) < self.threshold:
            return stepper
        psi = field.psi
        src = [slice(None)] * 4
        dst = [slice(None)] * 4
        fill = [slice(None)] * 4
        if n > 0:
            src[ax + 1], dst[ax + 1], fill[ax + 1] = slice(n, None), slice(None, -n), slice(-n, None)
        else:
            src[ax + 1], dst[ax + 1], fill[ax + 1] = slice(None, n), slice(-n, None), slice(None, -n)
        psi[tuple(dst)] = psi[tuple(src)]
        psi[tuple(fill)] = 0
        shell = [slice(None)] * 4
        for idx in (0, -1):
            shell[ax + 1] = idx
            psi[tuple(shell)] = 0
        origin = list(g.origin)
        origin[ax] += n * g.delta
        new_grid = GridSpec(g.n_x, g.n_y, g.n_z, g.delta, g.delta_t, tuple(origin), g.cfl_safety)
        field.grid = new_grid
        self.shifts += 1
        return Stepper(new_grid, sample_on_grid(self.potential, new_grid), stepper.cfg, stepper.units)


def _due(stride, i, n_steps):
    return stride > 0 and (i % stride == 0 or i == n_steps)


def run(field: SpinorField, potential=None, cfg: StepperConfig | None = None, n_steps: int = 0,
        observers: Iterable = (), record_every: int = 1, stepper: Stepper | None = None,
        raise_on_blowup: bool = False, window: MovingWindow | None = None):
    """Step ``n_steps`` times, recording observables every ``record_every`` steps.

    Returns an :class:`~diracfdtd.observables.ObservableSeries`. On numerical
    blow-up the partial series is returned with ``failed`` set, unless
    ``raise_on_blowup``. With a ``window`` the lattice follows the packet.
    """
    from .observables import ObservableRecorder, ObservableSeries, finalize_velocities

    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    stepper = stepper or Stepper(field.grid, potential, cfg)
    series = ObservableSeries()
    if n_steps == 0:
        return series
    recorder = ObservableRecorder(stepper.potential, stepper.cfg, series, stepper.units)
    observers = list(observers)

    def observe(i):
        if _due(record_every, i, n_steps):
            recorder(field, i)
        for ob in observers:
            if _due(ob.stride, i, n_steps):
                ob(field, i)

    observe(0)
    for i in range(1, n_steps + 1):
        try:
            stepper.step(field)
            if window is not None and i % window.check_every == 0:
                new = window.maybe_shift(field, stepper)
                if new is not stepper:
                    stepper = new
                    recorder.potential = stepper.potential
            observe(i)
        except NumericalBlowUp as exc:
            if raise_on_blowup:
                raise
            series.failed = True
            series.failure = f"{exc} (step {i})" if "step" not in str(exc) else str(exc)
            break
    finalize_velocities(series)
    return series
