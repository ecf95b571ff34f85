"""Classical relativistic motion along the symmetry line z = 0.

Independent of the lattice code: the forces come straight from the closed
midline expressions of the potentials, and the integrators are fixed-step
RK4 with a step-halving (Richardson) convergence loop.

Momentum form (primary):  dx/dt = v(p),  dp/dt = F(x, v)
Velocity form (check):    dx/dt = v,     dv/dt = F(x, v) (1 - v^2)^(3/2) / m
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .potentials import DipoleLineSpec, SolenoidPairSpec
from .units import UNITS

__all__ = [
    "ClassicalState",
    "ClassicalTrajectory",
    "ClassicalOracleError",
    "integrate_dipole_parallel",
    "integrate_dipole_perpendicular",
    "integrate_canonical_conservation",
    "integrate_velocity_form",
    "conserved_quantity_check",
    "energy_deviation",
    "classical_orbit_radius",
    "rk4_path",
]


class ClassicalOracleError(ValueError):
    pass


@dataclass(frozen=True)
class ClassicalState:
    t: float
    x: float
    v: float
    p: float

    @classmethod
    def from_momentum(cls, x, p, mass=UNITS.electron_rest_energy, t=0.0):
        return cls(t, x, p / math.hypot(p, mass), p)

    @classmethod
    def from_velocity(cls, x, v, mass=UNITS.electron_rest_energy, t=0.0):
        if not abs(v) < 1:
            raise ClassicalOracleError("|v| must be < c")
        return cls(t, x, v, mass * v / math.sqrt(1 - v * v))


@dataclass
class ClassicalTrajectory:
    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    p: np.ndarray
    dt: float
    mass: float
    charge: float
    richardson_change: float = float("nan")
    extra: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.t)

    @property
    def final(self) -> ClassicalState:
        return ClassicalState(float(self.t[-1]), float(self.x[-1]), float(self.v[-1]), float(self.p[-1]))

    def v_of_x(self, xs):
        """Velocity interpolated onto positions ``xs`` (monotone motion)."""
        order = np.argsort(self.x)
        return np.interp(xs, self.x[order], self.v[order])


def _speed(p, m):
    return p / math.hypot(p, m)


def rk4_path(rhs: Callable, y0: float, x0: float, t0: float, dt: float, x_end: float,
             speed: Callable, max_steps: int = 10_000_000):
    """RK4 on (x, y) with dx/dt = speed(y), dy/dt = rhs(x, y), up to x = x_end.

    The last step is shortened so the path ends exactly on ``x_end``.
    """
    def deriv(x, y):
        return speed(y), rhs(x, y)

    def rk_step(x, y, h):
        k1x, k1y = deriv(x, y)
        k2x, k2y = deriv(x + 0.5 * h * k1x, y + 0.5 * h * k1y)
        k3x, k3y = deriv(x + 0.5 * h * k2x, y + 0.5 * h * k2y)
        k4x, k4y = deriv(x + h * k3x, y + h * k3y)
        return (x + h / 6 * (k1x + 2 * k2x + 2 * k3x + k4x),
                y + h / 6 * (k1y + 2 * k2y + 2 * k3y + k4y))

    direction = math.copysign(1.0, x_end - x0)
    if speed(y0) * direction <= 0:
        raise ClassicalOracleError("initial velocity does not point towards x_end")
    ts, xs, ys = [t0], [x0], [y0]
    x, y, t = x0, y0, t0
    for _ in range(max_steps):
        xn, yn = rk_step(x, y, dt)
        if not (math.isfinite(xn) and math.isfinite(yn)):
            raise ClassicalOracleError(f"non-finite state at t={t:.6g}")
        if (xn - x_end) * direction >= 0:
            # secant on the step length so the path lands on x_end
            h0, f0 = 0.0, x - x_end
            h1, f1 = dt, xn - x_end
            for _ in range(30):
                if f1 == f0:
                    break
                h2 = h1 - f1 * (h1 - h0) / (f1 - f0)
                xh, yh = rk_step(x, y, h2)
                h0, f0, h1, f1 = h1, f1, h2, xh - x_end
                if abs(f1) <= 1e-15 * max(1.0, abs(x_end)):
                    break
            xn, yn = rk_step(x, y, h1)
            ts.append(t + h1)
            xs.append(x_end)
            ys.append(yn)
            return np.array(ts), np.array(xs), np.array(ys)
        if speed(yn) * direction <= 0:
            raise ClassicalOracleError(f"turning point at x={xn:.6g} before reaching x_end")
        x, y, t = xn, yn, t + dt
        ts.append(t)
        xs.append(x)
        ys.append(y)
    raise ClassicalOracleError("step budget exhausted before reaching x_end")


def _momentum_trajectory(force, initial: ClassicalState, x_end, dt, mass, charge):
    def rhs(x, p):
        return force(x, _speed(p, mass))

    t, x, p = rk4_path(rhs, initial.p, initial.x, initial.t, dt, x_end, lambda p: _speed(p, mass))
    v = p / np.hypot(p, mass)
    if np.any(np.abs(v) >= 1 - 1e-12):
        raise ClassicalOracleError("speed reached c")
    return ClassicalTrajectory(t, x, v, p, dt, mass, charge)


def _default_dt(initial, x_end, n=400):
    return abs(x_end - initial.x) / abs(initial.v) / n


def _richardson(make, dt, tol, refine, max_halvings=20):
    """Halve dt until the v(t) curve changes by less than ``tol`` (relative)."""
    coarse = make(dt)
    if not refine:
        return coarse
    for _ in range(max_halvings):
        dt /= 2
        fine = make(dt)
        m = len(coarse) - 1  # shared time levels (the final step differs)
        scale = max(np.abs(fine.v).max(), 1e-300)
        diff = np.abs(fine.v[: 2 * m : 2] - coarse.v[:m]).max() if m else 0.0
        diff = max(diff, abs(fine.v[-1] - coarse.v[-1])) / scale
        fine.richardson_change = diff
        if diff < tol:
            return fine
        coarse = fine
    raise ClassicalOracleError(f"no convergence to {tol} after {max_halvings} halvings")


def _dipole(spec: DipoleLineSpec, orientation, initial, x_end, dt, charge, mass, tol, refine):
    if spec.orientation != orientation:
        raise ValueError(f"spec orientation is {spec.orientation!r}, expected {orientation!r}")

    def force(x, v):
        return -charge * float(spec.da0_dx_midline(x))

    dt = dt or _default_dt(initial, x_end)
    traj = _richardson(lambda h: _momentum_trajectory(force, initial, x_end, h, mass, charge), dt, tol, refine)
    traj.extra["kind"] = f"dipole_{orientation}"
    return traj


def integrate_dipole_parallel(spec: DipoleLineSpec, initial: ClassicalState, x_end: float,
                              dt: float | None = None, charge: float = -1.0,
                              mass: float = UNITS.electron_rest_energy, tol: float = 1e-6,
                              refine: bool = True) -> ClassicalTrajectory:
    """Midline motion under dp/dt = -q dA0/dx for dipoles pointing along x."""
    return _dipole(spec, "parallel", initial, x_end, dt, charge, mass, tol, refine)


def integrate_dipole_perpendicular(spec: DipoleLineSpec, initial: ClassicalState, x_end: float,
                                   dt: float | None = None, charge: float = -1.0,
                                   mass: float = UNITS.electron_rest_energy, tol: float = 1e-6,
                                   refine: bool = True) -> ClassicalTrajectory:
    """Same as the parallel case with dipoles pointing along z (force odd in x)."""
    return _dipole(spec, "perpendicular", initial, x_end, dt, charge, mass, tol, refine)


def integrate_canonical_conservation(spec: SolenoidPairSpec, initial: ClassicalState, x_end: float,
                                     dt: float | None = None, charge: float = -1.0,
                                     mass: float = UNITS.electron_rest_energy, tol: float = 1e-6,
                                     refine: bool = True) -> ClassicalTrajectory:
    """Midline motion conserving p_x + q A_x between two opposite solenoids.

    dp/dt = -q (dA_x/dx) v. Also records the dropped q (dv/dt) A_x term
    along the path as ``extra['neglected_term']``.
    """
    if abs(initial.x) < 8 * spec.half_separation:
        raise ValueError("start must satisfy |x| >= 8a")

    def force(x, v):
        return -charge * float(spec.dax_dx_midline(x)) * v

    dt = dt or _default_dt(initial, x_end)
    traj = _richardson(lambda h: _momentum_trajectory(force, initial, x_end, h, mass, charge), dt, tol, refine)
    dvdt = np.array([force(x, v) for x, v in zip(traj.x, traj.v)]) * (1 - traj.v ** 2) ** 1.5 / mass
    traj.extra["kind"] = "canonical_conservation"
    traj.extra["neglected_term"] = charge * dvdt * spec.ax_midline(traj.x)
    return traj


def integrate_velocity_form(spec: SolenoidPairSpec, initial: ClassicalState, x_end: float, dt: float,
                            charge: float = -1.0, mass: float = UNITS.electron_rest_energy
                            ) -> ClassicalTrajectory:
    """Cross-check integrator: dv/dt = -(q/m) v (1 - v^2)^(3/2) dA_x/dx, fixed dt."""
    def rhs(x, v):
        return -charge / mass * v * (1 - v * v) ** 1.5 * float(spec.dax_dx_midline(x))

    t, x, v = rk4_path(rhs, initial.v, initial.x, initial.t, dt, x_end, lambda v: v)
    if np.any(np.abs(v) >= 1 - 1e-12):
        raise ClassicalOracleError("speed reached c")
    p = mass * v / np.sqrt(1 - v * v)
    return ClassicalTrajectory(t, x, v, p, dt, mass, charge, extra={"kind": "velocity_form"})


def conserved_quantity_check(traj: ClassicalTrajectory, spec: SolenoidPairSpec) -> float:
    """max |(p + q A_x) - initial value| along the path."""
    pc = traj.p + traj.charge * spec.ax_midline(traj.x)
    return float(np.abs(pc - pc[0]).max())


def energy_deviation(traj: ClassicalTrajectory, spec: DipoleLineSpec) -> float:
    """max |(E_kin + q A0) - initial value| along a dipole-line path."""
    e = np.hypot(traj.p, traj.mass) + traj.charge * spec.a0_midline(traj.x)
    return float(np.abs(e - e[0]).max())


def classical_orbit_radius(p: float, b0_tesla: float, charge: float = -1.0) -> float:
    """Cyclotron radius |p| / (|q| B0) in nm for p in MeV/c."""
    if b0_tesla == 0:
        raise ValueError("orbit radius is undefined for B0 = 0")
    if charge == 0:
        raise ValueError("orbit radius is undefined for a neutral particle")
    return abs(p) / (abs(charge) * abs(float(UNITS.tesla_to_internal(b0_tesla))))
