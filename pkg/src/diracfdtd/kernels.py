"""Compiled stencil for one leapfrog half-update.

The same kernel advances components (1, 2) from (3, 4) and (3, 4) from
(1, 2): with ``(u1, u2, w1, w2)`` the updated and the source pair,

    u1 <- ru*u1 + cu*[-kd*(Dz w1 + Dx w2 - i Dy w2) + i*(a3*w1 + am*w2)]
    u2 <- ru*u2 + cu*[-kd*(Dx w1 + i Dy w1 - Dz w2) + i*(ap*w1 - a3*w2)]

where D is the two-sided difference f(+1) - f(-1), ``ru = (2-C)/C``,
``cu = 1/C`` and ``am``, ``ap``, ``a3`` are the pre-scaled couplings
q dt/hbar (A1 - i A2), q dt/hbar (A1 + i A2), q dt/hbar A3.

Only interior cells are written; the outer shell stays at zero (reflecting
walls). In planar mode (n_y == 1) the y differences vanish. Cells are
independent within a half-update, so the result does not depend on how the
outer loop is split across threads.
"""

import math
import os

import numba as nb
import numpy as np
from numba import prange

_THREAD_ENV = "DIRACFDTD_NUM_THREADS"


def configure_threads():
    """Apply DIRACFDTD_NUM_THREADS (if set) to numba's thread pool."""
    value = os.environ.get(_THREAD_ENV)
    if value:
        nb.set_num_threads(max(1, min(int(value), nb.config.NUMBA_NUM_THREADS)))
    return nb.get_num_threads()


@nb.njit(parallel=True, fastmath=False, cache=True)
def half_update(u1, u2, w1, w2, ru, cu, am, ap, a3, kd, diag_uniform, has_vec):
    nx, ny, nz = u1.shape
    planar = ny == 1
    j0 = 0 if planar else 1
    j1 = 1 if planar else ny - 1
    cy = ru.shape[1] > 1
    ru0 = ru[0, 0, 0]
    cu0 = cu[0, 0, 0]
    bad = 0
    for i in prange(1, nx - 1):
        nbad = 0
        for j in range(j0, j1):
            jp = j if planar else j + 1
            jm = j if planar else j - 1
            jc = j if cy else 0
            for k in range(1, nz - 1):
                c1 = w1[i, j, k]
                c2 = w2[i, j, k]
                dz1 = w1[i, j, k + 1] - w1[i, j, k - 1]
                dz2 = w2[i, j, k + 1] - w2[i, j, k - 1]
                dx1 = w1[i + 1, j, k] - w1[i - 1, j, k]
                dx2 = w2[i + 1, j, k] - w2[i - 1, j, k]
                dy1 = w1[i, jp, k] - w1[i, jm, k]
                dy2 = w2[i, jp, k] - w2[i, jm, k]
                s1 = -kd * (dz1 + dx2 - 1j * dy2)
                s2 = -kd * (dx1 + 1j * dy1 - dz2)
                if has_vec:
                    q3 = a3[i, jc, k]
                    s1 += 1j * (q3 * c1 + am[i, jc, k] * c2)
                    s2 += 1j * (ap[i, jc, k] * c1 - q3 * c2)
                if diag_uniform:
                    r = ru0
                    c = cu0
                else:
                    r = ru[i, jc, k]
                    c = cu[i, jc, k]
                v1 = r * u1[i, j, k] + c * s1
                v2 = r * u2[i, j, k] + c * s2
                u1[i, j, k] = v1
                u2[i, j, k] = v2
                if not (math.isfinite(v1.real) and math.isfinite(v1.imag)
                        and math.isfinite(v2.real) and math.isfinite(v2.imag)):
                    nbad += 1
        bad += nbad
    return bad


@nb.njit(parallel=True, cache=True)
def apply_mask(psi, mask):
    """psi[c] *= mask for every component; mask has the grid shape."""
    nc, nx, ny, nz = psi.shape
    for i in prange(nx):
        for c in range(nc):
            for j in range(ny):
                for k in range(nz):
                    psi[c, i, j, k] *= mask[i, j, k]


def dummy_complex():
    return np.zeros((1, 1, 1), np.complex128)


def dummy_real():
    return np.zeros((1, 1, 1), np.float64)


# column layout of the per-row partial sums returned by ``moments``
M_RHO_U, M_RHO_L = 0, 1
M_PC = 2            # 3 entries: sum conj(psi) (f(+1) - f(-1)) imaginary parts, x y z
M_OFF_RE = 5        # Re sum conj(upper) sigma.pi lower, in units where pi = k D - qA
M_A = 6             # 4 entries: sum rho * (a0, ax, ay, az)
M_QA0_U, M_QA0_L = 10, 11
M_J, M_K = 12, 13       # sum rho * j, sum rho * k (lattice indices)
N_MOMENTS = 14


@nb.njit(inline="always")
def _at(psi, c, i, j, k):
    nc, nx, ny, nz = psi.shape
    if 0 <= i < nx and 0 <= j < ny and 0 <= k < nz:
        return psi[c, i, j, k]
    return 0j


@nb.njit(parallel=True, cache=True)
def moments(psi, a0, ax, ay, az, has_pot, q, hk):
    """Per-x-row partial sums for norm, momentum, energy and <A>.

    ``hk`` is hbar / (2 delta); the field is zero outside the lattice.
    Summing the returned rows in order gives thread-independent totals.
    """
    nc, nx, ny, nz = psi.shape
    out = np.zeros((nx, N_MOMENTS))
    for i in prange(nx):
        acc = np.zeros(N_MOMENTS)
        for j in range(ny):
            for k in range(nz):
                pc_x = 0.0
                pc_y = 0.0
                pc_z = 0.0
                for c in range(4):
                    v = psi[c, i, j, k].conjugate()
                    pc_x += (v * (_at(psi, c, i + 1, j, k) - _at(psi, c, i - 1, j, k))).imag
                    if ny > 1:
                        pc_y += (v * (_at(psi, c, i, j + 1, k) - _at(psi, c, i, j - 1, k))).imag
                    pc_z += (v * (_at(psi, c, i, j, k + 1) - _at(psi, c, i, j, k - 1))).imag
                acc[2] += pc_x
                acc[3] += pc_y
                acc[4] += pc_z
                p1 = psi[0, i, j, k]
                p2 = psi[1, i, j, k]
                p3 = psi[2, i, j, k]
                p4 = psi[3, i, j, k]
                ru = p1.real * p1.real + p1.imag * p1.imag + p2.real * p2.real + p2.imag * p2.imag
                rl = p3.real * p3.real + p3.imag * p3.imag + p4.real * p4.real + p4.imag * p4.imag
                acc[0] += ru
                acc[1] += rl
                dx3 = _at(psi, 2, i + 1, j, k) - _at(psi, 2, i - 1, j, k)
                dz3 = _at(psi, 2, i, j, k + 1) - _at(psi, 2, i, j, k - 1)
                dx4 = _at(psi, 3, i + 1, j, k) - _at(psi, 3, i - 1, j, k)
                dz4 = _at(psi, 3, i, j, k + 1) - _at(psi, 3, i, j, k - 1)
                if ny > 1:
                    dy3 = _at(psi, 2, i, j + 1, k) - _at(psi, 2, i, j - 1, k)
                    dy4 = _at(psi, 3, i, j + 1, k) - _at(psi, 3, i, j - 1, k)
                else:
                    dy3 = 0j
                    dy4 = 0j
                if has_pot:
                    e0 = a0[i, 0, k]
                    e1 = ax[i, 0, k]
                    e2 = ay[i, 0, k]
                    e3 = az[i, 0, k]
                else:
                    e0 = 0.0
                    e1 = 0.0
                    e2 = 0.0
                    e3 = 0.0
                # pi_j w = -i hk D_j w - q A_j w
                pz3 = -1j * hk * dz3 - q * e3 * p3
                px3 = -1j * hk * dx3 - q * e1 * p3
                py3 = -1j * hk * dy3 - q * e2 * p3
                pz4 = -1j * hk * dz4 - q * e3 * p4
                px4 = -1j * hk * dx4 - q * e1 * p4
                py4 = -1j * hk * dy4 - q * e2 * p4
                off = (p1.conjugate() * (pz3 + px4 - 1j * py4)
                       + p2.conjugate() * (px3 + 1j * py3 - pz4))
                acc[5] += off.real
                r = ru + rl
                acc[6] += r * e0
                acc[7] += r * e1
                acc[8] += r * e2
                acc[9] += r * e3
                acc[10] += ru * e0
                acc[11] += rl * e0
                acc[12] += r * j
                acc[13] += r * k
        for m in range(N_MOMENTS):
            out[i, m] = acc[m]
    return out


@nb.njit(parallel=True, cache=True)
def row_density(psi):
    """sum over components, j and k of |psi|^2 for every x-row."""
    nc, nx, ny, nz = psi.shape
    out = np.zeros(nx)
    for i in prange(nx):
        s = 0.0
        for c in range(nc):
            for j in range(ny):
                for k in range(nz):
                    v = psi[c, i, j, k]
                    s += v.real * v.real + v.imag * v.imag
        out[i] = s
    return out
