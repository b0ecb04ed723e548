"""Upstream solves on the full Lagrangian rectangle.

Both the constant-coefficient linearized system and the quasilinear
system are hyperbolic in the streamwise direction for supersonic,
super-Alfvenic states, and are marched with a two-step Lax-Wendroff
scheme.  Entropy, total energy and the field scalar are constant along
stream rows and are never differenced.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .background import BackgroundShock, closure, FlowState
from .errors import CflError, RegimeError
from .fields import COORD_Y, Field, Grid
from .profiles import WallProfile

# one-sided first-derivative stencils at a wall, second order:
#   value known at the wall plus the first two half-node rows
_W_BC = (-8.0 / 3.0, 3.0, -1.0 / 3.0)
#   value known only at the first three half-node rows
_W_IN = (-2.0, 3.0, -1.0)
# quadratic extrapolation of half-node rows to the wall
_W_EX = (15.0 / 8.0, -10.0 / 8.0, 3.0 / 8.0)


def _linear_matrix(bg: BackgroundShock) -> np.ndarray:
    """Constant coefficient matrix of d1(u) = Q d2(u) for the linear system."""
    rho_u = bg.rho_minus * bg.u_minus
    q1 = rho_u / (bg.mach2_minus - 1.0)
    q2 = rho_u * bg.alfven_factor_minus / (1.0 - bg.rho_minus * bg.kappa ** 2)
    return np.array([[0.0, q1], [q2, 0.0]])


def _state_matrices(u1, u2, bg: BackgroundShock):
    """Per-node Q = -A1^{-1} A2 for the quasilinear system, plus M^2.

    Raises when any node leaves the supersonic super-Alfvenic window.
    """
    state = FlowState(u1, u2, bg.minus.S, bg.minus.B, bg.kappa)
    rho, _, c, _ = closure(state, bg.gas)
    M1, M2 = u1 / c, u2 / c
    M1s, M2s = M1 * M1, M2 * M2
    Ms = M1s + M2s
    rk2 = rho * bg.kappa ** 2
    C = 1.0 - rk2 + rk2 * Ms
    bad = (Ms <= 1.0) | (rk2 >= 1.0) | (C <= 0.0)
    if np.any(bad):
        j = int(np.argmax(bad))
        raise RegimeError(
            f"upstream march left the supersonic/super-Alfvenic regime at node "
            f"y2={j}: M^2={np.asarray(Ms).ravel()[j]:.6g}, rho*kappa^2={np.asarray(rk2).ravel()[j]:.6g}")
    a = 1.0 - M1s
    b = -M1 * M2
    cc = rk2 * M1 * M2
    d = 1.0 - rk2 + rk2 * M2s
    det = a * d - b * cc
    # A2 entries
    p11, p12 = -rho * u2, rho * u1
    p21, p22 = -rho * u1 * C, -rho * u2 * C
    q11 = -(d * p11 - b * p21) / det
    q12 = -(d * p12 - b * p22) / det
    q21 = -(-cc * p11 + a * p21) / det
    q22 = -(-cc * p12 + a * p22) / det
    return np.stack([np.broadcast_to(q11, np.shape(u1)),
                     np.broadcast_to(q12, np.shape(u1)),
                     np.broadcast_to(q21, np.shape(u1)),
                     np.broadcast_to(q22, np.shape(u1))]), Ms


def _spectral_radius(q: np.ndarray) -> float:
    q11, q12, q21, q22 = q
    tr = q11 + q22
    disc = np.maximum((q11 - q22) ** 2 + 4.0 * q12 * q21, 0.0)
    root = np.sqrt(disc)
    return float(np.max(np.maximum(np.abs(0.5 * (tr + root)), np.abs(0.5 * (tr - root)))))


def _apply_q(q, v1, v2):
    return q[0] * v1 + q[1] * v2, q[2] * v1 + q[3] * v2


def _check_cfl(speed: float, grid: Grid):
    if grid.h1 * speed > grid.h2 * (1.0 + 1e-12):
        need = int(math.ceil((grid.y1_max - grid.y1_min) * speed / grid.h2))
        raise CflError(
            f"CFL violated: h1={grid.h1:.4g} > h2/|speed|={grid.h2 / speed:.4g}; "
            f"use n1 >= {need}", suggested_n1=need)


def _one_sided(bc_val, row, h2, lower: bool):
    """d/dy2 at a wall from the wall value plus two interior half rows."""
    if lower:
        return (_W_BC[0] * bc_val + _W_BC[1] * row[0] + _W_BC[2] * row[1]) / h2
    return -(_W_BC[0] * bc_val + _W_BC[1] * row[-1] + _W_BC[2] * row[-2]) / h2


def _one_sided_interior(row, h2, lower: bool):
    """d/dy2 at a wall from the first three interior half rows only."""
    if lower:
        return (_W_IN[0] * row[0] + _W_IN[1] * row[1] + _W_IN[2] * row[2]) / h2
    return -(_W_IN[0] * row[-1] + _W_IN[1] * row[-2] + _W_IN[2] * row[-3]) / h2


def _extrap(row, lower: bool):
    if lower:
        return _W_EX[0] * row[0] + _W_EX[1] * row[1] + _W_EX[2] * row[2]
    return _W_EX[0] * row[-1] + _W_EX[1] * row[-2] + _W_EX[2] * row[-3]


def _march(grid: Grid, u0: np.ndarray, q_of, wall_u2, picard_sweeps: int):
    """Two-step Lax-Wendroff march of d1(u) = Q(u) d2(u).

    ``q_of(u1_row, u2_row)`` returns the stacked Q entries, ``wall_u2``
    maps (y1, u1_wall, lower_flag) to the imposed u2 value.  Walls update
    u1 from the first row of the system with one-sided stencils, then
    impose u2.
    """
    h1, h2 = grid.h1, grid.h2
    y1 = grid.y1
    out1 = np.empty(grid.shape)
    out2 = np.empty(grid.shape)
    u = u0.copy()
    out1[0], out2[0] = u[0], u[1]
    for n in range(grid.n1):
        ymid = y1[n] + 0.5 * h1
        unew = u.copy()
        ustar = u
        for _ in range(picard_sweeps + 1):
            qfull = q_of(ustar[0], ustar[1])
            _check_cfl(_spectral_radius(qfull), grid)
            qhalf = q_of(0.5 * (ustar[0, 1:] + ustar[0, :-1]),
                         0.5 * (ustar[1, 1:] + ustar[1, :-1]))
            dv1 = u[0, 1:] - u[0, :-1]
            dv2 = u[1, 1:] - u[1, :-1]
            s1, s2 = _apply_q(qhalf, dv1, dv2)
            h1v = 0.5 * (u[0, 1:] + u[0, :-1]) + 0.5 * h1 / h2 * s1
            h2v = 0.5 * (u[1, 1:] + u[1, :-1]) + 0.5 * h1 / h2 * s2
            f1, f2 = _apply_q(qfull[:, 1:-1], h1v[1:] - h1v[:-1], h2v[1:] - h2v[:-1])
            unew = u.copy()
            unew[0, 1:-1] = u[0, 1:-1] + h1 / h2 * f1
            unew[1, 1:-1] = u[1, 1:-1] + h1 / h2 * f2
            # wall closure: u1 from the first equation (one-sided), u2 imposed
            for lower in (True, False):
                j = 0 if lower else -1
                u1w_half = _extrap(h1v, lower)
                bc_half = wall_u2(ymid, u1w_half, lower)
                d2u2 = _one_sided(bc_half, h2v, h2, lower)
                d2u1 = _one_sided_interior(h1v, h2, lower)
                qw = qfull[:, j]
                unew[0, j] = u[0, j] + h1 * (qw[0] * d2u1 + qw[1] * d2u2)
                unew[1, j] = wall_u2(y1[n + 1], unew[0, j], lower)
            ustar = 0.5 * (u + unew)
        u = unew
        out1[n + 1], out2[n + 1] = u[0], u[1]
    return out1, out2


def solve_linear_supersonic(bg: BackgroundShock, wall: WallProfile, grid: Grid,
                            top_bc=None, bottom_bc=None) -> Field:
    """Linearized upstream fluctuation on the whole rectangle.

    Zero entrance data; the cross-stream velocity equals
    sigma * u_minus * f'(y1) on the top wall and 0 on the bottom wall
    (``top_bc``/``bottom_bc`` override the sampled values, for tests).
    """
    if top_bc is None:
        top_bc = lambda y1: wall.sigma * bg.u_minus * wall.deriv(y1, 1)
    if bottom_bc is None:
        bottom_bc = lambda y1: 0.0
    q = _linear_matrix(bg)
    qstack = np.stack([np.full(grid.n2 + 1, q[0, 0]), np.full(grid.n2 + 1, q[0, 1]),
                       np.full(grid.n2 + 1, q[1, 0]), np.full(grid.n2 + 1, q[1, 1])])

    def q_of(u1_row, u2_row):
        m = np.shape(u1_row)[0]
        return qstack[:, :m]

    def wall_u2(y1v, _u1w, lower):
        return bottom_bc(y1v) if lower else top_bc(y1v)

    u0 = np.zeros((2, grid.n2 + 1))
    u0[1, 0] = bottom_bc(grid.y1_min)
    u0[1, -1] = top_bc(grid.y1_min)
    U1, U2 = _march(grid, u0, q_of, wall_u2, picard_sweeps=0)
    zeros = np.zeros(grid.shape)
    return Field(grid, COORD_Y, {"u1": U1, "u2": U2, "S": zeros})


def solve_nonlinear_supersonic(bg: BackgroundShock, wall: WallProfile, sigma: float,
                               grid: Grid) -> Field:
    """Quasilinear upstream solve; returns the full state.

    Coefficients are refreshed within each station by two Picard sweeps;
    S, B, kappa stay at their entrance constants exactly.
    """
    def q_of(u1_row, u2_row):
        q, _ = _state_matrices(u1_row, u2_row, bg)
        return q

    def wall_u2(y1v, u1w, lower):
        frak = 0.0 if lower else 1.0
        return frak * sigma * wall.deriv(y1v, 1) * u1w

    u0 = np.zeros((2, grid.n2 + 1))
    u0[0, :] = bg.u_minus
    u0[1, -1] = sigma * wall.deriv(grid.y1_min, 1) * bg.u_minus
    U1, U2 = _march(grid, u0, q_of, wall_u2, picard_sweeps=2)
    const = np.ones(grid.shape)
    return Field(grid, COORD_Y, {
        "u1": U1, "u2": U2,
        "S": bg.minus.S * const, "B": bg.minus.B * const, "kappa": bg.kappa * const,
    })


class CurveSampler:
    """Bicubic interpolation of field components along curves.

    Splines are built once per field; smooth fields interpolate at
    fourth order, and data that are polynomials of degree <= 3 per
    axis reproduce exactly.
    """

    def __init__(self, field: Field):
        self.field = field
        g = field.grid
        self._splines = {name: RectBivariateSpline(g.y1, g.y2, field[name], kx=3, ky=3)
                         for name in field.components()}

    def trace(self, y1_points, y2_points) -> dict:
        g = self.field.grid
        y1p = np.asarray(y1_points, dtype=float)
        y2p = np.asarray(y2_points, dtype=float)
        eps = 1e-12 * max(1.0, abs(g.y1_max))
        if np.any(y1p < g.y1_min - eps) or np.any(y1p > g.y1_max + eps):
            raise RegimeError(
                f"trace curve leaves the field domain [{g.y1_min}, {g.y1_max}]: "
                f"range [{y1p.min():.6g}, {y1p.max():.6g}]")
        y1p = np.clip(y1p, g.y1_min, g.y1_max)
        return {name: s.ev(y1p, y2p) for name, s in self._splines.items()}


def sample_on_curve(field: Field, curve, y2_points=None) -> dict:
    """Interpolate every component of ``field`` along y1 = curve(y2).

    ``curve`` holds the y1 values at ``y2_points`` (grid nodes when
    omitted).
    """
    if y2_points is None:
        y2_points = field.grid.y2
    return CurveSampler(field).trace(curve, y2_points)
