"""Anisotropic Neumann problem on a rectangle and the potential reduction
of the subsonic first-order velocity system.

The generic solver handles  -a1 d11(phi) - a2 d22(phi) = rhs  with the
normal derivative prescribed on all four edges.  Pure Neumann data leave
a constant null space and demand one compatibility relation between data
and right side; the discrete system is made consistent by projecting out
the mean defect and is gauged by weighted zero mean.

The subsonic velocity solve feeds this solver through a flux potential
whose streamwise / cross-stream derivatives carry the two velocity
components; the compatibility defect of that problem is exactly the
solvability balance that pins the shock endpoint correction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import MhdShockError, SolvabilityError
from .fields import Grid, cumulative_trapezoid, d1, d2, trapezoid_weights

DIRECT_LIMIT = 257 * 257  # unknown count above which the solver goes iterative


@dataclass(frozen=True)
class EllipticProblem:
    """Coefficients, right side and the four normal-derivative traces.

    ``neumann_left/right`` hold d1(phi) on the y1 edges (length n2+1),
    ``neumann_bottom/top`` hold d2(phi) on the y2 edges (length n1+1).
    """

    grid: Grid
    a1: float
    a2: float
    rhs: np.ndarray
    neumann_left: np.ndarray
    neumann_right: np.ndarray
    neumann_bottom: np.ndarray
    neumann_top: np.ndarray

    def __post_init__(self):
        if self.a1 <= 0.0 or self.a2 <= 0.0:
            raise ValueError(f"ellipticity lost: a1={self.a1}, a2={self.a2}")
        n1, n2 = self.grid.n1, self.grid.n2
        if np.shape(self.rhs) != (n1 + 1, n2 + 1):
            raise ValueError("rhs shape does not match grid")
        for name in ("neumann_left", "neumann_right"):
            if np.shape(getattr(self, name)) != (n2 + 1,):
                raise ValueError(f"{name} must have length n2+1")
        for name in ("neumann_bottom", "neumann_top"):
            if np.shape(getattr(self, name)) != (n1 + 1,):
                raise ValueError(f"{name} must have length n1+1")


@dataclass(frozen=True)
class PotentialField:
    """Zero-mean potential samples plus the achieved linear-system residual."""

    grid: Grid
    values: np.ndarray
    residual: float
    defect: float


def compatibility_defect(problem: EllipticProblem) -> float:
    """Flux/right-side balance; zero (to quadrature error) iff solvable.

    defect = volume integral of rhs + boundary integral of a * d(phi)/dn.
    """
    g = problem.grid
    w1 = trapezoid_weights(g.n1, g.h1)
    w2 = trapezoid_weights(g.n2, g.h2)
    vol = float(w1 @ problem.rhs @ w2)
    flux = problem.a1 * float(w2 @ (problem.neumann_right - problem.neumann_left)) \
        + problem.a2 * float(w1 @ (problem.neumann_top - problem.neumann_bottom))
    return vol + flux


class NeumannSolver:
    """Factorized five-point Neumann operator for one grid and coefficient
    pair, reusable across right sides (the fixed-point loop solves the
    same operator every sweep)."""

    def __init__(self, grid: Grid, a1: float, a2: float, iterative: bool | None = None):
        self.grid = grid
        self.a1 = float(a1)
        self.a2 = float(a2)
        n1, n2 = grid.n1, grid.n2
        self.w1 = trapezoid_weights(n1, grid.h1)
        self.w2 = trapezoid_weights(n2, grid.h2)
        self.W = np.outer(self.w1, self.w2)
        self.area = float(self.W.sum())
        n = (n1 + 1) * (n2 + 1)
        if iterative is None:
            iterative = n > DIRECT_LIMIT
        self.iterative = iterative
        self.matrix = self._assemble()
        if iterative:
            self._solve_linear = self._solve_cg
        else:
            wcol = sp.csc_matrix(self.W.ravel()[:, None])
            bordered = sp.bmat([[self.matrix, wcol], [wcol.T, None]], format="csc")
            self._lu = spla.splu(bordered)
            self._solve_linear = self._solve_direct

    def _assemble(self) -> sp.csc_matrix:
        g = self.grid
        n1, n2 = g.n1, g.n2
        cx = self.a1 / g.h1 ** 2
        cy = self.a2 / g.h2 ** 2
        idx = np.arange((n1 + 1) * (n2 + 1)).reshape(n1 + 1, n2 + 1)
        W = self.W
        rows, cols, vals = [], [], []

        diag = 2.0 * (cx + cy) * W
        rows.append(idx.ravel()); cols.append(idx.ravel()); vals.append(diag.ravel())

        east = -cx * W.copy(); east[0, :] *= 2.0
        rows.append(idx[:-1, :].ravel()); cols.append(idx[1:, :].ravel())
        vals.append(east[:-1, :].ravel())
        west = -cx * W.copy(); west[-1, :] *= 2.0
        rows.append(idx[1:, :].ravel()); cols.append(idx[:-1, :].ravel())
        vals.append(west[1:, :].ravel())
        north = -cy * W.copy(); north[:, 0] *= 2.0
        rows.append(idx[:, :-1].ravel()); cols.append(idx[:, 1:].ravel())
        vals.append(north[:, :-1].ravel())
        south = -cy * W.copy(); south[:, -1] *= 2.0
        rows.append(idx[:, 1:].ravel()); cols.append(idx[:, :-1].ravel())
        vals.append(south[:, 1:].ravel())

        return sp.csc_matrix((np.concatenate(vals),
                              (np.concatenate(rows), np.concatenate(cols))))

    def right_side(self, rhs, left, right, bottom, top) -> np.ndarray:
        """Weighted right side with ghost-eliminated boundary data folded in."""
        b = self.W * rhs
        b[0, :] -= self.a1 * self.w2 * left
        b[-1, :] += self.a1 * self.w2 * right
        b[:, 0] -= self.a2 * self.w1 * bottom
        b[:, -1] += self.a2 * self.w1 * top
        return b.ravel()

    def _solve_direct(self, b: np.ndarray) -> np.ndarray:
        sol = self._lu.solve(np.append(b, 0.0))
        return sol[:-1]

    def _solve_cg(self, b: np.ndarray) -> np.ndarray:
        w = self.W.ravel()
        phi, info = spla.cg(self.matrix, b, rtol=1e-12, atol=0.0,
                            x0=np.zeros_like(b), maxiter=20000)
        if info != 0:
            raise MhdShockError(f"Neumann CG did not converge (info={info})")
        return phi - (w @ phi) / self.area

    def solve(self, problem: EllipticProblem,
              defect_threshold: float | None = None) -> PotentialField:
        if problem.grid != self.grid:
            raise ValueError("problem grid does not match solver grid")
        defect = compatibility_defect(problem)
        scale = max(1.0, float(np.max(np.abs(problem.rhs)), ),
                    *(float(np.max(np.abs(t))) for t in
                      (problem.neumann_left, problem.neumann_right,
                       problem.neumann_bottom, problem.neumann_top)))
        if defect_threshold is not None and abs(defect) > defect_threshold * scale:
            raise SolvabilityError(
                f"compatibility defect {defect:.3e} exceeds threshold "
                f"{defect_threshold * scale:.3e}; the boundary data are inconsistent")
        b = self.right_side(problem.rhs, problem.neumann_left, problem.neumann_right,
                            problem.neumann_bottom, problem.neumann_top)
        # make the singular system consistent: remove the mean defect
        b = b - (b.sum() / self.area) * self.W.ravel()
        phi = self._solve_linear(b)
        res = float(np.max(np.abs(self.matrix @ phi - b)))
        if res > 1e-10 * scale:
            raise MhdShockError(f"discrete Neumann residual {res:.3e} too large")
        return PotentialField(self.grid, phi.reshape(self.grid.shape), res, defect)


def solve_potential(problem: EllipticProblem, defect_threshold: float | None = None,
                    iterative: bool | None = None) -> PotentialField:
    """One-shot Neumann solve (builds and discards the factorization)."""
    return NeumannSolver(problem.grid, problem.a1, problem.a2,
                         iterative=iterative).solve(problem, defect_threshold)


def recover_velocity(phi: PotentialField, bg) -> tuple[np.ndarray, np.ndarray]:
    """Velocities from a stream-function potential.

    d2(phi) carries the streamwise fluctuation, -d1(phi) the cross-stream
    one; central differences inside, one-sided second order on edges.
    """
    g = phi.grid
    u1 = d2(phi.values, g.h2) / (1.0 - bg.mach2_plus)
    u2 = -d1(phi.values, g.h1) / (bg.rho_plus * bg.u_plus)
    return u1, u2


# ---------------------------------------------------------------------------
# subsonic velocity solve through the flux potential

def flux_potential_coefficients(bg) -> tuple[float, float]:
    """(a1, a2) of the flux-potential operator for a given background."""
    rho_u = bg.rho_plus * bg.u_plus
    a1 = (1.0 - bg.mach2_plus) / (rho_u * bg.alfven_factor_plus)
    a2 = rho_u / (1.0 - bg.rho_plus * bg.kappa ** 2)
    return a1, a2


def flux_potential_problem(bg, grid: Grid, source1, source2,
                           g1, g3, g2, g4) -> tuple[EllipticProblem, np.ndarray]:
    """Assemble the Neumann problem equivalent to the first-order system

        (1-M+^2) d1(u1) + rho*u d2(u2)          = source1
        (1-rho+ k^2) d1(u2) - rho*u C+ d2(u1)   = source2

    with u1 given on the left/right edges (g1, g3) and u2 on the walls
    (g2 bottom, g4 top).  The potential psi satisfies
    d1(psi) = rho*u C+ u1 + S2,  d2(psi) = (1-rho+ k^2) u2, where S2 is
    the running cross-stream integral of source2 (returned for the
    velocity recovery).
    """
    a1, a2 = flux_potential_coefficients(bg)
    rho_u = bg.rho_plus * bg.u_plus
    cfac = rho_u * bg.alfven_factor_plus
    kfac = 1.0 - bg.rho_plus * bg.kappa ** 2
    S2 = cumulative_trapezoid(np.asarray(source2, dtype=float), grid.h2, axis=1)
    rhs = -(np.asarray(source1, dtype=float) + a1 * d1(S2, grid.h1))
    problem = EllipticProblem(
        grid=grid, a1=a1, a2=a2, rhs=rhs,
        neumann_left=cfac * np.asarray(g1, dtype=float) + S2[0, :],
        neumann_right=cfac * np.asarray(g3, dtype=float) + S2[-1, :],
        neumann_bottom=kfac * np.asarray(g2, dtype=float),
        neumann_top=kfac * np.asarray(g4, dtype=float),
    )
    return problem, S2


def recover_flux_velocity(phi: PotentialField, bg,
                          S2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Velocities from the flux potential of :func:`flux_potential_problem`."""
    g = phi.grid
    cfac = bg.rho_plus * bg.u_plus * bg.alfven_factor_plus
    kfac = 1.0 - bg.rho_plus * bg.kappa ** 2
    u1 = (d1(phi.values, g.h1) - S2) / cfac
    u2 = d2(phi.values, g.h2) / kfac
    return u1, u2
