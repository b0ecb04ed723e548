"""Locating and shaping the shock.

The admissibility balance ties the wall height at the shock position and
at the exit to the mean exit total pressure; its root seeds everything
downstream.  The slope of the front comes from the transverse jump
condition, the endpoint correction from the solvability balance of the
subsonic velocity problem, and the curve itself is the endpoint value
minus the running slope integral.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .background import BackgroundShock
from .elliptic import (EllipticProblem, NeumannSolver, flux_potential_coefficients,
                       recover_flux_velocity)
from .errors import (AdmissibilityError, DegenerateAdmissibilityError, FlatSlopeError,
                     SolvabilityError)
from .fields import Grid, cumulative_trapezoid, simpson_weights
from .profiles import ExitPressureProfile, WallProfile, eval_deriv, integrate
from .supersonic import CurveSampler, Field

POSITION_TOL = 1e-10
SLOPE_MIN = 1e-8         # |f'(eta*)| below this means the position is not isolated
DEGENERATE_TOL = 1e-12
_SCAN_POINTS = 2048


@dataclass(frozen=True)
class ShockFront:
    """Assembled shock curve y1 = curve(y2).

    curve(y2) = eta_bar_star + eta_ddot_star - integral of the slope from
    y2 to 1, so curve(1) equals the corrected endpoint exactly.
    """

    eta_bar_star: float
    eta_ddot_star: float
    y2: np.ndarray
    slope: np.ndarray
    curve: np.ndarray


@dataclass(frozen=True)
class BoundaryData:
    """Sampled boundary data for one subsonic solve.

    g_s, g1 live on the interface, g3 on the exit (all length n2+1),
    g2/g4 on the bottom/top wall (length n1+1), g0 is the slope source
    and R_p the total-pressure linearization remainder at the exit.
    """

    g_s: np.ndarray
    g1: np.ndarray
    g3: np.ndarray
    g2: np.ndarray
    g4: np.ndarray
    g0: np.ndarray
    R_p: np.ndarray


def admissibility_value(eta: float, bg: BackgroundShock, wall: WallProfile) -> float:
    """Wall-pressure balance function whose root locates the shock."""
    f_eta = eval_deriv(wall.f, eta, 0)
    f_L1 = eval_deriv(wall.f, wall.L1, 0)
    return (-bg.wall_coeff * f_eta + bg.u_plus * f_L1) / bg.exit_coeff


@dataclass(frozen=True)
class PositionResult:
    eta: float
    degenerate: bool = False


def _solve_scalar_root(fun, lo: float, hi: float, target: float,
                       fallback: float) -> PositionResult:
    """Bracketed bisection to 1e-6 plus secant polish for fun(eta) = target."""
    xs = np.linspace(lo, hi, _SCAN_POINTS + 1)
    vals = np.array([fun(x) - target for x in xs])
    scale = max(1.0, float(np.max(np.abs(vals))) if np.max(np.abs(vals)) > 0 else 1.0)
    if float(np.max(np.abs(vals))) < DEGENERATE_TOL:
        return PositionResult(fallback, degenerate=True)
    hits = np.nonzero(vals == 0.0)[0]
    if hits.size:
        return PositionResult(float(xs[hits[0]]))
    sign_change = np.nonzero(vals[:-1] * vals[1:] < 0.0)[0]
    if sign_change.size == 0:
        raise AdmissibilityError(
            f"no admissible position: target {target:.6g} outside attained range "
            f"[{vals.min() + target:.6g}, {vals.max() + target:.6g}]")
    i = int(sign_change[0])
    a, b = float(xs[i]), float(xs[i + 1])
    fa, fb = float(vals[i]), float(vals[i + 1])
    while b - a > 1e-6:
        m = 0.5 * (a + b)
        fm = fun(m) - target
        if fm == 0.0:
            return PositionResult(m)
        if fa * fm < 0.0:
            b, fb = m, fm
        else:
            a, fa = m, fm
    x0, x1, f0, f1 = a, b, fa, fb
    for _ in range(80):
        if f1 == f0:
            break
        x2 = x1 - f1 * (x1 - x0) / (f1 - f0)
        x2 = min(max(x2, a), b)
        f2 = fun(x2) - target
        x0, f0, x1, f1 = x1, f1, x2, f2
        if abs(x1 - x0) < POSITION_TOL and abs(f1) < 1e-13 * scale:
            break
    return PositionResult(x1)


def find_initial_position(bg: BackgroundShock, wall: WallProfile,
                          exit_profile: ExitPressureProfile,
                          fallback: float | None = None) -> PositionResult:
    """Shock position from the admissibility balance.

    Degenerate data (identically flat balance) return the fallback
    position, flagged; a vanishing wall slope at the root is fatal since
    the position is then not locally unique.
    """
    if fallback is None:
        fallback = 0.5 * (wall.L0 + wall.L1)
    target = exit_profile.mean()
    res = _solve_scalar_root(lambda e: admissibility_value(e, bg, wall),
                             wall.L0, wall.L1, target, fallback)
    if res.degenerate:
        return res
    if abs(eval_deriv(wall.f, res.eta, 1)) * wall.sigma <= SLOPE_MIN * max(wall.sigma, 1e-30) \
            and abs(eval_deriv(wall.f, res.eta, 1)) <= SLOPE_MIN:
        raise FlatSlopeError(
            f"wall slope vanishes at the shock position {res.eta:.8g}; "
            "the admissibility root is not isolated")
    return res


def find_initial_position_3d(bg: BackgroundShock, f2d, P_ex2d,
                             L0: float, L1: float, n: int = 256,
                             fallback: float | None = None) -> PositionResult:
    """Rectangular-duct variant: wall shape f(x1, x2), exit pressure
    P_ex(x2, x3).  Only the position is computed; both inputs enter
    through cross-stream averages."""
    if fallback is None:
        fallback = 0.5 * (L0 + L1)

    def f_mean(x1: float) -> float:
        return integrate(lambda t: f2d(x1, t), 0.0, 1.0, n)

    target = integrate(lambda s: integrate(lambda t: P_ex2d(s, t), 0.0, 1.0, n), 0.0, 1.0, n)
    f_exit = f_mean(L1)

    def balance(eta: float) -> float:
        return (-bg.wall_coeff * f_mean(eta) + bg.u_plus * f_exit) / bg.exit_coeff

    res = _solve_scalar_root(balance, L0, L1, target, fallback)
    if res.degenerate:
        return res
    h = 1e-6 * (L1 - L0)
    slope = (f_mean(min(res.eta + h, L1)) - f_mean(max(res.eta - h, L0))) / (2.0 * h)
    if abs(slope) <= SLOPE_MIN:
        raise FlatSlopeError(
            f"averaged wall slope vanishes at the shock position {res.eta:.8g}")
    return res


def linear_boundary_data(bg: BackgroundShock, trace_minus: dict,
                         exit_profile: ExitPressureProfile, sigma: float,
                         wall: WallProfile, zgrid: Grid) -> BoundaryData:
    """First-order interface/exit/wall data built from the upstream trace."""
    u1m = np.asarray(trace_minus["u1"], dtype=float)
    u2m = np.asarray(trace_minus["u2"], dtype=float)
    rho_u_C = bg.rho_plus * bg.u_plus * bg.alfven_factor_plus
    y2 = zgrid.y2
    g_s = bg.interface_entropy_coeff * u1m
    g1 = bg.interface_u1_coeff * u1m
    g3 = bg.exit_u1_coeff * u1m - sigma * np.asarray(eval_deriv(exit_profile.P_ex, y2, 0)) / rho_u_C
    g4 = sigma * bg.u_plus * np.asarray(eval_deriv(wall.f1, zgrid.y1, 0))
    g2 = np.zeros(zgrid.n1 + 1)
    g0 = -(1.0 - bg.rho_minus * bg.kappa ** 2) * u2m
    return BoundaryData(g_s=g_s, g1=g1, g3=g3, g2=g2, g4=g4, g0=g0,
                        R_p=np.zeros_like(g_s))


def slope_from_jump(u2_plus_interface, g0, bg: BackgroundShock) -> np.ndarray:
    """Shock slope from the transverse jump condition.

    slope * [p] = (1 - rho+ kappa^2) u2_plus + g0, where g0 carries the
    upstream contribution and, in the nonlinear stage, the lagged exact
    jump residual.
    """
    return ((1.0 - bg.rho_plus * bg.kappa ** 2) * np.asarray(u2_plus_interface, dtype=float)
            + np.asarray(g0, dtype=float)) / bg.p_jump


def solvability_residual(data: BoundaryData, source1: np.ndarray, zgrid: Grid,
                         bg: BackgroundShock) -> float:
    """Balance that must vanish for the subsonic velocity problem to admit
    a solution: wall flux minus interface/exit flux minus interior source.
    """
    rho_u = bg.rho_plus * bg.u_plus
    w1 = simpson_weights(zgrid.n1, zgrid.h1)
    w2 = simpson_weights(zgrid.n2, zgrid.h2)
    term_wall = float(w1 @ (data.g4 - data.g2))
    term_faces = -(1.0 - bg.mach2_plus) / rho_u * float(w2 @ (data.g1 - data.g3))
    term_source = -float(w1 @ np.asarray(source1) @ w2) / rho_u
    return term_wall + term_faces + term_source


def solve_endpoint_correction(evaluate, sigma: float, slope_scale: float,
                              halfwidth: float, tol: float) -> tuple[float, float, bool]:
    """Root of the solvability balance in the endpoint correction.

    ``evaluate`` maps a trial correction to the balance value; the first
    step uses the expected local slope (``slope_scale``), then safeguarded
    secant iterations finish.  Returns (root, residual, degenerate).
    """
    if sigma == 0.0:
        return 0.0, 0.0, True
    x0 = 0.0
    f0 = evaluate(x0)
    if abs(f0) <= tol:
        return x0, f0, False
    if abs(slope_scale) < 1e-300:
        raise SolvabilityError("endpoint-correction derivative collapsed (flat wall?)")
    x1 = float(np.clip(f0 / slope_scale, -halfwidth, halfwidth))
    if x1 == x0:
        x1 = 1e-3 * halfwidth
    f1 = evaluate(x1)
    for _ in range(60):
        if abs(f1) <= tol:
            return x1, f1, False
        if f1 == f0:
            raise SolvabilityError("endpoint-correction secant stalled: flat balance")
        x2 = x1 - f1 * (x1 - x0) / (f1 - f0)
        if not np.isfinite(x2):
            raise SolvabilityError("endpoint-correction secant produced non-finite step")
        x2 = float(np.clip(x2, -halfwidth, halfwidth))
        x0, f0, x1, f1 = x1, f1, x2, evaluate(x2)
        if abs(x1 - x0) < 1e-16:
            break
    if abs(f1) <= 10.0 * tol:
        return x1, f1, False
    raise SolvabilityError(
        f"no endpoint-correction root within +-{halfwidth:.4g}: residual {f1:.3e}")


def assemble_curve(eta_bar_star: float, eta_ddot_star: float, slope: np.ndarray,
                   y2: np.ndarray, L0: float, L1: float) -> ShockFront:
    """Curve from endpoint and slope: endpoint minus the tail integral."""
    slope = np.asarray(slope, dtype=float)
    y2 = np.asarray(y2, dtype=float)
    h2 = y2[1] - y2[0]
    running = cumulative_trapezoid(slope, h2)
    curve = eta_bar_star + eta_ddot_star - (running[-1] - running)
    if curve.min() <= L0 or curve.max() >= L1:
        raise SolvabilityError(
            f"shock curve leaves the nozzle: range [{curve.min():.6g}, {curve.max():.6g}] "
            f"vs ({L0}, {L1})")
    return ShockFront(eta_bar_star, eta_ddot_star, y2, slope, curve)


# ---------------------------------------------------------------------------
# linearized initial approximation behind the shock

@dataclass(frozen=True)
class InitialApproximation:
    """Dotted state: first-order fields behind the flat interface plus the
    slope samples, the data they came from, and the achieved defect."""

    eta_bar_star: float
    zgrid: Grid
    u1: np.ndarray
    u2: np.ndarray
    S: np.ndarray
    slope: np.ndarray
    data: BoundaryData
    defect: float
    trace_minus: dict


def initial_approximation(bg: BackgroundShock, wall: WallProfile,
                          exit_profile: ExitPressureProfile,
                          linear_upstream: Field, eta_bar_star: float,
                          zgrid: Grid,
                          solver: NeumannSolver | None = None) -> InitialApproximation:
    """Solve the linearized downstream problem on [eta*, L1] x [0, 1].

    The flux-potential reduction turns the first-order system into a pure
    Neumann problem whose compatibility defect vanishes (to second order)
    exactly because eta* solves the admissibility balance.
    """
    sigma = wall.sigma
    trace = CurveSampler(linear_upstream).trace(
        np.full(zgrid.n2 + 1, eta_bar_star), zgrid.y2)
    data = linear_boundary_data(bg, trace, exit_profile, sigma, wall, zgrid)
    # entropy rows are rigid; its cross-stream gradient sources the curl
    # equation, entering the potential through its running integral
    S2_line = bg.entropy_source_coeff_plus * (data.g_s - data.g_s[0])
    S2 = np.broadcast_to(S2_line, zgrid.shape).copy()
    problem, S2 = _dotted_problem(bg, zgrid, data, S2)
    if solver is None:
        solver = NeumannSolver(zgrid, problem.a1, problem.a2)
    phi = solver.solve(problem)
    u1, u2 = recover_flux_velocity(phi, bg, S2)
    S = np.broadcast_to(data.g_s, zgrid.shape).copy()
    slope = slope_from_jump(u2[0, :], data.g0, bg)
    return InitialApproximation(eta_bar_star, zgrid, u1, u2, S, slope, data,
                                phi.defect, trace)


def _dotted_problem(bg, zgrid, data: BoundaryData, S2: np.ndarray):
    """Flux-potential problem of the dotted stage (zero interior source,
    entropy integral supplied in closed form)."""
    a1, a2 = flux_potential_coefficients(bg)
    rho_u_C = bg.rho_plus * bg.u_plus * bg.alfven_factor_plus
    kfac = 1.0 - bg.rho_plus * bg.kappa ** 2
    problem = EllipticProblem(
        grid=zgrid, a1=a1, a2=a2, rhs=np.zeros(zgrid.shape),
        neumann_left=rho_u_C * data.g1 + S2[0, :],
        neumann_right=rho_u_C * data.g3 + S2[-1, :],
        neumann_bottom=kfac * data.g2,
        neumann_top=kfac * data.g4,
    )
    return problem, S2
