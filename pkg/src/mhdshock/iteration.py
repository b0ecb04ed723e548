"""Nonlinear fixed-point engine behind the shock.

Every sweep: (a) re-solve the endpoint correction from the solvability
balance, (b) copy the entropy datum along stream rows, (c) solve the
constant-coefficient velocity system with all nonlinear and
shock-transform terms lagged into sources and boundary data, (d) update
the shock slope from the transverse jump condition.  The map contracts
with rate O(sigma), so plain Picard iteration converges geometrically.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import make_interp_spline

from .background import BackgroundShock, FlowState, closure, jump_residuals, \
    total_pressure_expansion
from .elliptic import NeumannSolver, flux_potential_coefficients, \
    flux_potential_problem, recover_flux_velocity
from .errors import DivergenceError, SolvabilityError
from .fields import COORD_Z, Field, Grid, cumulative_trapezoid, d1, d2
from .profiles import ExitPressureProfile, WallProfile, eval_deriv
from .shockfront import (BoundaryData, InitialApproximation, ShockFront,
                         assemble_curve, initial_approximation, find_initial_position,
                         slope_from_jump, solvability_residual, solve_endpoint_correction)
from .supersonic import CurveSampler, solve_linear_supersonic, solve_nonlinear_supersonic

DEFECT_THRESHOLD = 1e-6
NEIGHBORHOOD_MARGIN = 1.0   # iterates may stray to (1+margin) * sigma^(3/2) from the seed


@dataclass(frozen=True)
class ShockMap:
    """Transform straightening the shock: z1 pins the interface at the
    unperturbed position and the exit at L1."""

    eta_bar_star: float
    L1: float
    y2: np.ndarray
    curve: np.ndarray
    slope: np.ndarray

    def __post_init__(self):
        span = self.L1 - self.eta_bar_star
        if np.min(self.L1 - self.curve) < 1e-6 * span:
            raise SolvabilityError("shock curve reaches the exit; transform degenerates")
        object.__setattr__(self, "_eta", make_interp_spline(self.y2, self.curve, k=3))
        object.__setattr__(self, "_etap", make_interp_spline(self.y2, self.slope, k=3))

    def eta(self, y2):
        return self._eta(y2)

    def to_fixed(self, y1, y2):
        e = self._eta(y2)
        return (self.L1 - self.eta_bar_star) / (self.L1 - e) * (y1 - e) + self.eta_bar_star

    def to_physical(self, z1, z2):
        e = self._eta(z2)
        return z1 + (self.L1 - z1) / (self.L1 - self.eta_bar_star) * (e - self.eta_bar_star)

    def metric(self, zgrid: Grid):
        """(a, b) with d/dy1 = a d/dz1 and d/dy2 = b d/dz1 + d/dz2 on the grid."""
        eta = self.curve
        etap = self.slope
        denom = self.L1 - eta
        a = (self.L1 - self.eta_bar_star) / denom
        b = -np.outer(self.L1 - zgrid.y1, etap) / denom[None, :]
        return a, b


def to_fixed_domain(front: ShockFront, L1: float) -> ShockMap:
    return ShockMap(front.eta_bar_star, L1, front.y2, front.curve, front.slope)


@dataclass(frozen=True)
class IterationState:
    """Fluctuation triple on the fixed grid plus the shock unknowns."""

    u1: np.ndarray
    u2: np.ndarray
    S: np.ndarray
    slope: np.ndarray
    eta_ddot_star: float

    def distance(self, other: "IterationState") -> float:
        return max(float(np.max(np.abs(self.u1 - other.u1))),
                   float(np.max(np.abs(self.u2 - other.u2))),
                   float(np.max(np.abs(self.S - other.S))),
                   float(np.max(np.abs(self.slope - other.slope))))


@dataclass
class IterationReport:
    converged: bool = False
    iterations: int = 0
    update_norms: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    solvability_residuals: list = field(default_factory=list)
    eta_ddot_history: list = field(default_factory=list)
    defects: list = field(default_factory=list)
    message: str = ""

    @property
    def max_ratio(self) -> float:
        return max(self.ratios) if self.ratios else 0.0


def _deriv4(vec: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order first derivative of a 1D sample vector."""
    n = vec.size
    out = np.empty(n)
    out[2:-2] = (-vec[4:] + 8.0 * vec[3:-1] - 8.0 * vec[1:-3] + vec[:-4]) / (12.0 * h)
    c0 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / (12.0 * h)
    c1 = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / (12.0 * h)
    out[0] = c0 @ vec[:5]
    out[1] = c1 @ vec[:5]
    out[-1] = -(c0 @ vec[-5:][::-1])
    out[-2] = -(c1 @ vec[-5:][::-1])
    return out


class SubsonicEngine:
    """All run-constant context for the fixed-point map: background,
    profiles, upstream field sampler, fixed grid and the factorized
    Neumann operator."""

    def __init__(self, bg: BackgroundShock, wall: WallProfile,
                 exit_profile: ExitPressureProfile, sigma: float,
                 upstream: Field, eta_bar_star: float, zgrid: Grid,
                 defect_threshold: float = DEFECT_THRESHOLD):
        self.bg = bg
        self.wall = wall
        self.exit_profile = exit_profile
        self.sigma = sigma
        self.upstream = upstream
        self.sampler = CurveSampler(upstream)
        self.eta_bar_star = eta_bar_star
        self.zgrid = zgrid
        self.defect_threshold = defect_threshold
        a1, a2 = flux_potential_coefficients(bg)
        self.solver = NeumannSolver(zgrid, a1, a2)
        self.L1 = wall.L1

    # -- geometry ----------------------------------------------------------

    def front_for(self, slope: np.ndarray, eta_dd: float) -> ShockFront:
        return assemble_curve(self.eta_bar_star, eta_dd, slope, self.zgrid.y2,
                              self.wall.L0, self.wall.L1)

    # -- data assembly -----------------------------------------------------

    def full_state(self, state: IterationState) -> FlowState:
        bg = self.bg
        return FlowState(bg.plus.u1 + state.u1, state.u2, bg.plus.S + state.S,
                         bg.plus.B, bg.kappa)

    def upstream_on_curve(self, curve: np.ndarray) -> FlowState:
        tr = self.sampler.trace(curve, self.zgrid.y2)
        bgm = self.bg.minus
        S = tr.get("S")
        if S is None or "B" not in tr:
            # linearized upstream fields carry fluctuations only
            return FlowState(bgm.u1 + tr["u1"], tr["u2"], bgm.S, bgm.B, bgm.kappa)
        return FlowState(tr["u1"], tr["u2"], S, tr["B"], tr["kappa"])

    def boundary_data(self, state: IterationState, front: ShockFront) -> BoundaryData:
        """Exact-jump interface data, streamline-reparameterized exit datum
        and the transformed wall datum for one trial front."""
        bg = self.bg
        zg = self.zgrid
        plus = self.full_state(state)
        plus_if = FlowState(np.asarray(plus.u1)[0, :], np.asarray(plus.u2)[0, :],
                            np.asarray(plus.S)[0, :], plus.B, plus.kappa)
        minus_if = self.upstream_on_curve(front.curve)
        jumps = jump_residuals(plus_if, minus_if, bg.gas)
        g0_exact = jumps.transverse - front.slope * jumps.pressure
        g0 = front.slope * bg.p_jump \
            - (1.0 - bg.rho_plus * bg.kappa ** 2) * plus_if.u2 + g0_exact
        # interface data: linear interface operator applied to the new
        # (u1, S) pair must reproduce the lagged exact jumps
        V = np.vstack([state.u1[0, :], state.S[0, :]])
        G = np.vstack([jumps.volume, jumps.momentum])
        rhs = bg.interface_matrix_plus @ V - G
        g1, g_s = np.linalg.solve(bg.interface_matrix_plus, rhs)
        # exit data: reparameterize the pressure profile by the physical
        # exit coordinate and keep the exact linearization remainder
        exit_state = FlowState(np.asarray(plus.u1)[-1, :], np.asarray(plus.u2)[-1, :],
                               np.asarray(plus.S)[-1, :], plus.B, plus.kappa)
        rho_exit = closure(exit_state, bg.gas).rho
        x2 = cumulative_trapezoid(1.0 / (rho_exit * exit_state.u1), zg.h2)
        _, _, R_p = total_pressure_expansion(exit_state, bg, side="+")
        rho_u_C = bg.rho_plus * bg.u_plus * bg.alfven_factor_plus
        p_coeff = (bg.p_plus + bg.kappa ** 2 * (bg.rho_plus * bg.u_plus) ** 2) \
            / ((bg.gas.gamma - 1.0) * bg.plus.S)
        pex = np.asarray(eval_deriv(self.exit_profile.P_ex, x2, 0))
        g3 = (-self.sigma * pex - p_coeff * g_s + R_p) / rho_u_C
        # wall data: slope of the wall at the transformed abscissa times the
        # local streamwise speed (zero on the flat bottom wall)
        warg = zg.y1 + (self.L1 - zg.y1) / (self.L1 - self.eta_bar_star) * front.eta_ddot_star
        fw = np.asarray(eval_deriv(self.wall.f1, warg, 0))
        g4 = self.sigma * fw * (bg.plus.u1 + state.u1[:, -1])
        g2 = np.zeros(zg.n1 + 1)
        return BoundaryData(g_s=g_s, g1=g1, g3=g3, g2=g2, g4=g4, g0=g0, R_p=R_p)

    def sources(self, state: IterationState, front: ShockFront,
                entropy_source: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Lagged nonlinear + shock-transform source terms of the velocity
        system; ``entropy_source`` is the cross-stream entropy-gradient
        term of the curl equation."""
        bg = self.bg
        zg = self.zgrid
        plus = self.full_state(state)
        rho, _, c, _ = closure(plus, bg.gas)
        u1f, u2f = np.asarray(plus.u1), np.asarray(plus.u2)
        M1, M2 = u1f / c, u2f / c
        M1s, M2s = M1 * M1, M2 * M2
        rk2 = rho * bg.kappa ** 2
        C = 1.0 - rk2 + rk2 * (M1s + M2s)
        rho_u = bg.rho_plus * bg.u_plus
        Cbar = bg.alfven_factor_plus

        d1u1 = d1(state.u1, zg.h1)
        d1u2 = d1(state.u2, zg.h1)
        d2u1 = d2(state.u1, zg.h2)
        d2u2 = d2(state.u2, zg.h2)

        denom = self.L1 - front.curve
        shift = (front.curve - self.eta_bar_star) / denom
        wfac = np.outer(self.L1 - zg.y1, front.slope / denom)

        f1 = (M1s - bg.mach2_plus) * d1u1 + M1 * M2 * d1u2 \
            + rho * u2f * d2u1 + (rho_u - rho * u1f) * d2u2 \
            - shift[None, :] * ((1.0 - M1s) * d1u1 - M1 * M2 * d1u2) \
            + wfac * (-rho * u2f * d1u1 + rho * u1f * d1u2)

        f2 = (rk2 - bg.rho_plus * bg.kappa ** 2) * d1u2 \
            - rk2 * M1 * M2 * d1u1 - rk2 * M2s * d1u2 \
            + (rho * u1f * C - rho_u * Cbar) * d2u1 + rho * u2f * C * d2u2 \
            - shift[None, :] * (rk2 * M1 * M2 * d1u1 + (C - rk2 * M1s) * d1u2) \
            - wfac * C * (rho * u1f * d1u1 + rho * u2f * d1u2) \
            + entropy_source
        return f1, f2

    def entropy_source_from(self, state: IterationState, g_s: np.ndarray) -> np.ndarray:
        """Curl-equation entropy term, with the updated entropy rows and the
        full-state coefficient (fourth-order cross-stream differences)."""
        bg = self.bg
        plus = self.full_state(state)
        rho, _, c, _ = closure(plus, bg.gas)
        Ms = (np.asarray(plus.u1) ** 2 + np.asarray(plus.u2) ** 2) / c ** 2
        coeff = rho ** bg.gas.gamma * (1.0 + bg.gas.gamma * rho * bg.kappa ** 2 * Ms) \
            / (bg.gas.gamma - 1.0)
        return coeff * _deriv4(np.asarray(g_s), self.zgrid.h2)[None, :]

    # -- solvability and the map itself -------------------------------------

    def solvability(self, state: IterationState, eta_dd: float) -> float:
        front = self.front_for(state.slope, eta_dd)
        data = self.boundary_data(state, front)
        f1, _ = self.sources(state, front, np.zeros(self.zgrid.shape))
        return solvability_residual(data, f1, self.zgrid, self.bg)

    def endpoint_correction(self, state: IterationState) -> tuple[float, float, bool]:
        slope_scale = self.sigma * self.bg.wall_coeff \
            * eval_deriv(self.wall.f1, self.eta_bar_star, 0)
        tol = max(1e-11 * abs(self.sigma), 1e-16)
        halfwidth = 0.25 * (self.wall.L1 - self.wall.L0)
        return solve_endpoint_correction(lambda e: self.solvability(state, e),
                                         self.sigma, slope_scale, halfwidth, tol)

    def apply(self, state: IterationState):
        """One application of the update map; returns the new state plus
        (solvability residual, potential defect)."""
        eta_dd, resid, _ = self.endpoint_correction(state)
        front = self.front_for(state.slope, eta_dd)
        data = self.boundary_data(state, front)
        entropy_source = self.entropy_source_from(state, data.g_s)
        f1, f2 = self.sources(state, front, entropy_source)
        problem, S2 = flux_potential_problem(self.bg, self.zgrid, f1, f2,
                                             data.g1, data.g3, data.g2, data.g4)
        phi = self.solver.solve(problem, defect_threshold=self.defect_threshold)
        u1n, u2n = recover_flux_velocity(phi, self.bg, S2)
        S_new = np.broadcast_to(data.g_s, self.zgrid.shape).copy()
        slope_new = slope_from_jump(u2n[0, :], data.g0, self.bg)
        new = IterationState(u1n, u2n, S_new, slope_new, eta_dd)
        return new, resid, phi.defect


@dataclass(frozen=True)
class TransonicSolution:
    """Converged run: upstream field in the Lagrangian chart, downstream
    full state in the shock-aligned chart, the curve joining them, and the
    reports attached by the drivers."""

    background: BackgroundShock
    supersonic: Field
    subsonic: Field
    front: ShockFront
    shock_map: ShockMap
    sigma: float
    initial: InitialApproximation
    iteration_report: IterationReport
    residual_report: object = None

    def subsonic_y1(self) -> np.ndarray:
        """Physical (Lagrangian) streamwise coordinates of the subsonic nodes."""
        zg = self.subsonic.grid
        Z1, Z2 = np.meshgrid(zg.y1, zg.y2, indexing="ij")
        return self.shock_map.to_physical(Z1, Z2)


def _state_from_initial(init: InitialApproximation) -> IterationState:
    return IterationState(init.u1, init.u2, init.S, init.slope, 0.0)


def run_fixed_point(bg: BackgroundShock, wall: WallProfile,
                    exit_profile: ExitPressureProfile,
                    n1_sup: int, n1_sub: int, n2: int,
                    tol: float = 1e-10, max_iter: int = 50,
                    relaxation: float = 1.0,
                    guard_neighborhood: bool = True):
    """Full pipeline: upstream solves, shock position, seed, Picard loop.

    Returns (TransonicSolution, IterationReport); the residual report slot
    stays empty until diagnostics fill it.
    """
    sigma = wall.sigma
    sup_grid = Grid(n1_sup, n2, wall.L0, wall.L1)
    upstream = solve_nonlinear_supersonic(bg, wall, sigma, sup_grid)
    upstream_lin = solve_linear_supersonic(bg, wall, sup_grid)
    pos = find_initial_position(bg, wall, exit_profile)
    zgrid = Grid(n1_sub, n2, pos.eta, wall.L1)
    init = initial_approximation(bg, wall, exit_profile, upstream_lin, pos.eta, zgrid)
    engine = SubsonicEngine(bg, wall, exit_profile, sigma, upstream, pos.eta, zgrid)

    report = IterationReport()
    seed = _state_from_initial(init)
    state = seed
    radius = (1.0 + NEIGHBORHOOD_MARGIN) * abs(sigma) ** 1.5
    tol_eff = tol * abs(sigma)
    bad_streak = 0
    for it in range(1, max_iter + 1):
        new, resid, defect = engine.apply(state)
        if relaxation != 1.0:
            new = IterationState(
                state.u1 + relaxation * (new.u1 - state.u1),
                state.u2 + relaxation * (new.u2 - state.u2),
                state.S + relaxation * (new.S - state.S),
                state.slope + relaxation * (new.slope - state.slope),
                state.eta_ddot_star + relaxation * (new.eta_ddot_star - state.eta_ddot_star))
        delta = new.distance(state)
        report.iterations = it
        report.update_norms.append(delta)
        report.solvability_residuals.append(resid)
        report.eta_ddot_history.append(new.eta_ddot_star)
        report.defects.append(defect)
        if len(report.update_norms) >= 2 and report.update_norms[-2] > 0.0:
            ratio = delta / report.update_norms[-2]
            report.ratios.append(ratio)
            bad_streak = bad_streak + 1 if ratio >= 1.0 else 0
            if bad_streak >= 3:
                report.message = "update ratios >= 1 for 3 consecutive iterations"
                raise DivergenceError(report.message)
        if guard_neighborhood and sigma != 0.0 and new.distance(seed) > radius:
            report.message = (f"iterate left the sigma^(3/2) neighborhood of the seed "
                              f"({new.distance(seed):.3e} > {radius:.3e})")
            raise DivergenceError(report.message)
        state = new
        if delta <= tol_eff:
            report.converged = True
            break
    if not report.converged:
        report.message = f"no convergence in {max_iter} iterations"
        raise DivergenceError(report.message)

    front = engine.front_for(state.slope, state.eta_ddot_star)
    shock_map = to_fixed_domain(front, wall.L1)
    ones = np.ones(zgrid.shape)
    subsonic = Field(zgrid, COORD_Z, {
        "u1": bg.plus.u1 + state.u1,
        "u2": state.u2,
        "S": bg.plus.S + state.S,
        "B": bg.plus.B * ones,
        "kappa": bg.kappa * ones,
    })
    solution = TransonicSolution(
        background=bg, supersonic=upstream, subsonic=subsonic, front=front,
        shock_map=shock_map, sigma=sigma, initial=init, iteration_report=report)
    return solution, report
