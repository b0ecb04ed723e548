"""Piecewise-constant reference shock and everything derived from it.

All states are normalized so the mass flux rho*u1 equals 1 on both sides
of the shock; this is the scaling in which the Lagrangian chart maps the
nozzle onto the unit-height rectangle.  The aligned magnetic field enters
through the scalar kappa (field = kappa * momentum) and the total
pressure P = p + kappa^2 rho^2 |u|^2 / 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import RegimeError, StateDomainError

MASS_FLUX = 1.0          # rho*u1 on both sides, by normalization
PRESSURE_JUMP_MIN = 1e-8  # below this the shock is treated as degenerate
DIVISION_HAZARD = 1e-12   # guard for the [P] division inside the jump functionals

# component order of the state vector and of all linearization vectors
STATE_COMPONENTS = ("u1", "u2", "S", "B", "kappa")


@dataclass(frozen=True)
class GasModel:
    """Polytropic gas, p = S * rho^gamma."""

    gamma: float

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise RegimeError(f"adiabatic exponent must exceed 1, got {self.gamma}")


@dataclass(frozen=True)
class FlowState:
    """Pointwise state (u1, u2, S, B, kappa); components may be arrays."""

    u1: object
    u2: object
    S: object
    B: object
    kappa: object

    def as_array(self) -> np.ndarray:
        return np.array([self.u1, self.u2, self.S, self.B, self.kappa], dtype=float)

    def shifted(self, delta: np.ndarray) -> "FlowState":
        return FlowState(self.u1 + delta[0], self.u2 + delta[1], self.S + delta[2],
                         self.B + delta[3], self.kappa + delta[4])


class Closure(NamedTuple):
    rho: object
    p: object
    c: object
    P: object


def closure(state: FlowState, gas: GasModel) -> Closure:
    """Density, pressure, sound speed and total pressure from (u, S, B, kappa)."""
    g = gas.gamma
    q2 = state.u1 * state.u1 + state.u2 * state.u2
    internal = state.B - 0.5 * q2
    if np.any(np.asarray(state.S) <= 0.0) or np.any(np.asarray(internal) <= 0.0):
        raise StateDomainError(
            f"closure outside domain: S={state.S!r}, B-|u|^2/2={internal!r}")
    rho = ((g - 1.0) / (g * state.S) * internal) ** (1.0 / (g - 1.0))
    p = state.S * rho ** g
    c = np.sqrt(g * p / rho)
    P = p + 0.5 * state.kappa ** 2 * rho ** 2 * q2
    return Closure(rho, p, c, P)


class JumpParts(NamedTuple):
    """Pieces of the jump conditions across the shock.

    transverse : jump of (1 - kappa^2 rho) u2            (slope condition numerator)
    pressure   : jump of the total pressure P            (slope condition denominator)
    volume     : combined specific-volume jump condition
    momentum   : combined normal-momentum jump condition
    """

    transverse: object
    pressure: object
    volume: object
    momentum: object


def jump_residuals(plus: FlowState, minus: FlowState, gas: GasModel) -> JumpParts:
    """Exact jump functionals between a downstream and an upstream state.

    The slope condition itself is ``transverse - eta' * pressure``; the
    slope is supplied by the caller.
    """
    cp, cm = closure(plus, gas), closure(minus, gas)
    transverse = (1.0 - plus.kappa ** 2 * cp.rho) * plus.u2 \
        - (1.0 - minus.kappa ** 2 * cm.rho) * minus.u2
    pressure = cp.P - cm.P
    if np.any(np.abs(np.asarray(pressure)) < DIVISION_HAZARD):
        raise RegimeError(f"total-pressure jump below {DIVISION_HAZARD:g}; "
                          "jump functionals are singular")
    ratio = transverse / pressure
    volume = (1.0 / (cp.rho * plus.u1) - 1.0 / (cm.rho * minus.u1)) \
        + ratio * (plus.u2 / plus.u1 - minus.u2 / minus.u1)
    momentum = (plus.u1 + cp.P / (cp.rho * plus.u1) - plus.kappa ** 2 * cp.rho * plus.u1) \
        - (minus.u1 + cm.P / (cm.rho * minus.u1) - minus.kappa ** 2 * cm.rho * minus.u1) \
        + ratio * (cp.P * plus.u2 / plus.u1 - cm.P * minus.u2 / minus.u1)
    return JumpParts(transverse, pressure, volume, momentum)


@dataclass(frozen=True)
class RegimeClassification:
    lambda_plus: object
    lambda_minus: object
    hyperbolic: object
    sonic: object

    @property
    def regime(self) -> str:
        return "hyperbolic" if np.all(self.hyperbolic) else "elliptic-hyperbolic"


def classify(state: FlowState, gas: GasModel) -> RegimeClassification:
    """Characteristic roots of the streamwise system and the flow type.

    Real roots mean the local system is hyperbolic (supersonic), a
    conjugate pair means mixed elliptic-hyperbolic (subsonic).  States
    outside the super-Alfvenic window are rejected.
    """
    c = closure(state, gas)
    q2 = state.u1 ** 2 + state.u2 ** 2
    mach2 = q2 / c.c ** 2
    rk2 = c.rho * state.kappa ** 2
    cfac = 1.0 - rk2 + rk2 * mach2
    if np.any(np.asarray(cfac) <= 0.0) or np.any(np.asarray(rk2) >= 1.0):
        raise RegimeError(
            f"state outside the super-Alfvenic regime: rho*kappa^2={rk2!r}, factor={cfac!r}")
    disc = (1.0 - rk2) * (mach2 - 1.0) / cfac
    root = np.sqrt(np.asarray(disc, dtype=complex))
    lam_p = (-state.u2 + state.u1 * root) / (c.rho * q2)
    lam_m = (-state.u2 - state.u1 * root) / (c.rho * q2)
    hyperbolic = np.real(np.asarray(disc)) >= 0.0
    sonic = np.abs(np.asarray(disc)) < 1e-14
    if np.ndim(disc) == 0:
        lam_p, lam_m = complex(lam_p), complex(lam_m)
        hyperbolic, sonic = bool(hyperbolic), bool(sonic)
    return RegimeClassification(lam_p, lam_m, hyperbolic, sonic)


def alfven_factor(rho, kappa, mach2):
    """1 - rho kappa^2 (1 - M^2): ellipticity modulation by the field."""
    rk2 = rho * kappa ** 2
    return 1.0 - rk2 + rk2 * mach2


@dataclass(frozen=True)
class BackgroundShock:
    """Both constant states plus every linearization coefficient the
    downstream boundary-value problems need."""

    gas: GasModel
    minus: FlowState
    plus: FlowState
    rho_minus: float
    rho_plus: float
    p_minus: float
    p_plus: float
    c_minus: float
    c_plus: float
    mach_minus: float
    mach_plus: float
    alfven2_minus: float
    alfven2_plus: float
    alfven_factor_minus: float
    alfven_factor_plus: float
    pressure_ratio_minus: float   # P / (rho c^2), enters the momentum linearization
    pressure_ratio_plus: float
    exit_coeff: float             # multiplies the exit-pressure average in the position balance
    wall_coeff: float             # multiplies the wall height at the shock position
    interface_u1_coeff: float     # downstream u1 datum per unit upstream u1 trace
    interface_entropy_coeff: float
    exit_u1_coeff: float          # upstream-trace part of the exit u1 datum
    entropy_source_coeff_plus: float   # multiplies d(entropy)/dy2 in the curl equation
    entropy_source_coeff_minus: float
    slope_lin_plus: np.ndarray    # gradients of the jump functionals at the background
    slope_lin_minus: np.ndarray
    volume_lin_plus: np.ndarray
    volume_lin_minus: np.ndarray
    momentum_lin_plus: np.ndarray
    momentum_lin_minus: np.ndarray
    interface_matrix_plus: np.ndarray   # 2x2, acts on (u1, S) interface fluctuations
    interface_matrix_minus: np.ndarray

    @property
    def mach2_minus(self) -> float:
        return self.mach_minus ** 2

    @property
    def mach2_plus(self) -> float:
        return self.mach_plus ** 2

    @property
    def u_minus(self) -> float:
        return self.minus.u1

    @property
    def u_plus(self) -> float:
        return self.plus.u1

    @property
    def kappa(self) -> float:
        return self.minus.kappa

    @property
    def p_jump(self) -> float:
        return self.p_plus - self.p_minus

    @property
    def B(self) -> float:
        return self.minus.B


def _newton_downstream(rho_minus: float, u_minus: float, p_minus: float,
                       B: float, gas: GasModel) -> float:
    """Scalar Newton for the downstream density.

    With rho*u = 1 the momentum jump reads (u + p)(rho) = const and the
    energy jump fixes p(rho) in closed form; the classical normal-shock
    density ratio seeds the iteration.
    """
    g = gas.gamma
    c2 = g * p_minus / rho_minus
    M2 = u_minus * u_minus / c2
    rho = rho_minus * (g + 1.0) * M2 / ((g - 1.0) * M2 + 2.0)
    target = u_minus + p_minus

    def val_and_slope(r):
        u = 1.0 / r
        p = (g - 1.0) / g * r * (B - 0.5 * u * u)
        dp = (g - 1.0) / g * (B + 0.5 * u * u)
        return (u + p) - target, -u * u + dp

    for _ in range(60):
        f, fp = val_and_slope(rho)
        step = f / fp
        rho -= step
        if abs(step) < 1e-15 * max(1.0, abs(rho)):
            break
    f, _ = val_and_slope(rho)
    if abs(f) > 1e-12 or rho <= rho_minus:
        raise RegimeError(f"no subsonic downstream root (residual {f:.3e}, rho {rho:.6g})")
    return rho


def solve_background(rho_minus: float, M_minus: float, kappa: float,
                     gas: GasModel) -> BackgroundShock:
    """Build the reference shock for a supersonic inflow.

    Inputs are already normalized: the upstream speed is 1/rho_minus so
    the mass flux is 1.  Fails fast when there is no subsonic root, the
    pressure jump degenerates, or kappa breaks the super-Alfvenic
    assumption kappa^2 < 1/rho_plus.
    """
    g = gas.gamma
    if M_minus <= 1.0:
        raise RegimeError(f"upstream Mach number must exceed 1, got {M_minus}")
    if rho_minus <= 0.0:
        raise RegimeError(f"upstream density must be positive, got {rho_minus}")
    u_m = MASS_FLUX / rho_minus
    c_m = u_m / M_minus
    p_m = rho_minus * c_m * c_m / g
    S_m = p_m / rho_minus ** g
    B = 0.5 * u_m * u_m + c_m * c_m / (g - 1.0)

    rho_p = _newton_downstream(rho_minus, u_m, p_m, B, gas)
    u_p = MASS_FLUX / rho_p
    p_p = (g - 1.0) / g * rho_p * (B - 0.5 * u_p * u_p)
    S_p = p_p / rho_p ** g
    c_p = math.sqrt(g * p_p / rho_p)
    M_p = u_p / c_p

    if p_p - p_m < PRESSURE_JUMP_MIN:
        raise RegimeError(f"degenerate shock: pressure jump {p_p - p_m:.3e} "
                          f"below {PRESSURE_JUMP_MIN:g}")
    if M_p >= 1.0:
        raise RegimeError(f"downstream state is not subsonic (M={M_p:.6g})")
    if kappa ** 2 * rho_p >= 1.0:
        raise RegimeError(
            "super-Alfvenic assumption violated: kappa^2 = "
            f"{kappa ** 2:.6g} >= 1/rho_plus = {1.0 / rho_p:.6g}")

    minus = FlowState(u_m, 0.0, S_m, B, kappa)
    plus = FlowState(u_p, 0.0, S_p, B, kappa)

    M2m, M2p = M_minus ** 2, M_p ** 2
    k2 = kappa ** 2
    Cm = alfven_factor(rho_minus, kappa, M2m)
    Cp = alfven_factor(rho_p, kappa, M2p)
    dm = 1.0 / g + 0.5 * rho_minus * k2 * M2m
    dp = 1.0 / g + 0.5 * rho_p * k2 * M2p
    pj = p_p - p_m

    # position balance coefficients (mass flux = 1 absorbs rho^2 u^2 factors)
    exit_coeff = (1.0 - M2p) / Cp
    wall_coeff = ((1.0 - M2p) / Cp * (1.0 / (g * M2p) + rho_p * k2) + 1.0) * u_p / p_p * pj

    interface_u1 = (M2p / M2m) * (M2m - 1.0) / (M2p - 1.0)
    interface_S = (g - 1.0) * S_p * (M2m - 1.0) * pj / (p_p * u_m)
    exit_u1 = -(p_p + k2) * (M2m - 1.0) * pj / (Cp * p_p * u_m)

    def lin_vectors(rho, u, S, c, M2, C, d, sign):
        slope = sign * np.array([0.0, 1.0 - rho * k2, 0.0, 0.0, 0.0])
        volume = sign * np.array([(M2 - 1.0) / u, 0.0,
                                  1.0 / ((g - 1.0) * S), -1.0 / c ** 2, 0.0]) / MASS_FLUX
        momentum = sign * np.array([d * (M2 - 1.0) / M2, 0.0,
                                    rho * u * k2 / (2.0 * (g - 1.0) * S),
                                    (1.0 - d) / u, -rho * u * kappa])
        return slope, volume, momentum

    sl_p, vo_p, mo_p = lin_vectors(rho_p, u_p, S_p, c_p, M2p, Cp, dp, +1.0)
    sl_m, vo_m, mo_m = lin_vectors(rho_minus, u_m, S_m, c_m, M2m, Cm, dm, -1.0)

    def interface_matrix(u, S, M2, d):
        return np.array([[(M2 - 1.0) / u, 1.0 / ((g - 1.0) * S)],
                         [d * (M2 - 1.0) / M2, 0.5 * MASS_FLUX * k2 / ((g - 1.0) * S)]])

    Bs_p = interface_matrix(u_p, S_p, M2p, dp)
    Bs_m = interface_matrix(u_m, S_m, M2m, dm)

    src_p = rho_p ** g * (1.0 + g * rho_p * k2 * M2p) / (g - 1.0)
    src_m = rho_minus ** g * (1.0 + g * rho_minus * k2 * M2m) / (g - 1.0)

    return BackgroundShock(
        gas=gas, minus=minus, plus=plus,
        rho_minus=rho_minus, rho_plus=rho_p,
        p_minus=p_m, p_plus=p_p,
        c_minus=c_m, c_plus=c_p,
        mach_minus=M_minus, mach_plus=M_p,
        alfven2_minus=(1.0 / (rho_minus * k2) if k2 > 0.0 else math.inf),
        alfven2_plus=(1.0 / (rho_p * k2) if k2 > 0.0 else math.inf),
        alfven_factor_minus=Cm, alfven_factor_plus=Cp,
        pressure_ratio_minus=dm, pressure_ratio_plus=dp,
        exit_coeff=exit_coeff, wall_coeff=wall_coeff,
        interface_u1_coeff=interface_u1,
        interface_entropy_coeff=interface_S,
        exit_u1_coeff=exit_u1,
        entropy_source_coeff_plus=src_p,
        entropy_source_coeff_minus=src_m,
        slope_lin_plus=sl_p, slope_lin_minus=sl_m,
        volume_lin_plus=vo_p, volume_lin_minus=vo_m,
        momentum_lin_plus=mo_p, momentum_lin_minus=mo_m,
        interface_matrix_plus=Bs_p, interface_matrix_minus=Bs_m,
    )


class LinearizedJump(NamedTuple):
    slope_plus: np.ndarray
    slope_minus: np.ndarray
    volume_plus: np.ndarray
    volume_minus: np.ndarray
    momentum_plus: np.ndarray
    momentum_minus: np.ndarray
    interface_matrix_plus: np.ndarray
    interface_matrix_minus: np.ndarray
    interface_u1_coeff: float
    interface_entropy_coeff: float
    exit_u1_coeff: float


def linearized_coefficients(bg: BackgroundShock) -> LinearizedJump:
    """Gradients of the jump functionals and the interface reduction.

    The 2x2 interface matrices act on (u1, S) fluctuations; their
    combination reproduces the closed-form interface coefficients, which
    the verification suite cross-checks against finite differences.
    """
    return LinearizedJump(
        bg.slope_lin_plus, bg.slope_lin_minus,
        bg.volume_lin_plus, bg.volume_lin_minus,
        bg.momentum_lin_plus, bg.momentum_lin_minus,
        bg.interface_matrix_plus, bg.interface_matrix_minus,
        bg.interface_u1_coeff, bg.interface_entropy_coeff, bg.exit_u1_coeff,
    )


def total_pressure_expansion(state: FlowState, bg: BackgroundShock, side: str = "+"):
    """Exact total pressure, its linearization at the background, and the
    remainder (the second-order error fed back into the exit datum)."""
    if side == "+":
        base, rho, p, S, C, M2 = bg.plus, bg.rho_plus, bg.p_plus, bg.plus.S, \
            bg.alfven_factor_plus, bg.mach2_plus
    else:
        base, rho, p, S, C, M2 = bg.minus, bg.rho_minus, bg.p_minus, bg.minus.S, \
            bg.alfven_factor_minus, bg.mach2_minus
    u = base.u1
    k = bg.kappa
    P_base = p + 0.5 * k ** 2 * (rho * u) ** 2
    du1 = state.u1 - base.u1
    dS = state.S - base.S
    dB = state.B - base.B
    dk = state.kappa - base.kappa
    P_exact = closure(state, bg.gas).P
    P_linear = P_base \
        - rho * u * C * du1 \
        - (p + k ** 2 * (rho * u) ** 2) / ((bg.gas.gamma - 1.0) * S) * dS \
        + rho * (1.0 + rho * k ** 2 * M2) * dB \
        + k * (rho * u) ** 2 * dk
    return P_exact, P_linear, P_exact - P_linear
