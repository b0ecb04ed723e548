"""Exception hierarchy shared by all solver stages.

The CLI maps these onto its stable exit codes; library users can catch
``MhdShockError`` to trap anything the solver classifies as a modelling
or numerical failure (as opposed to a plain bug).
"""


class MhdShockError(Exception):
    """Base class for all solver-level failures."""


class ConfigError(MhdShockError):
    """Invalid, unknown or missing configuration entry."""


class ExpressionError(MhdShockError):
    """Expression parse or evaluation failure (carries position/point info)."""


class StateDomainError(MhdShockError):
    """Thermodynamic closure evaluated outside its domain."""


class RegimeError(MhdShockError):
    """Background or pointwise state violates the assumed flow regime
    (sub-Alfvenic, loss of supersonicity, degenerate shock, ...)."""


class CflError(MhdShockError):
    """Marching step violates the CFL restriction."""

    def __init__(self, msg, suggested_n1=None):
        super().__init__(msg)
        self.suggested_n1 = suggested_n1


class AdmissibilityError(MhdShockError):
    """Exit pressure average outside the attainable range: no shock
    position brackets the admissibility balance."""


class FlatSlopeError(MhdShockError):
    """Wall slope vanishes at the shock position; the position is not
    locally unique."""


class DegenerateAdmissibilityError(MhdShockError):
    """Every position solves the admissibility balance (flat wall and
    unperturbed exit)."""


class SolvabilityError(MhdShockError):
    """Compatibility defect of the potential problem exceeds its
    threshold, or the endpoint-correction root cannot be found."""


class DivergenceError(MhdShockError):
    """Fixed-point iteration failed to contract."""
