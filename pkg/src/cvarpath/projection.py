"""Closed-form single-step optimization on the unit-cost ellipsoid.

One step picks the direction y = delta_w / delta_c that extremizes a linear
objective sum(f * y) subject to up to two linear constraints (total revenue
rate kappa1 and total return/risk rate kappa2) and the quadratic cost
normalization sum(c^2 y^2) = 1.  The Lagrange multiplier q satisfies
a2 q^2 + a0 = 0, so every branch is solved in closed form.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateProblemError, DomainError, InfeasibleStepError

_DEGENERACY_TOL = 1e-14
_GRADIENT_TOL = 1e-13


class ObjectiveKind(enum.Enum):
    MIN_RISK = "min_risk"
    MAX_RETURN = "max_return"
    MAX_RETURN_TO_RISK = "max_return_to_risk"
    MIN_DIVERSIFICATION = "min_diversification"

    @property
    def maximize(self):
        return self in (ObjectiveKind.MAX_RETURN, ObjectiveKind.MAX_RETURN_TO_RISK)


class ConstraintVariant(enum.Enum):
    BOTH = "both"
    REVENUE_ONLY = "revenue_only"
    SECOND_ONLY = "second_only"
    NONE_ACTIVE = "none"


@dataclass(frozen=True)
class ConstraintMode:
    """Which linear constraints are active and what the second one pins."""

    variant: ConstraintVariant
    second_meaning: str = "return"  # "return" or "risk"

    def __post_init__(self):
        if self.second_meaning not in ("return", "risk"):
            raise ConfigError(f"unknown second-constraint meaning {self.second_meaning!r}")

    @property
    def has_revenue(self):
        return self.variant in (ConstraintVariant.BOTH, ConstraintVariant.REVENUE_ONLY)

    @property
    def has_second(self):
        return self.variant in (ConstraintVariant.BOTH, ConstraintVariant.SECOND_ONLY)


def validate_mode(objective, mode):
    """Reject objective/constraint pairings the coefficient table does not define."""
    if not mode.has_second:
        return
    if objective is ObjectiveKind.MAX_RETURN and mode.second_meaning == "return":
        raise ConfigError("return maximisation cannot also constrain the total return")
    if objective is ObjectiveKind.MIN_RISK and mode.second_meaning == "risk":
        raise ConfigError("risk minimisation cannot also constrain the total risk")
    if objective is ObjectiveKind.MIN_DIVERSIFICATION and mode.second_meaning == "risk":
        raise ConfigError("diversification minimisation supports only a return second constraint")


def effective_problem(objective, mode=None):
    """Resolve the coefficient row and optimization direction for a step.

    Return-to-risk maximisation with a pre-assigned second constraint
    degenerates to plain return maximisation (risk fixed) or risk
    minimisation (return fixed); the row switch is made explicit here.
    """
    if objective is ObjectiveKind.MAX_RETURN_TO_RISK and mode is not None and mode.has_second:
        if mode.second_meaning == "risk":
            return ObjectiveKind.MAX_RETURN, True
        return ObjectiveKind.MIN_RISK, False
    return objective, objective.maximize


@dataclass(frozen=True)
class Coefficients:
    """Objective gradient f, second-constraint gradient h, cost coefficients c."""

    f: np.ndarray
    h: np.ndarray  # None when the objective row defines no second constraint
    c: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "f", np.asarray(self.f, dtype=float))
        object.__setattr__(self, "c", np.asarray(self.c, dtype=float))
        if self.h is not None:
            object.__setattr__(self, "h", np.asarray(self.h, dtype=float))
            if self.h.shape != self.f.shape:
                raise DomainError("h length does not match f")
        if self.c.shape != self.f.shape:
            raise DomainError("c length does not match f")
        if np.any(self.c <= 0.0):
            raise DomainError("cost coefficients must be strictly positive")


def select_coefficients(objective, state, report, mode=None):
    """Coefficient vectors for the active (unfrozen) components.

    f follows the objective row; h is the table's companion row (None for
    return-to-risk, which defines no second constraint of its own).
    """
    active = state.active
    r = state.returns[active]
    c = state.cost_coefficients[active]
    dar_values = report.dar[active]
    x0 = state.base_value
    row, _ = effective_problem(objective, mode)

    if row is ObjectiveKind.MAX_RETURN:
        f = r.copy()
        h = dar_values / x0
    elif row is ObjectiveKind.MIN_RISK:
        f = dar_values / x0
        h = r.copy()
    elif row is ObjectiveKind.MAX_RETURN_TO_RISK:
        if report.cvar <= 0.0:
            raise DomainError("return-to-risk coefficients need a strictly positive CVaR")
        f = (r - report.total_return * dar_values / report.cvar) * x0 / report.cvar
        h = None
    else:  # MIN_DIVERSIFICATION
        standalone = report.standalone_cvar[active]
        s = float(standalone.sum())
        if s <= 0.0:
            raise DomainError("diversification coefficients need positive standalone CVaRs")
        f = dar_values / s - standalone * report.cvar / (s * s)
        h = r.copy()
    return Coefficients(f=f, h=h, c=c)


@dataclass(frozen=True)
class StepConstants:
    """The six scalar sums F, G, H, U, V, W over the active components."""

    F: float
    G: float
    H: float
    U: float
    V: float
    W: float
    has_h: bool

    def __post_init__(self):
        if self.U <= 0.0:
            raise DomainError("U must be positive")
        slack = 1e-12 * (1.0 + abs(self.U) + abs(self.V) + abs(self.W)
                         + abs(self.F) + abs(self.G) + abs(self.H)) ** 2
        if self.F < -slack:
            raise DomainError("F must be non-negative")
        if self.U * self.F - self.G * self.G < -slack:
            raise DomainError("Cauchy-Schwarz violated: UF < G^2")
        if self.has_h:
            if self.U * self.W - self.V * self.V < -slack:
                raise DomainError("Cauchy-Schwarz violated: UW < V^2")
            if self.W * self.F - self.H * self.H < -slack:
                raise DomainError("Cauchy-Schwarz violated: WF < H^2")


def constants(coeffs):
    """Accumulate the six sums in ascending component order."""
    c2 = coeffs.c * coeffs.c
    f = coeffs.f
    F = float(np.sum(f * f / c2))
    G = float(np.sum(f / c2))
    U = float(np.sum(1.0 / c2))
    if coeffs.h is not None:
        h = coeffs.h
        H = float(np.sum(f * h / c2))
        V = float(np.sum(h / c2))
        W = float(np.sum(h * h / c2))
        return StepConstants(F=F, G=G, H=H, U=U, V=V, W=W, has_h=True)
    return StepConstants(F=F, G=G, H=0.0, U=U, V=0.0, W=0.0, has_h=False)


@dataclass(frozen=True)
class PathParams:
    """Per-unit-cost rates of the revenue and second constraints."""

    kappa1: float = 0.0
    kappa2: float = 0.0


@dataclass(frozen=True)
class StepSolution:
    y: np.ndarray
    q: float
    s: float
    t: float
    a0: float
    a2: float
    Q: float
    branch_sign: int


@dataclass(frozen=True)
class _Branch:
    """y decomposed as (P/q + R)/c^2, with the quadratic and the linear Q term."""

    P: np.ndarray
    R: np.ndarray
    a0: float
    a2: float
    linear_q: float


def _require_second(consts, coeffs, mode):
    if coeffs is not None and coeffs.h is None:
        raise ConfigError(f"constraint mode {mode.variant.value} needs an h row")
    if consts is not None and not consts.has_h:
        raise ConfigError(f"constraint mode {mode.variant.value} needs h-based constants")


def direction_parts(consts, coeffs, mode, params):
    """Branch coefficients of the direction as a function of the multiplier q."""
    f = coeffs.f
    k1 = params.kappa1
    k2 = params.kappa2
    variant = mode.variant
    if variant is ConstraintVariant.BOTH:
        _require_second(consts, coeffs, mode)
        h = coeffs.h
        det = consts.U * consts.W - consts.V * consts.V
        if det <= _DEGENERACY_TOL * abs(consts.U * consts.W):
            raise DegenerateProblemError("revenue and second constraint gradients are collinear")
        P = f - (consts.G * consts.W - consts.H * consts.V
                 + (consts.H * consts.U - consts.G * consts.V) * h) / det
        R = -((k2 * consts.V - k1 * consts.W) + (k1 * consts.V - k2 * consts.U) * h) / det
        a0 = consts.F - (consts.H ** 2 * consts.U + consts.G ** 2 * consts.W
                         - 2.0 * consts.G * consts.H * consts.V) / det
        a2 = (consts.U * k2 * k2 + consts.W * k1 * k1
              - 2.0 * consts.V * k1 * k2) / det - 1.0
        linear_q = ((consts.G * consts.W - consts.H * consts.V) * k1
                    + (consts.H * consts.U - consts.G * consts.V) * k2) / det
    elif variant is ConstraintVariant.REVENUE_ONLY:
        P = f - consts.G / consts.U
        R = np.full_like(f, k1 / consts.U)
        a0 = consts.F - consts.G ** 2 / consts.U
        a2 = k1 * k1 / consts.U - 1.0
        linear_q = consts.G * k1 / consts.U
    elif variant is ConstraintVariant.SECOND_ONLY:
        _require_second(consts, coeffs, mode)
        h = coeffs.h
        if consts.W <= 0.0:
            raise DegenerateProblemError("second constraint gradient vanishes (W = 0)")
        P = f - consts.H * h / consts.W
        R = k2 * h / consts.W
        a0 = consts.F - consts.H ** 2 / consts.W
        a2 = k2 * k2 / consts.W - 1.0
        linear_q = consts.H * k2 / consts.W
    else:  # NONE_ACTIVE
        P = f.copy()
        R = np.zeros_like(f)
        a0 = consts.F
        a2 = -1.0
        linear_q = 0.0
    return _Branch(P=P, R=R, a0=max(a0, 0.0), a2=a2, linear_q=linear_q)


def _recover_multipliers(consts, mode, params, q):
    k1, k2 = params.kappa1, params.kappa2
    variant = mode.variant
    if variant is ConstraintVariant.BOTH:
        det = consts.U * consts.W - consts.V * consts.V
        s = ((k2 * consts.V - k1 * consts.W) * q + consts.G * consts.W - consts.H * consts.V) / det
        t = ((k1 * consts.V - k2 * consts.U) * q + consts.H * consts.U - consts.G * consts.V) / det
        return s, t
    if variant is ConstraintVariant.REVENUE_ONLY:
        return (consts.G - k1 * q) / consts.U, 0.0
    if variant is ConstraintVariant.SECOND_ONLY:
        return 0.0, (consts.H - k2 * q) / consts.W
    return 0.0, 0.0


def solve_step(consts, coeffs, mode, params, maximize):
    """Solve one projection step; pick the quadratic root per the direction."""
    branch = direction_parts(consts, coeffs, mode, params)
    if branch.a2 >= -_DEGENERACY_TOL:
        raise InfeasibleStepError(
            f"path rates too large for the unit-cost ellipsoid (a2 = {branch.a2:.3e})")
    scale = max(consts.F, 0.0)
    if branch.a0 <= _GRADIENT_TOL * scale or branch.a0 <= 0.0:
        if mode.variant is ConstraintVariant.NONE_ACTIVE:
            raise DegenerateProblemError("zero objective gradient: state is locally optimal")
        raise DegenerateProblemError(
            "objective gradient lies in the constraint span (a0 = 0)")
    q_mag = float(np.sqrt(-branch.a0 / branch.a2))
    q = q_mag if maximize else -q_mag
    c2 = coeffs.c * coeffs.c
    y = (branch.P / q + branch.R) / c2
    big_q = branch.a0 / q + branch.linear_q
    s, t = _recover_multipliers(consts, mode, params, q)
    return StepSolution(y=y, q=q, s=s, t=t, a0=branch.a0, a2=branch.a2,
                        Q=float(big_q), branch_sign=1 if q > 0 else -1)


def objective_rate(solution, consts, mode, params):
    """Closed-form increment ratio Q of the objective per unit cost."""
    variant = mode.variant
    if variant is ConstraintVariant.BOTH:
        det = consts.U * consts.W - consts.V * consts.V
        linear = ((consts.G * consts.W - consts.H * consts.V) * params.kappa1
                  + (consts.H * consts.U - consts.G * consts.V) * params.kappa2) / det
        return solution.a0 / solution.q + linear
    if variant is ConstraintVariant.REVENUE_ONLY:
        return solution.a0 / solution.q + consts.G * params.kappa1 / consts.U
    if variant is ConstraintVariant.SECOND_ONLY:
        return solution.a0 / solution.q + consts.H * params.kappa2 / consts.W
    return consts.F / solution.q


@dataclass(frozen=True)
class ExtremumSolution:
    """Steepest-path rates and multiplier for one extremum subcase."""

    kappa1_bar: float
    kappa2_bar: float
    q_bar: float
    subcase: str


def _signed_root(value, maximize, what, scale):
    if value <= _GRADIENT_TOL * max(scale, 0.0):
        raise DegenerateProblemError(f"extremum branch positivity violated: {what} <= 0")
    root = float(np.sqrt(value))
    return root if maximize else -root


def extremum_kappas(consts, mode, fixed_revenue, fixed_second, maximize):
    """Rates (kappa1, kappa2) at which the objective rate Q is extremal.

    ``fixed_revenue`` / ``fixed_second`` pin the corresponding rate to zero;
    the remaining free rates are set to their closed-form extremum.
    """
    variant = mode.variant
    if variant is ConstraintVariant.BOTH:
        det = consts.U * consts.W - consts.V * consts.V
        if det <= _DEGENERACY_TOL * abs(consts.U * consts.W):
            raise DegenerateProblemError("constraint gradients are collinear")
        if not fixed_revenue and not fixed_second:
            if consts.F <= 0.0:
                raise DegenerateProblemError("F must be positive for the free extremum")
            q_bar = _signed_root(consts.F, maximize, "F", consts.F)
            return ExtremumSolution(kappa1_bar=consts.G / q_bar,
                                    kappa2_bar=consts.H / q_bar,
                                    q_bar=q_bar, subcase="B.1.1")
        if fixed_revenue and not fixed_second:
            q_bar = _signed_root(consts.F - consts.G ** 2 / consts.U, maximize,
                                 "F - G^2/U", consts.F)
            k2 = (consts.H * consts.U - consts.G * consts.V) / (consts.U * q_bar)
            return ExtremumSolution(kappa1_bar=0.0, kappa2_bar=k2, q_bar=q_bar,
                                    subcase="B.1.2")
        if fixed_second and not fixed_revenue:
            if consts.W <= 0.0:
                raise DegenerateProblemError("W must be positive (h vanishes)")
            q_bar = _signed_root(consts.F - consts.H ** 2 / consts.W, maximize,
                                 "F - H^2/W", consts.F)
            k1 = (consts.G * consts.W - consts.H * consts.V) / (consts.W * q_bar)
            return ExtremumSolution(kappa1_bar=k1, kappa2_bar=0.0, q_bar=q_bar,
                                    subcase="B.1.3")
        a0 = consts.F - (consts.H ** 2 * consts.U + consts.G ** 2 * consts.W
                         - 2.0 * consts.G * consts.H * consts.V) / det
        if a0 <= 0.0:
            raise DegenerateProblemError("a0 must be positive with both rates fixed")
        return ExtremumSolution(kappa1_bar=0.0, kappa2_bar=0.0,
                                q_bar=float(np.sqrt(a0)), subcase="B.1.4")
    if variant is ConstraintVariant.REVENUE_ONLY:
        if fixed_revenue:
            return ExtremumSolution(kappa1_bar=0.0, kappa2_bar=0.0,
                                    q_bar=float(np.sqrt(max(consts.F - consts.G ** 2 / consts.U, 0.0))),
                                    subcase="B.2-fixed")
        a0 = consts.F - consts.G ** 2 / consts.U
        if a0 <= _GRADIENT_TOL * max(consts.F, 0.0):
            raise DegenerateProblemError("extremum branch positivity violated: F - G^2/U <= 0")
        q_bar = _signed_root(consts.F, maximize, "F", consts.F)
        return ExtremumSolution(kappa1_bar=consts.G / q_bar, kappa2_bar=0.0,
                                q_bar=q_bar, subcase="B.2")
    if variant is ConstraintVariant.SECOND_ONLY:
        if consts.W <= 0.0:
            raise DegenerateProblemError("W must be positive (h vanishes)")
        if fixed_second:
            return ExtremumSolution(kappa1_bar=0.0, kappa2_bar=0.0,
                                    q_bar=float(np.sqrt(max(consts.F - consts.H ** 2 / consts.W, 0.0))),
                                    subcase="B.3-fixed")
        a0 = consts.F - consts.H ** 2 / consts.W
        if a0 <= _GRADIENT_TOL * max(consts.F, 0.0):
            raise DegenerateProblemError("extremum branch positivity violated: F - H^2/W <= 0")
        q_bar = _signed_root(consts.F, maximize, "F", consts.F)
        return ExtremumSolution(kappa1_bar=0.0, kappa2_bar=consts.H / q_bar,
                                q_bar=q_bar, subcase="B.3")
    if consts.F <= 0.0:
        raise DegenerateProblemError("F must be positive without constraints")
    return ExtremumSolution(kappa1_bar=0.0, kappa2_bar=0.0,
                            q_bar=float(np.sqrt(consts.F)), subcase="B.4")


@dataclass(frozen=True)
class HessianDiagnostic:
    determinant: float
    d2_kappa1: float
    d2_kappa2: float
    is_extremum: bool


def hessian_sign_check(consts, extremum):
    """Second-order diagnostic at the free-rate extremum (subcase B.1.1)."""
    det = consts.U * consts.W - consts.V * consts.V
    a0 = consts.F - (consts.H ** 2 * consts.U + consts.G ** 2 * consts.W
                     - 2.0 * consts.G * consts.H * consts.V) / det
    determinant = consts.F ** 2 / (det * a0)
    q_bar = extremum.q_bar
    d2_k1 = -(consts.W / det + (consts.G * consts.W - consts.H * consts.V) ** 2
              / (det * det * a0)) * q_bar
    d2_k2 = -(consts.U / det + (consts.H * consts.U - consts.G * consts.V) ** 2
              / (det * det * a0)) * q_bar
    is_extremum = determinant > 0.0 and d2_k1 * q_bar < 0.0 and d2_k2 * q_bar < 0.0
    return HessianDiagnostic(determinant=determinant, d2_kappa1=d2_k1,
                             d2_kappa2=d2_k2, is_extremum=is_extremum)
