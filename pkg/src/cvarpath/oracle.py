"""Independent brute-force references for tests and acceptance checks.

Everything here is deliberately slow and structurally different from the
engine: the tail average sorts and accumulates mass from the top instead of
scanning a CDF, the direction search samples the feasible sphere, and the
rate search evaluates the objective rate on a grid.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError, InfeasibleStepError
from .projection import ConstraintVariant
from .risk import portfolio_losses, tail_split

_RANK_TOL = 1e-12


def cvar_tail_average(losses, probabilities, beta):
    """Mass-weighted average of the worst (1 - beta) probability of losses.

    Sorts descending and walks down until the tail mass is filled, splitting
    the boundary scenario pro-rata.  No VaR or CDF machinery involved.
    """
    losses = np.asarray(losses, dtype=float)
    probabilities = np.asarray(probabilities, dtype=float)
    if not 0.0 <= beta < 1.0:
        raise DomainError(f"confidence level must be in [0, 1), got {beta!r}")
    need = 1.0 - beta
    order = np.argsort(-losses, kind="stable")
    remaining = need
    acc = 0.0
    for i in order:
        take = min(float(probabilities[i]), remaining)
        acc += take * float(losses[i])
        remaining -= take
        if remaining <= 1e-15:
            break
    return acc / need


@dataclass(frozen=True)
class DirectionSample:
    """Extremes of the objective over sampled feasible directions."""

    max_Q: float
    max_y: np.ndarray
    min_Q: float
    min_y: np.ndarray
    samples: int
    seed: int


def best_feasible_direction(coeffs, mode, params, samples=100_000, seed=0):
    """Sample the feasible set {y : constraints hold, sum c^2 y^2 = 1} uniformly.

    Works in u = c * y coordinates where the cost ellipsoid is the unit
    sphere: the affine constraint set is split into its least-norm particular
    solution and an orthonormal null-space basis, and directions are drawn
    uniformly on the residual sphere.
    """
    c = coeffs.c
    f_over_c = coeffs.f / c
    rows = []
    rhs = []
    if mode.variant in (ConstraintVariant.BOTH, ConstraintVariant.REVENUE_ONLY):
        rows.append(1.0 / c)
        rhs.append(params.kappa1)
    if mode.variant in (ConstraintVariant.BOTH, ConstraintVariant.SECOND_ONLY):
        rows.append(coeffs.h / c)
        rhs.append(params.kappa2)
    n = c.shape[0]
    if rows:
        a = np.vstack(rows)
        b = np.asarray(rhs)
        u_mat, sing, v_mat = np.linalg.svd(a, full_matrices=True)
        rank = int(np.sum(sing > _RANK_TOL * sing[0]))
        # least-norm particular solution via the pseudo-inverse
        u0 = v_mat[:rank].T @ ((u_mat[:, :rank].T @ b) / sing[:rank])
        basis = v_mat[rank:]
    else:
        u0 = np.zeros(n)
        basis = np.eye(n)
    radius_sq = 1.0 - float(u0 @ u0)
    if radius_sq <= 0.0 or basis.shape[0] == 0:
        raise InfeasibleStepError("feasible direction set is empty or a single point")
    radius = np.sqrt(radius_sq)
    rng = np.random.default_rng(seed)
    gauss = rng.standard_normal((samples, basis.shape[0]))
    norms = np.linalg.norm(gauss, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    z = radius * gauss / norms
    base_q = float(f_over_c @ u0)
    proj = basis @ f_over_c
    q_values = base_q + z @ proj
    i_max = int(np.argmax(q_values))
    i_min = int(np.argmin(q_values))
    y_max = (u0 + basis.T @ z[i_max]) / c
    y_min = (u0 + basis.T @ z[i_min]) / c
    return DirectionSample(max_Q=float(q_values[i_max]), max_y=y_max,
                           min_Q=float(q_values[i_min]), min_y=y_min,
                           samples=samples, seed=seed)


def _rate_value(consts, variant, k1, k2, maximize):
    """Closed-form Q at given rates, or None where the step is infeasible."""
    if variant is ConstraintVariant.BOTH:
        det = consts.U * consts.W - consts.V * consts.V
        a0 = consts.F - (consts.H ** 2 * consts.U + consts.G ** 2 * consts.W
                         - 2.0 * consts.G * consts.H * consts.V) / det
        a2 = (consts.U * k2 * k2 + consts.W * k1 * k1 - 2.0 * consts.V * k1 * k2) / det - 1.0
        linear = ((consts.G * consts.W - consts.H * consts.V) * k1
                  + (consts.H * consts.U - consts.G * consts.V) * k2) / det
    elif variant is ConstraintVariant.REVENUE_ONLY:
        a0 = consts.F - consts.G ** 2 / consts.U
        a2 = k1 * k1 / consts.U - 1.0
        linear = consts.G * k1 / consts.U
    elif variant is ConstraintVariant.SECOND_ONLY:
        a0 = consts.F - consts.H ** 2 / consts.W
        a2 = k2 * k2 / consts.W - 1.0
        linear = consts.H * k2 / consts.W
    else:
        a0 = consts.F
        a2 = -1.0
        linear = 0.0
    if a2 >= -1e-12 or a0 <= 0.0:
        return None
    q = np.sqrt(-a0 / a2)
    if not maximize:
        q = -q
    return a0 / q + linear


@dataclass(frozen=True)
class GridSearchResult:
    kappa1: float
    kappa2: float
    Q: float
    grid_step: float


def kappa_grid_search(consts, mode, grid_step, bounds, maximize=True,
                      fix_revenue=False, fix_second=False):
    """Best objective rate over a rate grid; infeasible grid points are skipped.

    ``bounds`` is ((k1_lo, k1_hi), (k2_lo, k2_hi)); a fixed axis collapses to 0.
    """
    (k1_lo, k1_hi), (k2_lo, k2_hi) = bounds

    def axis(lo, hi):
        count = int(np.floor((hi - lo) / grid_step + 1e-9)) + 1
        return lo + grid_step * np.arange(count)

    variant = mode.variant
    k1_axis = np.array([0.0])
    k2_axis = np.array([0.0])
    if variant in (ConstraintVariant.BOTH, ConstraintVariant.REVENUE_ONLY) and not fix_revenue:
        k1_axis = axis(k1_lo, k1_hi)
    if variant in (ConstraintVariant.BOTH, ConstraintVariant.SECOND_ONLY) and not fix_second:
        k2_axis = axis(k2_lo, k2_hi)
    best = None
    for k1 in k1_axis:
        for k2 in k2_axis:
            value = _rate_value(consts, variant, float(k1), float(k2), maximize)
            if value is None:
                continue
            if best is None or (value > best[2] if maximize else value < best[2]):
                best = (float(k1), float(k2), value)
    if best is None:
        raise InfeasibleStepError("no feasible grid point")
    return GridSearchResult(kappa1=best[0], kappa2=best[1], Q=best[2], grid_step=grid_step)


@dataclass(frozen=True)
class FiniteDifference:
    value: float
    kink: bool  # tail scenario set changed between the two evaluations


def finite_difference_dar(table, state, beta, n, epsilon):
    """Central difference of portfolio CVaR in one weight; flags tail-set kinks."""
    if epsilon <= 0.0:
        raise DomainError("epsilon must be positive")

    def evaluate(shift):
        weights = state.weights.copy()
        weights[n] += shift
        bumped = replace(state, weights=weights)
        losses = portfolio_losses(table, bumped)
        ts = tail_split(losses, table.probabilities, beta)
        value = float(ts.weights @ losses) / (1.0 - beta)
        return value, ts.signature

    up, sig_up = evaluate(epsilon)
    down, sig_down = evaluate(-epsilon)
    return FiniteDifference(value=(up - down) / (2.0 * epsilon), kink=sig_up != sig_down)
