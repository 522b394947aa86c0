"""Discrete loss distributions, VaR/CVaR with atom splitting, and Euler risk allocation.

All quantities are computed from a scenario matrix of group values and a
weight vector.  Losses are obtained by scaling the recorded loss columns with
``w / w_base`` so the distribution shape is fixed while the allocation moves.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DataError, DomainError

_PROB_TOL = 1e-12
_CDF_SLACK = 1e-12


def _vector(x, name):
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise DataError(f"{name} must be one-dimensional, got shape {arr.shape}")
    return arr


@dataclass
class ScenarioMatrix:
    """K scenario rows of group values plus occurrence likelihoods.

    ``initial_values`` holds the base allocation the scenarios were recorded
    at; losses are measured against it.
    """

    initial_values: np.ndarray
    values: np.ndarray
    probabilities: np.ndarray
    group_ids: tuple = ()

    def __post_init__(self):
        self.initial_values = _vector(self.initial_values, "initial_values")
        self.values = np.asarray(self.values, dtype=float)
        self.probabilities = _vector(self.probabilities, "probabilities")
        if self.values.ndim != 2:
            raise DataError(f"values must be a K x N matrix, got shape {self.values.shape}")
        k, n = self.values.shape
        if n < 2:
            raise DataError(f"need at least 2 groups, got {n}")
        if k < 1:
            raise DataError("need at least 1 scenario row")
        if self.initial_values.shape != (n,):
            raise DataError("initial_values length does not match the number of columns")
        if self.probabilities.shape != (k,):
            raise DataError("probabilities length does not match the number of rows")
        if np.any(self.probabilities <= 0.0):
            raise DataError("all scenario probabilities must be strictly positive")
        total = float(self.probabilities.sum())
        if abs(total - 1.0) > _PROB_TOL:
            raise DataError(f"probabilities must sum to 1 within {_PROB_TOL}, got {total!r}")
        if np.any(self.initial_values <= 0.0):
            raise DataError("all initial group values must be strictly positive")
        if n >= 2 and np.all(self.values == self.values[:, :1]):
            raise DataError("all scenario columns are identical")
        if not self.group_ids:
            self.group_ids = tuple(f"g{i + 1}" for i in range(n))
        else:
            self.group_ids = tuple(str(g) for g in self.group_ids)
            if len(self.group_ids) != n:
                raise DataError("group_ids length does not match the number of columns")

    @property
    def n_groups(self):
        return self.values.shape[1]

    @property
    def n_scenarios(self):
        return self.values.shape[0]


@dataclass
class LossTable:
    """Per-group losses relative to the base allocation, one row per scenario."""

    group_losses: np.ndarray
    probabilities: np.ndarray

    def __post_init__(self):
        self.group_losses = np.asarray(self.group_losses, dtype=float)
        self.probabilities = _vector(self.probabilities, "probabilities")
        if self.group_losses.ndim != 2:
            raise DataError("group_losses must be a K x N matrix")
        if self.probabilities.shape[0] != self.group_losses.shape[0]:
            raise DataError("probabilities length does not match the number of loss rows")


@dataclass
class PortfolioState:
    """Current allocation together with the data needed to re-price it.

    Weights are fractions of ``base_value``; ``base_weights`` is the
    allocation the scenario matrix was recorded at.  ``frozen`` marks
    components clamped to zero and excluded from further adjustment.
    """

    weights: np.ndarray
    returns: np.ndarray
    cost_coefficients: np.ndarray
    base_value: float
    base_weights: np.ndarray
    frozen: np.ndarray = None

    def __post_init__(self):
        self.weights = _vector(self.weights, "weights")
        self.returns = _vector(self.returns, "returns")
        self.cost_coefficients = _vector(self.cost_coefficients, "cost_coefficients")
        self.base_weights = _vector(self.base_weights, "base_weights")
        n = self.weights.shape[0]
        for name, arr in (("returns", self.returns),
                          ("cost_coefficients", self.cost_coefficients),
                          ("base_weights", self.base_weights)):
            if arr.shape != (n,):
                raise DataError(f"{name} length does not match weights")
        if self.frozen is None:
            self.frozen = np.zeros(n, dtype=bool)
        else:
            self.frozen = np.asarray(self.frozen, dtype=bool)
            if self.frozen.shape != (n,):
                raise DataError("frozen mask length does not match weights")
        if np.any(self.cost_coefficients <= 0.0):
            raise DataError("adjustment-cost coefficients must be strictly positive")
        cmin = float(self.cost_coefficients.min())
        cmax = float(self.cost_coefficients.max())
        if cmin / cmax < 1e-6:
            raise DataError("adjustment-cost coefficients are not mutually comparable "
                            f"(min/max ratio {cmin / cmax:.3e} < 1e-6)")
        if np.any(self.base_weights == 0.0):
            raise DomainError("base weights must all be nonzero")
        if np.any((self.weights == 0.0) & ~self.frozen):
            raise DomainError("active weight components must be nonzero")
        self.base_value = float(self.base_value)

    @property
    def n_groups(self):
        return self.weights.shape[0]

    @property
    def active(self):
        return ~self.frozen

    @property
    def revenue(self):
        """Total weight, i.e. allocated fraction of the base value."""
        return float(self.weights.sum())

    @property
    def total_return(self):
        return float(self.returns @ self.weights)


def initial_state(scenarios, returns, cost_coefficients=None):
    """Build the starting state at the recorded allocation (weights sum to 1)."""
    base_value = float(scenarios.initial_values.sum())
    base_weights = scenarios.initial_values / base_value
    n = scenarios.n_groups
    returns = _vector(returns, "returns") if np.ndim(returns) else np.full(n, float(returns))
    if cost_coefficients is None:
        cost_coefficients = np.ones(n)
    elif np.ndim(cost_coefficients) == 0:
        cost_coefficients = np.full(n, float(cost_coefficients))
    state = PortfolioState(weights=base_weights.copy(), returns=returns,
                           cost_coefficients=np.asarray(cost_coefficients, dtype=float),
                           base_value=base_value, base_weights=base_weights)
    if abs(state.revenue - 1.0) > _PROB_TOL:
        raise DataError("initial weights do not sum to 1")
    return state


@dataclass(frozen=True)
class ConfidenceLevel:
    """Confidence level plus the atom-split probability P(Z < VaR)."""

    beta: float
    beta_star: float


@dataclass(frozen=True)
class TailSet:
    """The tail scenario set behind a CVaR evaluation.

    ``weights`` holds the effective probability mass each scenario contributes
    to the tail; scenarios at the VaR atom carry only the split fraction.
    ``signature`` identifies the tail set (strict-tail indices, atom indices,
    atom fraction) for kink detection.
    """

    var: float
    beta: float
    beta_star: float
    beta_star_prime: float
    weights: np.ndarray
    signature: tuple


def build_losses(scenarios):
    """Per-group losses Z[k][n] = initial[n] - value[k][n]."""
    return LossTable(group_losses=scenarios.initial_values[None, :] - scenarios.values,
                     probabilities=scenarios.probabilities.copy())


def scaled_group_losses(table, state):
    """Loss columns rescaled to the current allocation via w / w_base."""
    if np.any(state.base_weights == 0.0):
        raise DomainError("degenerate state: zero base weight")
    scale = state.weights / state.base_weights
    return table.group_losses * scale[None, :]


def portfolio_losses(table, state):
    """Total scenario losses at the current weights (degree-one homogeneous in w)."""
    return scaled_group_losses(table, state).sum(axis=1)


def var(losses, probabilities, beta):
    """Smallest loss level whose CDF reaches ``beta``, with ties merged into atoms."""
    losses = _vector(losses, "losses")
    if losses.size == 0:
        raise DataError("empty loss vector")
    probabilities = _vector(probabilities, "probabilities")
    if probabilities.shape != losses.shape:
        raise DataError("probabilities length does not match losses")
    if not 0.0 <= beta < 1.0:
        raise DomainError(f"confidence level must be in [0, 1), got {beta!r}")
    atoms, inverse = np.unique(losses, return_inverse=True)
    atom_probs = np.bincount(inverse, weights=probabilities)
    cdf = np.cumsum(atom_probs)
    idx = int(np.searchsorted(cdf, beta - _CDF_SLACK, side="left"))
    idx = min(idx, atoms.size - 1)
    return float(atoms[idx])


def tail_split(losses, probabilities, beta):
    """VaR plus the pro-rata tail mass of every scenario (atom split included)."""
    v = var(losses, probabilities, beta)
    losses = np.asarray(losses, dtype=float)
    probabilities = np.asarray(probabilities, dtype=float)
    below = losses < v
    at = losses == v
    above = losses > v
    beta_star = float(probabilities[below].sum())
    atom_mass = float(probabilities[at].sum())
    beta_star_prime = beta_star + atom_mass
    fraction = (beta_star_prime - beta) / atom_mass
    fraction = min(max(fraction, 0.0), 1.0)
    weights = np.where(above, probabilities, 0.0)
    weights[at] = probabilities[at] * fraction
    signature = (tuple(np.flatnonzero(above)), tuple(np.flatnonzero(at)), fraction)
    return TailSet(var=v, beta=beta, beta_star=beta_star,
                   beta_star_prime=beta_star_prime, weights=weights,
                   signature=signature)


def cvar(losses, probabilities, beta):
    """Atom-splitting CVaR: (partial tail expectation + split mass x VaR) / (1 - beta)."""
    ts = tail_split(losses, probabilities, beta)
    return float(ts.weights @ np.asarray(losses, dtype=float)) / (1.0 - beta)


def risk_contributions(table, state, beta):
    """Euler allocation of CVaR over the tail scenario set used by ``cvar``."""
    scaled = scaled_group_losses(table, state)
    total = scaled.sum(axis=1)
    ts = tail_split(total, table.probabilities, beta)
    return (ts.weights @ scaled) / (1.0 - beta)


def dar(contributions, state):
    """Per-unit-weight risk: contribution / weight; NaN for frozen components."""
    contributions = _vector(contributions, "contributions")
    out = np.full(state.n_groups, np.nan)
    active = state.active
    out[active] = contributions[active] / state.weights[active]
    return out


def standalone_cvar(table, state, n, beta):
    """CVaR of the n-th group's scaled loss column on its own."""
    column = table.group_losses[:, n] * (state.weights[n] / state.base_weights[n])
    return cvar(column, table.probabilities, beta)


@dataclass(frozen=True)
class RiskReport:
    """Risk and performance metrics of one portfolio state."""

    var: float
    cvar: float
    contributions: np.ndarray
    dar: np.ndarray
    standalone_cvar: np.ndarray
    diversification_index: float
    total_return: float
    total_return_to_risk: float
    group_return_to_risk: np.ndarray
    revenue: float
    confidence: ConfidenceLevel
    tail_signature: tuple
    frozen: np.ndarray


def report(table, state, beta):
    """Evaluate every risk measure and index at the given state."""
    scaled = scaled_group_losses(table, state)
    total = scaled.sum(axis=1)
    ts = tail_split(total, table.probabilities, beta)
    inv_tail = 1.0 / (1.0 - beta)
    cvar_total = float(ts.weights @ total) * inv_tail
    contributions = (ts.weights @ scaled) * inv_tail
    dar_values = dar(contributions, state)
    standalone = np.array([cvar(scaled[:, n], table.probabilities, beta)
                           for n in range(state.n_groups)])
    standalone_sum = float(standalone.sum())
    diversification = cvar_total / standalone_sum if standalone_sum != 0.0 else np.nan
    total_return = state.total_return
    x0 = state.base_value
    total_re2ri = total_return * x0 / cvar_total if cvar_total != 0.0 else np.nan
    group_values = state.weights * x0
    with np.errstate(divide="ignore", invalid="ignore"):
        group_re2ri = np.where(standalone != 0.0,
                               state.returns * group_values / standalone, np.nan)
    return RiskReport(var=ts.var, cvar=cvar_total, contributions=contributions,
                      dar=dar_values, standalone_cvar=standalone,
                      diversification_index=diversification,
                      total_return=total_return, total_return_to_risk=total_re2ri,
                      group_return_to_risk=group_re2ri, revenue=state.revenue,
                      confidence=ConfidenceLevel(beta=beta, beta_star=ts.beta_star),
                      tail_signature=ts.signature, frozen=state.frozen.copy())
