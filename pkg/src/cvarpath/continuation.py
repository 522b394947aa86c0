"""Path continuation: chained single-step optimizations along the cost parameter.

Each step re-evaluates the risk report at the current weights, rebuilds the
coefficient vectors over the active components, obtains the path rates from
the configured policy, solves the closed-form step, applies the weight
update with optional zero clamping and fixed-risk rescaling, and records the
resulting metrics.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DegenerateProblemError, DomainError, InfeasibleStepError
from .projection import (ConstraintMode, ConstraintVariant, ObjectiveKind, PathParams,
                         constants, effective_problem, extremum_kappas,
                         select_coefficients, solve_step, validate_mode)
from .risk import build_losses, report


@dataclass(frozen=True)
class FixedKappas:
    """Constant path rates applied at every step."""

    kappa1: float = 0.0
    kappa2: float = 0.0


@dataclass(frozen=True)
class ExtremumAutopilot:
    """Re-derive the steepest-path rates from fresh constants at every step.

    A fixed flag pins that rate to zero instead of optimizing over it.
    """

    fixed_revenue: bool = False
    fixed_second: bool = False


@dataclass(frozen=True)
class ContinuationConfig:
    objective: ObjectiveKind
    mode: ConstraintMode
    kappa_policy: object = FixedKappas()
    beta: float = 0.95
    delta_c: float = 1e-4
    total_cost: float = 0.1
    max_steps: int = None
    clamp_nonnegative: bool = True
    fixed_total_risk: bool = False
    steady_state_tol: float = 1e-12
    steady_state_window: int = 50

    def __post_init__(self):
        if self.delta_c <= 0.0:
            raise ConfigError("delta_c must be positive")
        if not 0.0 <= self.beta < 1.0:
            raise ConfigError("beta must be in [0, 1)")
        if self.total_cost < 0.0:
            raise ConfigError("total_cost must be non-negative")
        validate_mode(self.objective, self.mode)

    @property
    def n_steps(self):
        steps = int(round(self.total_cost / self.delta_c))
        if self.max_steps is not None:
            steps = min(steps, self.max_steps)
        return steps


@dataclass(frozen=True)
class PathRecord:
    step: int
    c: float
    kappa1: float
    kappa2: float
    q: float
    Q: float
    weights: np.ndarray
    cvar: float
    total_return: float
    revenue: float
    diversification_index: float
    return_to_risk: float
    cvar_rel: float
    return_rel: float
    revenue_rel: float
    di_rel: float
    re2ri_rel: float
    clamped_ids: tuple
    frozen_count: int
    rescale_factor: float
    tail_signature: tuple


@dataclass(frozen=True)
class ContinuationResult:
    records: list
    terminal_state: object
    reason: str  # budget | steady-state | infeasible-step | all-clamped

    @property
    def terminal_record(self):
        return self.records[-1]


def apply_step(state, y, delta_c, clamp_nonnegative):
    """w_+ = w_- + delta_c * y with full-step zero clamping.

    A component driven to or below zero is set to exactly zero and frozen for
    every later step; already-frozen components never move.
    """
    weights = state.weights + delta_c * np.asarray(y, dtype=float)
    frozen = state.frozen.copy()
    weights[frozen] = 0.0
    newly = ()
    if clamp_nonnegative:
        crossing = (weights <= 0.0) & ~frozen
        if np.any(crossing):
            weights[crossing] = 0.0
            frozen[crossing] = True
            newly = tuple(int(i) for i in np.flatnonzero(crossing))
    return replace(state, weights=weights, frozen=frozen), newly


def rescale_fixed_risk(state, cvar_before, cvar_after):
    """Scale all weights by cvar_before / cvar_after (degree-one homogeneity)."""
    if cvar_after <= 0.0:
        raise DomainError("cannot rescale: CVaR after the step is not positive")
    factor = cvar_before / cvar_after
    return replace(state, weights=state.weights * factor), factor


def _relative(value, base):
    if base == 0.0 or not np.isfinite(base):
        return np.nan
    return value / base


def _make_record(m, c, kappas, q, big_q, state, rep, clamped, factor, base):
    return PathRecord(
        step=m, c=c, kappa1=kappas[0], kappa2=kappas[1], q=q, Q=big_q,
        weights=state.weights.copy(), cvar=rep.cvar, total_return=rep.total_return,
        revenue=rep.revenue, diversification_index=rep.diversification_index,
        return_to_risk=rep.total_return_to_risk,
        cvar_rel=_relative(rep.cvar, base["cvar"]),
        return_rel=_relative(rep.total_return, base["return"]),
        revenue_rel=_relative(rep.revenue, base["revenue"]),
        di_rel=_relative(rep.diversification_index, base["di"]),
        re2ri_rel=_relative(rep.total_return_to_risk, base["re2ri"]),
        clamped_ids=clamped, frozen_count=int(state.frozen.sum()),
        rescale_factor=factor, tail_signature=rep.tail_signature)


def _resolve_kappas(policy, consts, mode, maximize):
    if isinstance(policy, FixedKappas):
        return policy.kappa1, policy.kappa2
    if isinstance(policy, ExtremumAutopilot):
        ext = extremum_kappas(consts, mode, policy.fixed_revenue,
                              policy.fixed_second, maximize)
        return ext.kappa1_bar, ext.kappa2_bar
    raise ConfigError(f"unknown kappa policy {policy!r}")


def run(scenarios, state0, config):
    """Drive the continuation path; returns the full step-by-step record."""
    table = build_losses(scenarios)
    state = state0
    rep = report(table, state, config.beta)
    base = {"cvar": rep.cvar, "return": rep.total_return, "revenue": rep.revenue,
            "di": rep.diversification_index, "re2ri": rep.total_return_to_risk}
    records = [_make_record(0, 0.0, (0.0, 0.0), 0.0, 0.0, state, rep, (), 1.0, base)]
    reason = "budget"
    streak = 0
    for m in range(1, config.n_steps + 1):
        active = state.active
        if not np.any(active):
            reason = "all-clamped"
            break
        _, maximize = effective_problem(config.objective, config.mode)
        try:
            coeffs = select_coefficients(config.objective, state, rep, config.mode)
            consts = constants(coeffs)
            k1, k2 = _resolve_kappas(config.kappa_policy, consts, config.mode, maximize)
            params = PathParams(kappa1=k1, kappa2=k2)
            sol = solve_step(consts, coeffs, config.mode, params, maximize)
        except InfeasibleStepError:
            reason = "infeasible-step"
            break
        except DegenerateProblemError:
            # A vanished gradient or extremum branch means the state is
            # locally stationary; treat it as the path settling down.
            reason = "steady-state"
            break
        y = np.zeros(state.n_groups)
        y[active] = sol.y
        cvar_before = rep.cvar
        state, clamped = apply_step(state, y, config.delta_c, config.clamp_nonnegative)
        if not np.any(state.active):
            rep = report(table, state, config.beta)
            records.append(_make_record(m, m * config.delta_c, (k1, k2), sol.q, sol.Q,
                                        state, rep, clamped, 1.0, base))
            reason = "all-clamped"
            break
        rep = report(table, state, config.beta)
        factor = 1.0
        if config.fixed_total_risk:
            state, factor = rescale_fixed_risk(state, cvar_before, rep.cvar)
            rep = report(table, state, config.beta)
        records.append(_make_record(m, m * config.delta_c, (k1, k2), sol.q, sol.Q,
                                    state, rep, clamped, factor, base))
        rel_change = abs(rep.cvar - cvar_before) / max(abs(cvar_before), 1e-300)
        if rel_change < config.steady_state_tol:
            streak += 1
            if streak >= config.steady_state_window:
                reason = "steady-state"
                break
        else:
            streak = 0
    return ContinuationResult(records=records, terminal_state=state, reason=reason)


@dataclass(frozen=True)
class ConvergenceRow:
    delta_c: float
    terminal_cvar_rel: float
    error: float  # vs the smallest-delta_c reference run; NaN for the reference
    failed: bool
    reason: str


@dataclass(frozen=True)
class ConvergenceTable:
    rows: list
    slope: float  # log-log least-squares slope of error vs delta_c


def convergence_study(scenarios, state0, base_config, delta_c_list, total_cost):
    """Terminal-risk convergence sweep over step sizes (smallest is the reference)."""
    if len(delta_c_list) < 3:
        raise ConfigError("need at least 3 step sizes")
    if any(a <= b for a, b in zip(delta_c_list, delta_c_list[1:])):
        raise ConfigError("step sizes must be sorted in descending order")
    results = []
    for dc in delta_c_list:
        cfg = replace(base_config, delta_c=dc, total_cost=total_cost, max_steps=None)
        try:
            res = run(scenarios, state0, cfg)
            results.append((dc, res.terminal_record.cvar_rel, res.reason, False))
        except Exception as exc:  # partial table with the failure marked
            results.append((dc, np.nan, f"error: {exc}", True))
    reference = results[-1][1]
    rows = []
    errors = []
    for i, (dc, rel, why, failed) in enumerate(results):
        if failed or not np.isfinite(rel):
            rows.append(ConvergenceRow(dc, rel, np.nan, True, why))
            continue
        if i == len(results) - 1:
            rows.append(ConvergenceRow(dc, rel, np.nan, False, why))
            continue
        err = abs(rel - reference)
        rows.append(ConvergenceRow(dc, rel, err, False, why))
        if err > 0.0:
            errors.append((dc, err))
    if len(errors) >= 2:
        log_dc = np.log([e[0] for e in errors])
        log_err = np.log([e[1] for e in errors])
        slope = float(np.polyfit(log_dc, log_err, 1)[0])
    else:
        slope = np.nan
    return ConvergenceTable(rows=rows, slope=slope)
