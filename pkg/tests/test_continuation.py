"""Path driver: stepping, clamping, rescaling, termination, convergence."""
import dataclasses

import numpy as np
import pytest

from cvarpath import (
    ConfigError,
    ConstraintMode,
    ConstraintVariant,
    ContinuationConfig,
    ExtremumAutopilot,
    FixedKappas,
    ObjectiveKind,
    ScenarioMatrix,
    apply_step,
    build_losses,
    convergence_study,
    cvar,
    initial_state,
    portfolio_losses,
    rescale_fixed_risk,
    run,
)
from conftest import small_portfolio

REV = ConstraintMode(ConstraintVariant.REVENUE_ONLY)
NONE = ConstraintMode(ConstraintVariant.NONE_ACTIVE)


def dominance_matrix():
    """Two groups, identical loss shape, group 2 twice as lossy as group 1."""
    rng = np.random.default_rng(4)
    k = 200
    shocks = np.abs(rng.normal(0.0, 1.0, k)) + 0.1
    initial = np.array([10.0, 10.0])
    losses = np.column_stack([shocks, 2.0 * shocks])
    values = initial[None, :] - losses
    return ScenarioMatrix(initial_values=initial, values=values,
                          probabilities=np.full(k, 1.0 / k))


class TestRunBasics:
    def test_zero_steps_single_record(self):
        matrix, state = small_portfolio()
        cfg = ContinuationConfig(objective=ObjectiveKind.MIN_RISK, mode=REV,
                                 kappa_policy=FixedKappas(), beta=0.9,
                                 delta_c=1e-3, total_cost=0.0)
        res = run(matrix, state, cfg)
        assert len(res.records) == 1
        assert res.records[0].step == 0
        np.testing.assert_array_equal(res.terminal_state.weights, state.weights)

    def test_initial_ratios_are_one(self):
        matrix, state = small_portfolio()
        cfg = ContinuationConfig(objective=ObjectiveKind.MIN_RISK, mode=REV,
                                 kappa_policy=FixedKappas(), beta=0.9,
                                 delta_c=1e-3, total_cost=0.01)
        rec0 = run(matrix, state, cfg).records[0]
        for value in (rec0.cvar_rel, rec0.return_rel, rec0.revenue_rel,
                      rec0.di_rel, rec0.re2ri_rel):
            assert value == pytest.approx(1.0, abs=1e-15)

    def test_cost_grid_and_budget_accounting(self):
        matrix, state = small_portfolio()
        cfg = ContinuationConfig(objective=ObjectiveKind.MIN_RISK, mode=REV,
                                 kappa_policy=FixedKappas(), beta=0.9,
                                 delta_c=1e-3, total_cost=0.02)
        res = run(matrix, state, cfg)
        for rec in res.records:
            assert rec.c == pytest.approx(rec.step * cfg.delta_c, abs=1e-12)
        executed = len(res.records) - 1
        assert res.terminal_record.c == pytest.approx(executed * cfg.delta_c, abs=1e-12)

    def test_dominated_group_is_sold_down(self):
        """With equal returns and one strictly lossier group, weight flows
        monotonically to the dominating group until the other clamps."""
        matrix = dominance_matrix()
        state = initial_state(matrix, 0.05)
        cfg = ContinuationConfig(objective=ObjectiveKind.MIN_RISK, mode=REV,
                                 kappa_policy=FixedKappas(), beta=0.9,
                                 delta_c=5e-3, total_cost=2.0)
        res = run(matrix, state, cfg)
        w2 = [rec.weights[1] for rec in res.records]
        assert all(b <= a + 1e-15 for a, b in zip(w2, w2[1:]))
        assert res.reason in ("steady-state", "infeasible-step")
        assert res.terminal_state.frozen[1]
        assert res.terminal_state.weights[1] == 0.0
        # grid search over the revenue-preserving slice w = (1 - t, t)
        table = build_losses(matrix)

        def slice_cvar(t):
            scale = np.array([1.0 - t, t]) / state.base_weights
            losses = table.group_losses @ scale
            return float(cvar(losses, table.probabilities, 0.9))

        best = min((slice_cvar(t), t) for t in np.linspace(0.0, 0.5, 201))
        assert best[1] == 0.0  # the slice optimum drops group 2 entirely
        # terminal CVaR matches the slice optimum scaled to the terminal revenue
        w1 = res.terminal_state.weights[0]
        assert res.terminal_record.cvar == pytest.approx(w1 * best[0], rel=1e-9)


class TestBookkeeping:
    def test_revenue_changes_by_kappa1_rate(self):
        matrix, state = small_portfolio(seed=21)
        kappa1 = 0.4
        cfg = ContinuationConfig(objective=ObjectiveKind.MIN_RISK, mode=REV,
                                 kappa_policy=FixedKappas(kappa1=kappa1), beta=0.9,
                                 delta_c=1e-4, total_cost=0.005)
        res = run(matrix, state, cfg)
        for prev, cur in zip(res.records, res.records[1:]):
            if cur.clamped_ids:
                break  # clamping rounds the crossing weight to zero
            got = cur.weights.sum() - prev.weights.sum()
            assert got == pytest.approx(cfg.delta_c * kappa1, abs=1e-10)

    def test_clamped_components_never_return(self):
        matrix = dominance_matrix()
        state = initial_state(matrix, 0.05)
        cfg = ContinuationConfig(objective=ObjectiveKind.MIN_RISK, mode=REV,
                                 kappa_policy=FixedKappas(), beta=0.9,
                                 delta_c=5e-3, total_cost=2.0)
        res = run(matrix, state, cfg)
        clamped_at = None
        for rec in res.records:
            if clamped_at is None and rec.frozen_count:
                clamped_at = rec.step
            if clamped_at is not None:
                assert rec.weights[1] == 0.0

    def test_max_return_is_monotone(self):
        matrix, state = small_portfolio(seed=33)
        cfg = ContinuationConfig(objective=ObjectiveKind.MAX_RETURN, mode=NONE,
                                 kappa_policy=FixedKappas(), beta=0.9,
                                 delta_c=1e-3, total_cost=0.05)
        res = run(matrix, state, cfg)
        returns = [rec.total_return for rec in res.records]
        assert all(b >= a - 1e-15 for a, b in zip(returns, returns[1:]))

    def test_fixed_total_risk_holds_cvar(self):
        matrix, state = small_portfolio(seed=35)
        cfg = ContinuationConfig(objective=ObjectiveKind.MAX_RETURN, mode=NONE,
                                 kappa_policy=FixedKappas(), beta=0.9,
                                 delta_c=1e-3, total_cost=0.05, fixed_total_risk=True)
        res = run(matrix, state, cfg)
        base = res.records[0].cvar
        for rec in res.records:
            assert abs(rec.cvar / base - 1.0) <= 1e-6


class TestStepPrimitives:
    def test_apply_step_clamps_to_exact_zero(self):
        _, state = small_portfolio()
        y = np.zeros(state.n_groups)
        y[0] = -(state.weights[0] / 1e-3) * 1.5  # overshoot through zero
        new, clamped = apply_step(state, y, 1e-3, clamp_nonnegative=True)
        assert clamped == (0,)
        assert new.weights[0] == 0.0
        assert new.frozen[0]
        np.testing.assert_allclose(new.weights[1:], state.weights[1:] + 1e-3 * y[1:])

    def test_apply_step_without_clamp(self):
        _, state = small_portfolio()
        y = np.zeros(state.n_groups)
        y[0] = -(state.weights[0] / 1e-3) * 1.5
        new, clamped = apply_step(state, y, 1e-3, clamp_nonnegative=False)
        assert clamped == ()
        assert new.weights[0] < 0.0

    def test_frozen_components_do_not_move(self):
        _, state = small_portfolio()
        frozen = state.frozen.copy()
        frozen[2] = True
        weights = state.weights.copy()
        weights[2] = 0.0
        state = dataclasses.replace(state, weights=weights, frozen=frozen)
        new, _ = apply_step(state, np.ones(state.n_groups), 1e-3, True)
        assert new.weights[2] == 0.0

    def test_rescale_factor(self):
        _, state = small_portfolio()
        new, factor = rescale_fixed_risk(state, 2.0, 4.0)
        assert factor == pytest.approx(0.5)
        np.testing.assert_allclose(new.weights, state.weights * 0.5)


class TestTermination:
    def test_steady_state_detection(self):
        """A tolerance above every per-step change trips the window counter."""
        matrix, state = small_portfolio(seed=41)
        cfg = ContinuationConfig(objective=ObjectiveKind.MIN_RISK, mode=REV,
                                 kappa_policy=FixedKappas(), beta=0.9,
                                 delta_c=1e-4, total_cost=0.05,
                                 steady_state_tol=1e9, steady_state_window=5)
        res = run(matrix, state, cfg)
        assert res.reason == "steady-state"
        assert len(res.records) == 6

    def test_infeasible_rates_terminate(self):
        matrix, state = small_portfolio(seed=43)
        cfg = ContinuationConfig(objective=ObjectiveKind.MIN_RISK, mode=REV,
                                 kappa_policy=FixedKappas(kappa1=1e6), beta=0.9,
                                 delta_c=1e-3, total_cost=0.01)
        res = run(matrix, state, cfg)
        assert res.reason == "infeasible-step"
        assert len(res.records) == 1

    def test_budget_termination(self):
        matrix, state = small_portfolio(seed=47)
        cfg = ContinuationConfig(objective=ObjectiveKind.MIN_RISK, mode=REV,
                                 kappa_policy=FixedKappas(), beta=0.9,
                                 delta_c=1e-3, total_cost=0.005, steady_state_tol=0.0)
        res = run(matrix, state, cfg)
        assert res.reason == "budget"
        assert res.terminal_record.step == 5

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            ContinuationConfig(objective=ObjectiveKind.MIN_RISK, mode=REV, delta_c=0.0)
        with pytest.raises(ConfigError):
            ContinuationConfig(objective=ObjectiveKind.MIN_RISK, mode=REV, beta=1.0)
        with pytest.raises(ConfigError):
            ContinuationConfig(objective=ObjectiveKind.MIN_RISK,
                               mode=ConstraintMode(ConstraintVariant.BOTH, "risk"))


class TestConvergence:
    def base_config(self):
        return ContinuationConfig(objective=ObjectiveKind.MIN_RISK, mode=REV,
                                  kappa_policy=FixedKappas(), beta=0.9,
                                  delta_c=1e-3, total_cost=0.01, steady_state_tol=0.0)

    def test_equal_step_sizes_rejected(self):
        matrix, state = small_portfolio(seed=51)
        with pytest.raises(ConfigError):
            convergence_study(matrix, state, self.base_config(),
                              [1e-2, 1e-2, 1e-3], 0.01)
        with pytest.raises(ConfigError):
            convergence_study(matrix, state, self.base_config(), [1e-2, 1e-3], 0.01)

    def test_reference_row_has_no_error(self):
        matrix, state = small_portfolio(seed=53)
        table = convergence_study(matrix, state, self.base_config(),
                                  [1e-2, 1e-3, 1e-4], 0.01)
        assert np.isnan(table.rows[-1].error)
        assert all(np.isfinite(row.error) for row in table.rows[:-1])

    def test_exact_linear_error_fits_slope_one(self):
        """Log-log regression recovers the exponent of an exact power law."""
        deltas = np.array([1e-2, 1e-3, 1e-4])
        errors = 3.7 * deltas  # error = A * delta_c exactly
        slope = float(np.polyfit(np.log(deltas), np.log(errors), 1)[0])
        assert slope == pytest.approx(1.0, abs=1e-12)
