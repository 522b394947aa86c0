"""Scenario file round-tripping, synthetic scenario generation, run configs,
and the plottable path table."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .continuation import (ContinuationConfig, ContinuationResult, ExtremumAutopilot,
                           FixedKappas)
from .errors import ConfigError, DataError
from .projection import ConstraintMode, ConstraintVariant, ObjectiveKind
from .risk import ScenarioMatrix

_NORMALIZE_BAND = (0.999, 1.001)

PATH_COLUMNS = ("m", "c", "kappa1", "kappa2", "q", "Q", "cvar_rel", "return_rel",
                "revenue_rel", "di_rel", "re2ri_rel", "clamped_count", "rescale_factor")


def _fmt(x):
    return f"{float(x):.17g}"


@dataclass
class ScenarioFile:
    """A parsed scenario file plus its parse diagnostics."""

    path: str
    matrix: ScenarioMatrix
    n_rows: int
    n_groups: int
    has_probabilities: bool
    normalized: bool


def write_scenarios(matrix, path):
    """Serialize with 17 significant digits so a re-read is bit-identical."""
    lines = ["group,prob," + ",".join(matrix.group_ids)]
    lines.append("initial," + ",".join(_fmt(v) for v in matrix.initial_values))
    for k in range(matrix.n_scenarios):
        row = [_fmt(matrix.probabilities[k])]
        row.extend(_fmt(v) for v in matrix.values[k])
        lines.append(",".join(row))
    with open(path, "w") as handle:
        handle.write("\n".join(lines) + "\n")


def _parse_float(token, line_no, what):
    try:
        return float(token)
    except ValueError:
        raise DataError(f"cannot parse {what} {token!r}", line=line_no) from None


def read_scenario_file(path):
    """Parse a scenario file; every rejection names the offending line."""
    with open(path) as handle:
        raw = handle.read().splitlines()
    lines = [(i + 1, line.strip()) for i, line in enumerate(raw) if line.strip()]
    if len(lines) < 3:
        raise DataError("file needs a header, an initial row, and at least one scenario row",
                        line=len(lines) + 1)
    header_no, header = lines[0]
    cells = [c.strip() for c in header.split(",")]
    if cells[0] != "group":
        raise DataError("header must start with 'group'", line=header_no)
    has_prob = len(cells) > 1 and cells[1] == "prob"
    group_ids = cells[2:] if has_prob else cells[1:]
    n = len(group_ids)
    if n < 2:
        raise DataError("need at least 2 group columns", line=header_no)

    init_no, init_line = lines[1]
    init_cells = [c.strip() for c in init_line.split(",")]
    if init_cells[0] != "initial":
        raise DataError("second row must start with 'initial'", line=init_no)
    if len(init_cells) != n + 1:
        raise DataError(f"initial row has {len(init_cells) - 1} values, expected {n}",
                        line=init_no)
    initial = np.array([_parse_float(c, init_no, "initial value") for c in init_cells[1:]])

    values = []
    probs = []
    expected = n + 1 if has_prob else n
    for line_no, line in lines[2:]:
        cells = [c.strip() for c in line.split(",")]
        if len(cells) != expected or any(c == "" for c in cells):
            raise DataError(f"scenario row has {len(cells)} cells, expected {expected}",
                            line=line_no)
        if has_prob:
            p = _parse_float(cells[0], line_no, "probability")
            if p <= 0.0:
                raise DataError(f"nonpositive probability {p!r}", line=line_no)
            probs.append(p)
            cells = cells[1:]
        values.append([_parse_float(c, line_no, "scenario value") for c in cells])
    values = np.asarray(values)
    k = values.shape[0]
    if has_prob:
        probabilities = np.asarray(probs)
        total = float(probabilities.sum())
        normalized = False
        if abs(total - 1.0) > 1e-12:
            if not _NORMALIZE_BAND[0] <= total <= _NORMALIZE_BAND[1]:
                raise DataError(f"probabilities sum to {total!r}, outside the "
                                f"normalization band {_NORMALIZE_BAND}", line=lines[2][0])
            probabilities = probabilities / total
            normalized = True
    else:
        probabilities = np.full(k, 1.0 / k)
        normalized = False
    try:
        matrix = ScenarioMatrix(initial_values=initial, values=values,
                                probabilities=probabilities, group_ids=tuple(group_ids))
    except DataError as exc:
        raise DataError(str(exc), line=header_no) from None
    return ScenarioFile(path=str(path), matrix=matrix, n_rows=k, n_groups=n,
                        has_probabilities=has_prob, normalized=normalized)


def read_scenarios(path):
    return read_scenario_file(path).matrix


@dataclass(frozen=True)
class GeneratorSpec:
    """Synthetic correlated fat-tailed scenario generator parameters.

    ``blocks`` lists (size, correlation) pairs summing to ``n_groups``;
    ``tail`` controls the lognormal shape of the loss marginals (larger is
    heavier and more skewed).  Output is bit-identical per seed (PCG64).
    """

    seed: int
    n_groups: int
    n_scenarios: int
    blocks: tuple = None   # ((size, rho), ...); default: one block, rho = 0.3
    tail: float = 0.5
    loss_scale: float = 0.1
    base_value: float = 100.0

    def __post_init__(self):
        if self.n_groups < 2:
            raise ConfigError("need at least 2 groups")
        if self.n_scenarios < 1:
            raise ConfigError("need at least 1 scenario")
        if self.tail <= 0.0:
            raise ConfigError("tail parameter must be positive")
        if self.loss_scale <= 0.0:
            raise ConfigError("loss_scale must be positive")
        blocks = self.blocks
        if blocks is None:
            blocks = ((self.n_groups, 0.3),)
        blocks = tuple((int(size), float(rho)) for size, rho in blocks)
        if sum(size for size, _ in blocks) != self.n_groups:
            raise ConfigError("block sizes must sum to the group count")
        for size, rho in blocks:
            if size < 1:
                raise ConfigError("block sizes must be positive")
            if not 0.0 <= rho < 1.0:
                raise ConfigError(f"block correlation {rho!r} outside [0, 1) "
                                  "(equicorrelation block not positive semidefinite)")
        object.__setattr__(self, "blocks", blocks)


def generate(spec):
    """Scenario matrix with block-correlated, positively skewed loss marginals."""
    rng = np.random.default_rng(spec.seed)
    k = spec.n_scenarios
    tau = spec.tail
    mean_ln = math.exp(tau * tau / 2.0)
    sd_ln = math.sqrt((math.exp(tau * tau) - 1.0) * math.exp(tau * tau))
    columns = []
    for size, rho in spec.blocks:
        common = rng.standard_normal((k, 1))
        idio = rng.standard_normal((k, size))
        shocks = math.sqrt(rho) * common + math.sqrt(1.0 - rho) * idio
        columns.append((np.exp(tau * shocks) - mean_ln) / sd_ln)
    standardized = np.hstack(columns)
    n = spec.n_groups
    base = np.full(n, spec.base_value / n)
    losses = base[None, :] * spec.loss_scale * standardized
    values = base[None, :] - losses
    probabilities = np.full(k, 1.0 / k)
    return ScenarioMatrix(initial_values=base, values=values, probabilities=probabilities)


@dataclass(frozen=True)
class RunConfig:
    """A flat key=value run file resolved into continuation inputs."""

    scenarios: str
    continuation: ContinuationConfig
    returns: object       # scalar or per-group vector
    costs: object         # scalar or per-group vector
    output: str = None


_OBJECTIVES = {o.value: o for o in ObjectiveKind}
_VARIANTS = {v.value: v for v in ConstraintVariant}
_BOOL = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}

_KNOWN_KEYS = {"scenarios", "objective", "mode", "second", "policy", "kappa1", "kappa2",
               "fix_revenue", "fix_second", "beta", "delta_c", "total_cost", "max_steps",
               "clamp", "fixed_total_risk", "steady_tol", "steady_window",
               "returns", "costs", "output"}
_REQUIRED_KEYS = ("scenarios", "objective", "beta", "delta_c", "total_cost", "returns")


def _parse_bool(value, key):
    try:
        return _BOOL[value.lower()]
    except KeyError:
        raise ConfigError(f"{key}: expected a boolean, got {value!r}") from None


def _parse_vector(value):
    parts = [p for p in value.split(",") if p.strip()]
    if len(parts) == 1:
        return float(parts[0])
    return np.array([float(p) for p in parts])


def parse_run_config(path):
    pairs = {}
    with open(path) as handle:
        for i, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {i}: expected key=value, got {raw.strip()!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in _KNOWN_KEYS:
                raise ConfigError(f"line {i}: unknown key {key!r}")
            if key in pairs:
                raise ConfigError(f"line {i}: duplicate key {key!r}")
            pairs[key] = value
    missing = [k for k in _REQUIRED_KEYS if k not in pairs]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")

    objective = _OBJECTIVES.get(pairs["objective"])
    if objective is None:
        raise ConfigError(f"unknown objective {pairs['objective']!r}")
    variant = _VARIANTS.get(pairs.get("mode", "none"))
    if variant is None:
        raise ConfigError(f"unknown constraint mode {pairs['mode']!r}")
    mode = ConstraintMode(variant=variant, second_meaning=pairs.get("second", "return"))

    policy_name = pairs.get("policy", "fixed")
    if policy_name == "fixed":
        policy = FixedKappas(kappa1=float(pairs.get("kappa1", 0.0)),
                             kappa2=float(pairs.get("kappa2", 0.0)))
    elif policy_name == "extremum":
        policy = ExtremumAutopilot(
            fixed_revenue=_parse_bool(pairs.get("fix_revenue", "false"), "fix_revenue"),
            fixed_second=_parse_bool(pairs.get("fix_second", "false"), "fix_second"))
    else:
        raise ConfigError(f"unknown kappa policy {policy_name!r}")

    try:
        continuation = ContinuationConfig(
            objective=objective, mode=mode, kappa_policy=policy,
            beta=float(pairs["beta"]), delta_c=float(pairs["delta_c"]),
            total_cost=float(pairs["total_cost"]),
            max_steps=int(pairs["max_steps"]) if "max_steps" in pairs else None,
            clamp_nonnegative=_parse_bool(pairs.get("clamp", "true"), "clamp"),
            fixed_total_risk=_parse_bool(pairs.get("fixed_total_risk", "false"),
                                         "fixed_total_risk"),
            steady_state_tol=float(pairs.get("steady_tol", 1e-12)),
            steady_state_window=int(pairs.get("steady_window", 50)))
    except ValueError as exc:
        raise ConfigError(f"bad numeric value: {exc}") from None
    return RunConfig(scenarios=pairs["scenarios"], continuation=continuation,
                     returns=_parse_vector(pairs["returns"]),
                     costs=_parse_vector(pairs.get("costs", "1.0")),
                     output=pairs.get("output"))


def write_path(result, path):
    """One plottable row per continuation step (13 fixed columns)."""
    lines = [",".join(PATH_COLUMNS)]
    for rec in result.records:
        lines.append(",".join([
            str(rec.step), _fmt(rec.c), _fmt(rec.kappa1), _fmt(rec.kappa2),
            _fmt(rec.q), _fmt(rec.Q), _fmt(rec.cvar_rel), _fmt(rec.return_rel),
            _fmt(rec.revenue_rel), _fmt(rec.di_rel), _fmt(rec.re2ri_rel),
            str(rec.frozen_count), _fmt(rec.rescale_factor)]))
    with open(path, "w") as handle:
        handle.write("\n".join(lines) + "\n")
