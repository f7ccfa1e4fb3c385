"""Iteration drivers for the three stochastic solvers, with metric tracing.

- ``crsqn``: regularized sampled gradient, direction (B^-1 + delta_k I),
  curvature matrix and mu refreshed on even iterations only; all three
  tuning sequences come from a PowerLawSchedule.
- ``res``: the same machinery with constant mu and delta, the matrix
  refreshed every iteration, and gamma_k = gamma0/(k+1).
- ``sa``: plain stochastic gradient descent with gamma_k = gamma0/(k+1).

Every run owns its seeded generator; identical (config, oracle, seed) give
bit-identical traces. Even iterations cost two sampled gradient evaluations
(the drawn sample is re-evaluated at the new iterate for the matrix update);
the per-record ``grad_evals`` field keeps that asymmetry observable.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .hessian import CyclicBfgsState
from .oracles import StochasticOracle
from .schedules import PowerLawSchedule, bound_condition_onset, validate_almost_sure, validate_mean

logger = logging.getLogger(__name__)

# A regularized sampled gradient this small triggers the even-iteration
# resampling safeguard.
ZERO_DIRECTION_TOL = 1e-14

ALGORITHMS = ("crsqn", "res", "sa")

__all__ = [
    "ALGORITHMS",
    "SolverConfig",
    "SolverState",
    "TraceRecord",
    "RunTrace",
    "ComparisonRow",
    "ConfigInvalidError",
    "NonFiniteIterateError",
    "MissingErrorColumnError",
    "step_crsqn",
    "step_res",
    "step_sa",
    "run",
    "estimate_theta",
    "compare",
]


class ConfigInvalidError(ValueError):
    """Solver configuration fails its invariants."""


class NonFiniteIterateError(FloatingPointError):
    """An iterate picked up a non-finite entry."""


class MissingErrorColumnError(ValueError):
    """The trace has no usable known-optimum gap column."""


@dataclass(frozen=True)
class SolverConfig:
    """Algorithm choice, tuning parameters, safeguards, and the RNG seed.

    ``schedule`` drives crsqn; res/sa use the ``gamma0``/``mu``/``delta``
    constants instead. ``x0`` defaults to the zero vector.
    """

    algorithm: str
    schedule: PowerLawSchedule | None = None
    gamma0: float | None = None
    mu: float | None = None
    delta: float | None = None
    rho: float = 0.9
    iterations: int = 1000
    seed: int = 0
    eval_every: int = 100
    safeguard_retries: int = 8
    x0: tuple[float, ...] | None = None
    name: str | None = None

    def validate(self, dim: int | None = None) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ConfigInvalidError(f"unknown algorithm {self.algorithm!r}")
        if self.iterations < 1:
            raise ConfigInvalidError("iterations must be >= 1")
        if self.eval_every < 1:
            raise ConfigInvalidError("eval_every must be >= 1")
        if self.safeguard_retries < 0:
            raise ConfigInvalidError("safeguard_retries must be >= 0")
        if self.algorithm == "crsqn":
            if self.schedule is None:
                raise ConfigInvalidError("crsqn needs a schedule")
        else:
            if self.gamma0 is None or self.gamma0 <= 0.0:
                raise ConfigInvalidError(f"{self.algorithm} needs gamma0 > 0")
            if self.algorithm == "res" and (
                self.mu is None or self.mu <= 0.0 or self.delta is None or self.delta <= 0.0
            ):
                raise ConfigInvalidError("res needs mu > 0 and delta > 0")
        if self.algorithm in ("crsqn", "res") and not 0.0 < self.rho < 1.0:
            raise ConfigInvalidError("rho must lie in (0, 1)")
        if self.x0 is not None:
            x0 = np.asarray(self.x0, dtype=np.float64)
            if x0.ndim != 1 or not np.all(np.isfinite(x0)):
                raise ConfigInvalidError("x0 must be a finite 1-D vector")
            if dim is not None and x0.shape[0] != dim:
                raise ConfigInvalidError(f"x0 has length {x0.shape[0]}, oracle dim is {dim}")


class SolverState:
    """Current iterate, iteration counter, curvature state, and RNG."""

    __slots__ = ("x", "k", "bfgs", "rng", "status")

    def __init__(self, x: np.ndarray, rng: np.random.Generator, bfgs: CyclicBfgsState | None = None):
        self.x = x
        self.k = 0
        self.bfgs = bfgs
        self.rng = rng
        self.status = "running"


@dataclass(slots=True)
class TraceRecord:
    """One iteration's metrics. ``loss``/``gap`` only at evaluation points;
    secant fields only on iterations that updated the curvature matrix.
    ``wall_time`` is diagnostic only: excluded from equality and never
    persisted, so trace files stay deterministic."""

    k: int
    gamma: float | None = None
    delta: float | None = None
    mu: float | None = None
    sample_id: int | None = None
    grad_evals: int = 0
    secant_residual: float | None = None
    y_reg_norm: float | None = None
    skipped: bool | None = None
    loss: float | None = None
    gap: float | None = None
    wall_time: float | None = field(default=None, compare=False)


@dataclass
class RunTrace:
    """Per-iteration records, terminal status, final iterate, and the config echo."""

    records: list[TraceRecord]
    status: str
    config: SolverConfig
    final_x: tuple[float, ...] = ()

    def loss_points(self) -> list[tuple[int, float]]:
        return [(r.k, r.loss) for r in self.records if r.loss is not None]

    def gap_points(self) -> list[tuple[int, float]]:
        return [(r.k, r.gap) for r in self.records if r.gap is not None]

    def final_loss(self) -> float:
        return self.records[-1].loss


@dataclass(frozen=True)
class ComparisonRow:
    """One row of an algorithm-comparison table."""

    algorithm: str
    parameter: str
    mean_loss: float
    std_loss: float
    n_seeds: int


def _ensure_finite(x: np.ndarray, k: int) -> None:
    if not np.all(np.isfinite(x)):
        raise NonFiniteIterateError(f"iterate became non-finite at iteration {k}")


def _draw_nonzero(state, oracle, mu: float, retries: int):
    """Sample until the regularized gradient is nonzero, up to ``retries`` redraws."""
    ev = oracle.sample_gradient(state.x, state.rng)
    evals = 1
    g = ev.gradient + mu * state.x
    while math.sqrt(float(g @ g)) <= ZERO_DIRECTION_TOL:
        if evals > retries:
            return None, None, evals
        ev = oracle.sample_gradient(state.x, state.rng)
        evals += 1
        g = ev.gradient + mu * state.x
    return ev, g, evals


def _update_step(state, oracle, gamma: float, delta: float, mu: float, retries: int):
    """Shared step-then-update body for crsqn even iterations and every res iteration."""
    k = state.k
    ev, g, evals = _draw_nonzero(state, oracle, mu, retries)
    if ev is None:
        state.status = "stationary"
        return None
    x_new = state.x - gamma * state.bfgs.apply_direction(delta, g)
    _ensure_finite(x_new, k)
    grad_new = oracle.per_sample_gradient(x_new, ev.sample_id)
    evals += 1
    report = state.bfgs.update_even(x_new - state.x, grad_new - ev.gradient, mu)
    state.x = x_new
    state.k = k + 1
    return TraceRecord(
        k=k,
        gamma=gamma,
        delta=delta,
        mu=mu,
        sample_id=ev.sample_id,
        grad_evals=evals,
        secant_residual=report.secant_residual,
        y_reg_norm=report.y_reg_norm,
        skipped=report.skipped,
    )


def step_crsqn(
    state: SolverState,
    oracle: StochasticOracle,
    schedule: PowerLawSchedule,
    retries: int = 8,
) -> TraceRecord | None:
    """One crsqn iteration; returns its trace record, or None on stationarity.

    Even k: step, then refresh the curvature matrix with the same sample
    evaluated at both iterates (two gradient evaluations). Odd k: step only.
    """
    k = state.k
    gamma = schedule.gamma(k)
    delta = schedule.delta(k)
    mu = schedule.mu(k)
    if k % 2 == 0:
        return _update_step(state, oracle, gamma, delta, mu, retries)
    ev = oracle.sample_gradient(state.x, state.rng)
    g = ev.gradient + mu * state.x
    x_new = state.x - gamma * state.bfgs.apply_direction(delta, g)
    _ensure_finite(x_new, k)
    state.bfgs.copy_odd()
    state.x = x_new
    state.k = k + 1
    return TraceRecord(k=k, gamma=gamma, delta=delta, mu=mu, sample_id=ev.sample_id, grad_evals=1)


def step_res(
    state: SolverState,
    oracle: StochasticOracle,
    mu: float,
    delta: float,
    gamma_k: float,
    retries: int = 8,
) -> TraceRecord | None:
    """One res iteration: constant mu/delta, matrix refreshed every iteration."""
    return _update_step(state, oracle, gamma_k, delta, mu, retries)


def step_sa(state: SolverState, oracle: StochasticOracle, gamma_k: float) -> TraceRecord:
    """One stochastic-gradient iteration."""
    k = state.k
    ev = oracle.sample_gradient(state.x, state.rng)
    x_new = state.x - gamma_k * ev.gradient
    _ensure_finite(x_new, k)
    state.x = x_new
    state.k = k + 1
    return TraceRecord(k=k, gamma=gamma_k, sample_id=ev.sample_id, grad_evals=1)


def _warn_if_infeasible(schedule: PowerLawSchedule) -> None:
    report = validate_almost_sure(schedule)
    if report.valid:
        return
    names = ", ".join(c.name for c in report.violations)
    if validate_mean(schedule).valid:
        logger.warning(
            "schedule fails the almost-sure feasibility conditions (%s) but "
            "passes the mean-convergence conditions; running anyway",
            names,
        )
    else:
        logger.warning("schedule fails both feasibility validators (%s); running anyway", names)


def _schedule_columns(config: SolverConfig, k: int):
    if config.algorithm == "crsqn":
        s = config.schedule
        return s.gamma(k), s.delta(k), s.mu(k)
    gamma = config.gamma0 / (k + 1.0)
    if config.algorithm == "res":
        return gamma, config.delta, config.mu
    return gamma, None, None


def run(oracle: StochasticOracle, config: SolverConfig) -> RunTrace:
    """Execute a configured run and return its trace.

    The full loss is evaluated at k = 0, every ``eval_every`` iterations,
    and at the final iterate; when the oracle knows its optimal value the
    gap column is filled alongside. Deterministic given (oracle, config).
    """
    config.validate(oracle.dim)
    if config.algorithm == "crsqn":
        _warn_if_infeasible(config.schedule)
    rng = np.random.default_rng(config.seed)
    x0 = np.zeros(oracle.dim) if config.x0 is None else np.asarray(config.x0, dtype=np.float64)
    bfgs = None
    if config.algorithm in ("crsqn", "res"):
        mu0 = config.schedule.mu(0) if config.algorithm == "crsqn" else config.mu
        bfgs = CyclicBfgsState(oracle.dim, mu0, config.rho)
    state = SolverState(x=x0.copy(), rng=rng, bfgs=bfgs)
    f_star = getattr(oracle, "f_star", None)
    started = time.perf_counter()

    records: list[TraceRecord] = []
    for k in range(config.iterations):
        loss = oracle.full_loss(state.x) if k % config.eval_every == 0 else None
        if config.algorithm == "crsqn":
            record = step_crsqn(state, oracle, config.schedule, config.safeguard_retries)
        elif config.algorithm == "res":
            gamma_k = config.gamma0 / (k + 1.0)
            record = step_res(state, oracle, config.mu, config.delta, gamma_k, config.safeguard_retries)
        else:
            record = step_sa(state, oracle, config.gamma0 / (k + 1.0))
        if record is None:
            break
        if loss is not None:
            record.loss = loss
            if f_star is not None:
                record.gap = loss - f_star
        record.wall_time = time.perf_counter() - started
        records.append(record)

    gamma, delta, mu = _schedule_columns(config, state.k)
    final_loss = oracle.full_loss(state.x)
    records.append(
        TraceRecord(
            k=state.k,
            gamma=gamma,
            delta=delta,
            mu=mu,
            loss=final_loss,
            gap=None if f_star is None else final_loss - f_star,
            wall_time=time.perf_counter() - started,
        )
    )
    status = "stationary" if state.status == "stationary" else "finished"
    state.status = status
    return RunTrace(records=records, status=status, config=config, final_x=tuple(state.x))


def estimate_theta(
    trace: RunTrace,
    schedule: PowerLawSchedule,
    lipschitz: float | None = None,
    rho: float | None = None,
) -> float:
    """Empirical certificate for the expected-error bound constant.

    Returns max over recorded k of gap_k * mu_k^3 * delta_k / gamma_k,
    restricted to iterations at or past the bound-condition onset when a
    Lipschitz constant is supplied (rho defaults from the trace's config).
    """
    points = [(r.k, r.gap) for r in trace.records if r.gap is not None and r.k >= 1]
    if not points:
        raise MissingErrorColumnError("trace has no known-optimum gap column")
    if lipschitz is not None:
        onset = bound_condition_onset(schedule, lipschitz, trace.config.rho if rho is None else rho)
        points = [(k, gap) for k, gap in points if k >= onset]
        if not points:
            raise MissingErrorColumnError(f"no recorded gaps at or past onset k={onset}")
    return max(gap * schedule.mu(k) ** 3 * schedule.delta(k) / schedule.gamma(k) for k, gap in points)


def _parameter_label(config: SolverConfig) -> str:
    if config.name:
        return config.name
    if config.algorithm == "crsqn":
        return f"gamma0={config.schedule.gamma0:g},mu0={config.schedule.mu0:g}"
    if config.algorithm == "res":
        return f"gamma0={config.gamma0:g},mu={config.mu:g}"
    return f"gamma0={config.gamma0:g}"


def compare(
    oracle: StochasticOracle,
    configs: list[SolverConfig],
    seeds: list[int] | None = None,
) -> list[ComparisonRow]:
    """Run each config (over ``seeds``, or its own seed) and tabulate final losses."""
    rows = []
    for config in configs:
        seed_list = [config.seed] if seeds is None else list(seeds)
        finals = np.array(
            [run(oracle, replace(config, seed=int(s))).final_loss() for s in seed_list]
        )
        rows.append(
            ComparisonRow(
                algorithm=config.algorithm,
                parameter=_parameter_label(config),
                mean_loss=float(finals.mean()),
                std_loss=float(finals.std()),
                n_seeds=len(seed_list),
            )
        )
    return rows
