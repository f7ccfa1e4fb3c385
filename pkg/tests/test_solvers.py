import numpy as np
import numpy.testing as npt
import pytest

from crsqn.oracles import LogisticOracle, QuadraticOracle, StochasticOracle, make_rank_deficient_quadratic
from crsqn.schedules import PowerLawSchedule, rate_envelope
from crsqn.solvers import (
    ConfigInvalidError,
    MissingErrorColumnError,
    NonFiniteIterateError,
    RunTrace,
    SolverConfig,
    SolverState,
    TraceRecord,
    compare,
    estimate_theta,
    run,
    step_crsqn,
    step_res,
    step_sa,
)

RATE = PowerLawSchedule(0.9, 0.9, 0.9, 0.8, 0.0, 0.2)
UNIT = PowerLawSchedule(1.0, 1.0, 1.0, 0.8, 0.0, 0.2)


class ZeroOracle(StochasticOracle):
    """Identically zero objective; every gradient vanishes."""

    def __init__(self, dim):
        self.dim = dim
        self.n_samples = 4

    def per_sample_loss(self, x, i):
        return 0.0

    def per_sample_gradient(self, x, i):
        return np.zeros(self.dim)

    def full_loss(self, x):
        return 0.0

    def full_gradient(self, x):
        return np.zeros(self.dim)

    def lipschitz_bound(self):
        return 1.0


class HugeGradientOracle(ZeroOracle):
    def per_sample_gradient(self, x, i):
        return np.full(self.dim, 1e308)


class RecordingOracle:
    """Wrapper that logs every per-sample gradient evaluation (x, i)."""

    def __init__(self, base):
        self._base = base
        self.dim = base.dim
        self.n_samples = base.n_samples
        self.calls = []

    def per_sample_gradient(self, x, i):
        self.calls.append((x.copy(), i))
        return self._base.per_sample_gradient(x, i)

    def per_sample_loss(self, x, i):
        return self._base.per_sample_loss(x, i)

    def full_loss(self, x):
        return self._base.full_loss(x)

    def full_gradient(self, x):
        return self._base.full_gradient(x)

    def lipschitz_bound(self):
        return self._base.lipschitz_bound()

    def sample_gradient(self, x, rng):
        ev = self._base.sample_gradient(x, rng)
        self.calls.append((x.copy(), ev.sample_id))
        return ev


@pytest.fixture
def quadratic():
    return make_rank_deficient_quadratic(6, 4, n_samples=40, seed=5)


@pytest.fixture
def logistic():
    rng = np.random.default_rng(31)
    return LogisticOracle(rng.standard_normal((60, 4)), (rng.random(60) < 0.5).astype(float))


class TestConfigValidation:
    def test_zero_iterations_rejected(self):
        cfg = SolverConfig(algorithm="sa", gamma0=0.1, iterations=0)
        with pytest.raises(ConfigInvalidError):
            cfg.validate()

    def test_unknown_algorithm(self):
        with pytest.raises(ConfigInvalidError):
            SolverConfig(algorithm="adam", gamma0=0.1).validate()

    def test_crsqn_needs_schedule(self):
        with pytest.raises(ConfigInvalidError):
            SolverConfig(algorithm="crsqn").validate()

    def test_res_needs_constants(self):
        with pytest.raises(ConfigInvalidError):
            SolverConfig(algorithm="res", gamma0=0.1).validate()

    def test_rho_range(self):
        cfg = SolverConfig(algorithm="crsqn", schedule=RATE, rho=1.0)
        with pytest.raises(ConfigInvalidError):
            cfg.validate()

    def test_x0_dimension_checked_against_oracle(self):
        cfg = SolverConfig(algorithm="sa", gamma0=0.1, x0=(1.0, 2.0))
        with pytest.raises(ConfigInvalidError):
            cfg.validate(dim=3)


class TestStepCrsqn:
    def test_first_step_from_zero_with_unit_parameters(self, quadratic):
        # B0 = I and x0 = 0: x1 = -(1 + 1) * sampled gradient
        rng = np.random.default_rng(7)
        state = SolverState(np.zeros(6), rng)
        from crsqn.hessian import CyclicBfgsState

        state.bfgs = CyclicBfgsState(6, UNIT.mu(0), 0.9)
        expected_id = np.random.default_rng(7).integers(quadratic.n_samples)
        g = quadratic.per_sample_gradient(np.zeros(6), int(expected_id))
        record = step_crsqn(state, quadratic, UNIT)
        npt.assert_allclose(state.x, -2.0 * g, rtol=1e-14)
        assert record.k == 0
        assert record.sample_id == expected_id
        assert record.grad_evals == 2
        assert record.gamma == 1.0 and record.delta == 1.0 and record.mu == 1.0

    def test_even_records_secant_and_odd_does_not(self, quadratic):
        from crsqn.hessian import CyclicBfgsState

        state = SolverState(np.zeros(6), np.random.default_rng(1))
        state.bfgs = CyclicBfgsState(6, RATE.mu(0), 0.9)
        even = step_crsqn(state, quadratic, RATE)
        odd = step_crsqn(state, quadratic, RATE)
        assert even.secant_residual is not None and even.skipped is False
        assert even.y_reg_norm is not None
        assert odd.secant_residual is None and odd.skipped is None
        assert odd.grad_evals == 1
        assert state.bfgs.update_count == 1 and state.bfgs.odd_count == 1

    def test_secant_residual_bound_from_trace(self, logistic):
        cfg = SolverConfig(algorithm="crsqn", schedule=RATE, iterations=100, seed=5, eval_every=50)
        trace = run(logistic, cfg)
        evens = [r for r in trace.records if r.secant_residual is not None]
        assert len(evens) == 50
        for r in evens:
            assert r.skipped is False
            assert r.secant_residual <= 1e-8 * (1.0 + r.y_reg_norm)

    def test_stationary_on_zero_oracle(self):
        oracle = ZeroOracle(3)
        cfg = SolverConfig(algorithm="crsqn", schedule=RATE, iterations=50, seed=0, safeguard_retries=4)
        trace = run(oracle, cfg)
        assert trace.status == "stationary"
        assert trace.records[-1].k == 0
        assert trace.records[-1].loss == 0.0

    def test_nonfinite_iterate_raises(self):
        oracle = HugeGradientOracle(2)
        cfg = SolverConfig(algorithm="crsqn", schedule=RATE, iterations=5, seed=0)
        with np.errstate(over="ignore"), pytest.raises(NonFiniteIterateError):
            run(oracle, cfg)


class TestCycleDiscipline:
    def test_updates_exactly_at_even_k_with_same_sample_both_points(self, quadratic):
        wrapped = RecordingOracle(quadratic)
        cfg = SolverConfig(algorithm="crsqn", schedule=RATE, iterations=40, seed=9, eval_every=1000)
        trace = run(wrapped, cfg)
        per_iteration = {}
        for x, i in wrapped.calls:
            per_iteration.setdefault(len(per_iteration), None)
        # reconstruct evaluation pattern: even iterations produce two calls
        # with one sample id at two distinct points, odd ones a single call
        calls = wrapped.calls
        records = [r for r in trace.records if r.sample_id is not None]
        pos = 0
        for record in records:
            if record.k % 2 == 0:
                x_a, id_a = calls[pos]
                x_b, id_b = calls[pos + 1]
                assert id_a == id_b == record.sample_id
                assert not np.array_equal(x_a, x_b)
                assert record.grad_evals == 2
                pos += 2
            else:
                _, id_a = calls[pos]
                assert id_a == record.sample_id
                assert record.grad_evals == 1
                pos += 1
        assert pos == len(calls)

    def test_trace_schedule_columns_match_generators(self, quadratic):
        cfg = SolverConfig(algorithm="crsqn", schedule=RATE, iterations=30, seed=2, eval_every=10)
        trace = run(quadratic, cfg)
        for r in trace.records:
            assert r.gamma == RATE.gamma(r.k)
            assert r.delta == RATE.delta(r.k)
            assert r.mu == RATE.mu(r.k)

    def test_mu_pairing_in_trace(self, quadratic):
        cfg = SolverConfig(algorithm="crsqn", schedule=RATE, iterations=21, seed=2)
        trace = run(quadratic, cfg)
        mus = [r.mu for r in trace.records]
        for even_k in range(0, 20, 2):
            assert mus[even_k] == mus[even_k + 1]


class TestDeterminism:
    def test_identical_seeds_identical_traces(self, quadratic):
        cfg = SolverConfig(algorithm="crsqn", schedule=RATE, iterations=60, seed=77, eval_every=20)
        a = run(quadratic, cfg)
        b = run(quadratic, cfg)
        assert a == b  # wall_time excluded from comparison
        assert a.final_x == b.final_x

    def test_different_seeds_differ(self, quadratic):
        cfg = SolverConfig(algorithm="crsqn", schedule=RATE, iterations=60, seed=1)
        a = run(quadratic, cfg)
        b = run(quadratic, SolverConfig(algorithm="crsqn", schedule=RATE, iterations=60, seed=2))
        assert a.final_x != b.final_x


class TestLossCadence:
    def test_loss_recorded_at_cadence_and_terminal(self, quadratic):
        cfg = SolverConfig(algorithm="crsqn", schedule=RATE, iterations=100, seed=3, eval_every=30)
        trace = run(quadratic, cfg)
        ks = [k for k, _ in trace.loss_points()]
        assert ks == [0, 30, 60, 90, 100]
        assert all(r.gap == r.loss - 0.0 for r in trace.records if r.loss is not None)

    def test_strictly_increasing_record_iterations(self, quadratic):
        cfg = SolverConfig(algorithm="crsqn", schedule=RATE, iterations=50, seed=3)
        trace = run(quadratic, cfg)
        ks = [r.k for r in trace.records]
        assert ks == sorted(set(ks))

    def test_no_gap_column_without_known_optimum(self, logistic):
        cfg = SolverConfig(algorithm="sa", gamma0=0.01, iterations=40, seed=1, eval_every=10)
        trace = run(logistic, cfg)
        assert all(r.gap is None for r in trace.records)


class TestStepRes:
    def test_first_step_matches_sqn_form(self, quadratic):
        from crsqn.hessian import CyclicBfgsState

        state = SolverState(np.zeros(6), np.random.default_rng(7))
        state.bfgs = CyclicBfgsState(6, 1.0, 0.9)
        expected_id = np.random.default_rng(7).integers(quadratic.n_samples)
        g = quadratic.per_sample_gradient(np.zeros(6), int(expected_id))
        step_res(state, quadratic, mu=1.0, delta=1.0, gamma_k=1.0)
        npt.assert_allclose(state.x, -2.0 * g, rtol=1e-14)

    def test_every_iteration_updates_matrix(self, quadratic):
        cfg = SolverConfig(algorithm="res", gamma0=0.1, mu=1.0, delta=1.0, iterations=31, seed=4)
        trace = run(quadratic, cfg)
        live = [r for r in trace.records if r.sample_id is not None]
        assert all(r.secant_residual is not None for r in live)
        assert all(r.grad_evals == 2 for r in live)

    def test_constant_columns_and_floor(self, quadratic):
        from crsqn.hessian import CyclicBfgsState
        from crsqn.linalg import min_eigenvalue

        state = SolverState(np.zeros(6), np.random.default_rng(0))
        state.bfgs = CyclicBfgsState(6, 1.0, 0.9)
        for k in range(40):
            step_res(state, quadratic, mu=1.0, delta=1.0, gamma_k=0.1 / (k + 1))
            assert min_eigenvalue(state.bfgs.matrix) >= 0.9 * 1.0 - 1e-10
        cfg = SolverConfig(algorithm="res", gamma0=0.1, mu=0.5, delta=0.7, iterations=10, seed=4)
        trace = run(quadratic, cfg)
        live = [r for r in trace.records if r.sample_id is not None]
        assert all(r.mu == 0.5 and r.delta == 0.7 for r in live)
        assert all(r.gamma == 0.1 / (r.k + 1.0) for r in live)


class TestStepSa:
    def test_plain_gradient_step(self, quadratic):
        state = SolverState(np.zeros(6), np.random.default_rng(7))
        expected_id = np.random.default_rng(7).integers(quadratic.n_samples)
        g = quadratic.per_sample_gradient(np.zeros(6), int(expected_id))
        step_sa(state, quadratic, 0.1)
        npt.assert_allclose(state.x, -0.1 * g, rtol=1e-14)

    def test_zero_step_size_keeps_iterate(self, quadratic):
        state = SolverState(np.ones(6), np.random.default_rng(7))
        step_sa(state, quadratic, 0.0)
        npt.assert_array_equal(state.x, np.ones(6))

    def test_unit_step_lands_on_sampled_target(self):
        # per-sample losses (x - b_i)^2 / 2: a unit step jumps onto b_i
        targets = np.array([3.0, -1.0, 4.0, 2.0])
        oracle = QuadraticOracle(np.ones((4, 1)), targets)
        state = SolverState(np.zeros(1), np.random.default_rng(13))
        record = step_sa(state, oracle, 1.0)
        assert state.x[0] == targets[record.sample_id]


class TestEstimateTheta:
    def _trace_with_gaps(self, gaps):
        records = [TraceRecord(k=k, gap=g, loss=g) for k, g in gaps]
        cfg = SolverConfig(algorithm="crsqn", schedule=UNIT, iterations=10)
        return RunTrace(records=records, status="finished", config=cfg)

    def test_envelope_gaps_give_unit_theta(self):
        trace = self._trace_with_gaps([(k, rate_envelope(UNIT, k)) for k in (1, 5, 20, 100)])
        assert estimate_theta(trace, UNIT) == pytest.approx(1.0, rel=1e-12)

    def test_zero_gaps_give_zero(self):
        trace = self._trace_with_gaps([(k, 0.0) for k in (1, 10, 100)])
        assert estimate_theta(trace, UNIT) == 0.0

    def test_missing_gap_column(self, logistic):
        cfg = SolverConfig(algorithm="sa", gamma0=0.01, iterations=20, seed=0, eval_every=5)
        trace = run(logistic, cfg)
        with pytest.raises(MissingErrorColumnError):
            estimate_theta(trace, UNIT)

    def test_onset_restriction(self):
        # gap at k=1 is huge, but the onset cut discards it
        trace = self._trace_with_gaps([(1, 1e6), (200, rate_envelope(UNIT, 200))])
        theta = estimate_theta(trace, UNIT, lipschitz=0.05, rho=0.9)
        assert theta == pytest.approx(1.0, rel=1e-12)

    def test_stable_across_seeds_on_quadratic(self, quadratic):
        thetas = []
        for seed in range(10):
            cfg = SolverConfig(
                algorithm="crsqn", schedule=RATE, iterations=4000, seed=seed, eval_every=200
            )
            trace = run(quadratic, cfg)
            thetas.append(estimate_theta(trace, RATE, lipschitz=quadratic.lipschitz_bound()))
        assert max(thetas) <= 3.0 * min(thetas)
        assert all(np.isfinite(t) for t in thetas)


class TestCompare:
    def test_single_config_row_equals_run_final_loss(self, quadratic):
        cfg = SolverConfig(algorithm="sa", gamma0=0.05, iterations=50, seed=21, eval_every=25)
        rows = compare(quadratic, [cfg])
        assert len(rows) == 1
        assert rows[0].mean_loss == run(quadratic, cfg).final_loss()
        assert rows[0].std_loss == 0.0
        assert rows[0].n_seeds == 1
        assert rows[0].algorithm == "sa"

    def test_seed_averaging(self, quadratic):
        cfg = SolverConfig(algorithm="sa", gamma0=0.05, iterations=50, eval_every=25)
        rows = compare(quadratic, [cfg], seeds=[1, 2, 3])
        finals = [
            run(quadratic, SolverConfig(algorithm="sa", gamma0=0.05, iterations=50, seed=s, eval_every=25)).final_loss()
            for s in (1, 2, 3)
        ]
        assert rows[0].mean_loss == pytest.approx(np.mean(finals), rel=1e-15)
        assert rows[0].std_loss == pytest.approx(np.std(finals), rel=1e-12)
        assert rows[0].n_seeds == 3

    def test_parameter_labels(self, quadratic):
        configs = [
            SolverConfig(algorithm="crsqn", schedule=RATE, iterations=10),
            SolverConfig(algorithm="res", gamma0=0.1, mu=0.5, delta=1.0, iterations=10),
            SolverConfig(algorithm="sa", gamma0=0.01, iterations=10, name="baseline"),
        ]
        rows = compare(quadratic, configs)
        assert rows[0].parameter == "gamma0=0.9,mu0=0.9"
        assert rows[1].parameter == "gamma0=0.1,mu=0.5"
        assert rows[2].parameter == "baseline"


def test_infeasible_schedule_warns_but_runs(quadratic, caplog):
    bad = PowerLawSchedule(0.9, 0.9, 0.9, 0.5, 0.0, 0.2)  # fails a > 3c + b
    cfg = SolverConfig(algorithm="crsqn", schedule=bad, iterations=10, seed=0)
    with caplog.at_level("WARNING", logger="crsqn.solvers"):
        trace = run(quadratic, cfg)
    assert trace.status == "finished"
    assert any("feasibility" in m for m in caplog.messages)
