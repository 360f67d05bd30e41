import math

import numpy as np
import pytest

from sobol_mirror.errors import CapacityError, DomainError, EvaluationError
from sobol_mirror.mirror import (
    EstimatorState,
    SamplingStrategy,
    StepSchedule,
    advance,
    cesaro_average,
    check_state,
    gradient_estimate,
    hessian_reference,
    load_checkpoint,
    replicate_rng,
    resolve_weights,
    run,
    save_checkpoint,
    weight_exp_norm,
)
from sobol_mirror.models import PickFreezeTriple, make_model
from sobol_mirror.subsets import GOLDEN_LO, dense_mobius_matrix

# disc2, default strategy and schedule, seed 0, 1000 iterations
DISC2_FINAL = [
    0.0, 0.07776714363608182, 0.1002277563237289, 0.03268020600742054,
    0.48874994751144735, 0.08442224262935508, 0.16777935355171356, 0.048373350340252703,
]
DISC2_CESARO = [
    0.0, 0.10606321649246071, 0.12082333350655587, 0.06635760046730979,
    0.3599654894620147, 0.10114903910576527, 0.17129771683083153, 0.07434360413506196,
]


class TestWeights:
    def test_exp_norm(self):
        assert weight_exp_norm([1, 0, 0, 0], 2.0) == 1.0
        assert weight_exp_norm([0, 0, 0, 0, 0, 0, 0, 1], 1.5) == pytest.approx(2 ** 4.5)
        assert weight_exp_norm([0.5, 0.5], 1.0) == 1.5

    def test_exp_norm_binomial(self):
        p, ell = 5, 2.0
        assert weight_exp_norm(np.full(1 << p, 2.0**-p), ell) == pytest.approx(((1 + 2**ell) / 2) ** p)

    def test_fixed(self):
        np.testing.assert_allclose(resolve_weights(SamplingStrategy.uniform(2), None), np.full(4, 0.25))

    def test_proportional(self):
        a = resolve_weights(SamplingStrategy("proportional_s"), np.array([0, 0.5, 0.5, 0]))
        np.testing.assert_allclose(a, np.array([1e-6, 0.5, 0.5, 1e-6]) / (1 + 2e-6), rtol=1e-6)

    def test_inverse_uniform(self):
        a = resolve_weights(SamplingStrategy("inverse_s"), np.array([0, 1 / 3, 1 / 3, 1 / 3]))
        np.testing.assert_allclose(a[1:], 1 / 3, rtol=1e-5)
        assert 0 < a[0] < 1e-5
        assert a.sum() == pytest.approx(1.0)

    def test_exclude_empty(self):
        a = resolve_weights(SamplingStrategy("inverse_s", exclude_empty=True), np.array([0, 0.2, 0.8, 0]))
        assert a[0] == 0.0
        assert SamplingStrategy.uniform(2, exclude_empty=True).base[0] == 0.0

    def test_positive_support(self):
        rng = np.random.default_rng(0)
        for kind in ("proportional_s", "inverse_s"):
            for _ in range(20):
                s = rng.dirichlet(np.full(15, 0.1))
                a = resolve_weights(SamplingStrategy(kind), np.concatenate([[0], s]))
                assert a.min() > 0 and a.sum() == pytest.approx(1.0)

    @pytest.mark.parametrize("label,kind", [("unif", "fixed"), ("avg", "fixed"), ("S", "proportional_s"), ("1/S", "inverse_s")])
    def test_labels(self, label, kind):
        assert SamplingStrategy.from_label(label, 3).kind == kind

    def test_bad_strategy(self):
        with pytest.raises(ValueError):
            SamplingStrategy.from_label("uniformish", 3)


class TestSchedule:
    def test_power(self):
        eta = StepSchedule("power", 0.3, 0.5)
        assert eta(1) == pytest.approx(0.3 / math.sqrt(2))
        assert eta.horizon_free
        assert not eta.satisfies_robbins_monro()
        assert StepSchedule("power", 0.3, 0.75).satisfies_robbins_monro()

    def test_theorem_constant(self):
        a = np.full(4, 0.25)
        eta = StepSchedule.theorem_constant(100, a)
        value = 1 / math.sqrt((1 + math.sqrt(weight_exp_norm(a, 2))) * 100)
        assert eta(1) == eta(100) == pytest.approx(value)
        assert eta(101) == 0.0
        assert not eta.horizon_free

    @pytest.mark.parametrize("kw", [dict(alpha=0.4), dict(alpha=1.2), dict(eta0=-1.0), dict(kind="cosine")])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            StepSchedule(**kw)


class TestGradient:
    def test_zero_when_y_is_mean(self):
        g = gradient_estimate([0, 0.3, 0.3, 0.4], 1.5, PickFreezeTriple(3, 1.5, 0.2))
        np.testing.assert_array_equal(g, 0.0)

    def test_hand_value(self):
        np.testing.assert_allclose(gradient_estimate([0, 1], 0.0, PickFreezeTriple(1, 2.0, 1.0)), [2, 2])

    def test_empty_subset(self):
        g = gradient_estimate([0, 0.3, 0.3, 0.4], 0.0, PickFreezeTriple(0, 2.0, 0.5))
        np.testing.assert_allclose(g, [-1.0, 0, 0, 0])

    def test_support(self):
        g = gradient_estimate(np.full(8, 1 / 7) * (np.arange(8) > 0), 0.1, PickFreezeTriple(0b101, 1.3, 0.4))
        assert set(np.flatnonzero(g)) == {0, 1, 4, 5}

    def test_non_finite(self):
        with pytest.raises(EvaluationError):
            gradient_estimate([0, 1], 0.0, PickFreezeTriple(1, math.nan, 1.0))


class TestHessian:
    @pytest.mark.parametrize("p", range(1, 5))
    def test_uniform_formula(self, p):
        q = 1 << p
        h, rho = hessian_reference(np.full(q, 1 / q), 3.0)
        m = dense_mobius_matrix(p).astype(float)
        np.testing.assert_allclose(h, 3.0 / q * np.linalg.inv(m @ m.T), atol=1e-9)

    @pytest.mark.parametrize("p", range(1, 7))
    def test_uniform_smallest_eigenvalue(self, p):
        q = 1 << p
        h, rho = hessian_reference(np.full(q, 1 / q), 1.0)
        assert np.linalg.eigvalsh(h).min() == pytest.approx(GOLDEN_LO**p / q, abs=1e-9)
        assert rho == pytest.approx(GOLDEN_LO**p / q)

    def test_floor_any_law(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            a = rng.dirichlet(np.ones(16))
            h, rho = hessian_reference(a, 0.7)
            assert np.linalg.eigvalsh(h).min() >= rho - 1e-9

    def test_capacity(self):
        with pytest.raises(CapacityError):
            hessian_reference(np.full(1 << 11, 2.0**-11), 1.0)


class TestCesaro:
    def test_weighted_mean(self):
        num = 2 * np.array([0, 1.0, 0]) + np.array([0, 0, 1.0])
        state = EstimatorState(2, 0.0, np.array([0, 0, 1.0]), num, 3.0, 4)
        np.testing.assert_allclose(cesaro_average(state), [0, 2 / 3, 1 / 3])

    def test_empty(self):
        with pytest.raises(ValueError):
            cesaro_average(EstimatorState.initial(2))

    def test_constant_trajectory(self):
        s = np.array([0, 0.2, 0.3, 0.5])
        state = EstimatorState(3, 0.0, s, (0.5 + 0.4 + 0.2) * s, 1.1, 6)
        np.testing.assert_allclose(cesaro_average(state), s)

    def test_zero_steps_give_no_average(self):
        rep = run(make_model("disc2"), schedule=StepSchedule("power", 0.0), horizon=50, seed=3)
        assert rep.sobol_cesaro is None


class TestRun:
    def test_frozen_trajectory(self):
        rep = run(make_model("disc2"), horizon=1000, seed=0)
        np.testing.assert_allclose(rep.sobol_final, DISC2_FINAL, rtol=1e-12)
        np.testing.assert_allclose(rep.sobol_cesaro, DISC2_CESARO, rtol=1e-12)
        assert rep.m_hat == pytest.approx(-0.01930137611827373, rel=1e-12)
        assert rep.evals == 2000 and rep.n == 1000

    def test_p1_is_a_point(self):
        rep = run(make_model("linear", p=1), horizon=1, seed=0)
        np.testing.assert_array_equal(rep.sobol_final, [0, 1])

    def test_zero_step_freezes_estimate(self):
        model = make_model("disc")
        rep = run(model, schedule=StepSchedule("power", 0.0), horizon=20_000, seed=1)
        np.testing.assert_allclose(rep.sobol_final, np.r_[0, np.full(7, 1 / 7)])
        assert rep.m_hat == pytest.approx(0.5, abs=0.05)

    def test_stays_on_simplex(self):
        state = EstimatorState.initial(3)
        rng = replicate_rng(0, 0)
        model = make_model("disc2")
        for _ in range(200):
            state = advance(state, rng, model, SamplingStrategy.from_label("1/S", 3), StepSchedule("power", 5.0))
            check_state(state)
            assert state.s_hat[0] == 0.0

    def test_check_state(self):
        with pytest.raises(DomainError):
            check_state(EstimatorState(1, 0.0, np.array([0.1, 0.9]), np.zeros(2), 1.0, 2))

    def test_theorem_constant_freezes_past_horizon(self):
        model = make_model("disc2")
        a = SamplingStrategy.uniform(3)
        sched = StepSchedule.theorem_constant(100, a.base)
        rep = run(model, a, sched, horizon=100, seed=4)
        state = rep.state.copy()
        more = run(model, a, sched, horizon=150, seed=5, state=state)
        np.testing.assert_array_equal(more.sobol_final, rep.sobol_final)
        assert more.n == 150 and more.m_hat != rep.m_hat


class TestDeterminism:
    @pytest.mark.parametrize("label", ["unif", "S", "1/S"])
    def test_advance_matches_run(self, label):
        model = make_model("disc2")
        strategy = SamplingStrategy.from_label(label, 3)
        schedule = StepSchedule()
        rep = run(model, strategy, schedule, horizon=300, seed=replicate_rng(9, 2))
        state = EstimatorState.initial(3)
        rng = replicate_rng(9, 2)
        for _ in range(300):
            state = advance(state, rng, model, strategy, schedule)
        np.testing.assert_array_equal(state.s_hat, rep.sobol_final)
        assert state.m_hat == rep.m_hat
        np.testing.assert_array_equal(state.cesaro_num, rep.state.cesaro_num)

    def test_advance_leaves_input_state(self):
        state = EstimatorState.initial(3)
        advance(state, replicate_rng(0, 0), make_model("disc2"), SamplingStrategy.uniform(3), StepSchedule())
        assert state.n == 0

    def test_checkpoint_resume(self, tmp_path):
        model = make_model("bratley")
        full = run(model, horizon=5000, seed=replicate_rng(1, 0))
        rng = replicate_rng(1, 0)
        half = run(model, horizon=2500, seed=rng)
        save_checkpoint(tmp_path / "ck.json", half.state, rng)
        state, rng2 = load_checkpoint(tmp_path / "ck.json")
        resumed = run(model, horizon=5000, seed=rng2, state=state)
        np.testing.assert_array_equal(resumed.sobol_final, full.sobol_final)
        np.testing.assert_array_equal(resumed.sobol_cesaro, full.sobol_cesaro)
        assert resumed.evals == full.evals == 10_000

    def test_snapshots(self):
        rep = run(make_model("disc2"), horizon=1000, seed=0, checkpoints=[10, 500, 1000])
        assert [s.n for s in rep.snapshots] == [10, 500, 1000]
        np.testing.assert_array_equal(rep.snapshots[-1].sobol, rep.sobol_final)


@pytest.mark.slow
def test_linear_recovery_rate():
    # ||S_n - (0, .5, .5, 0)||_inf at n = 2**2 * 5000 over 100 replicates.  The
    # {1,2} coordinate only shrinks through renormalization, so its error decays
    # like 8 / (Var(Y) sum eta_k) ~ 0.047 here; 0.07 is the frozen 95% level.
    model = make_model("linear")
    target = np.array([0, 0.5, 0.5, 0])
    hits = 0
    for r in range(100):
        rep = run(model, horizon=20_000, seed=replicate_rng(2024, r), averaging=False)
        hits += np.max(np.abs(rep.sobol_final - target)) < 0.07
    assert hits >= 95
