"""Gradient descent variants, SGD with momentum, and step schedules."""

import numpy as np
import pytest

from optlab.datasets import Dataset, gen_synthetic
from optlab.first_order import StepSchedule, gradient_descent, sgd, step_size
from optlab.problems import LinearModel, Problem, l1, l2, no_reg, prox_step
from optlab.config import lipschitz_bound
from optlab.trace import StopRule


def identity_quadratic(targets):
    # n = d, x_i = e_i, least squares: F(w) = (1/d) sum (w_i - y_i)^2 scaled
    # to gradient w - y when d = 2
    d = len(targets)
    return Problem(LinearModel(), "least_squares", no_reg(),
                   Dataset(np.eye(d), np.array(targets, dtype=float)))


def small_bench(seed=2, lam=0.01):
    data = gen_synthetic("two_gaussians", 150, 8, seed=seed, row_normalize=True)
    return Problem(LinearModel(), "logistic", l2(lam), data)


class TestStepSchedule:
    def test_constant_forever(self):
        sched = StepSchedule.constant(0.1)
        assert step_size(sched, 10 ** 6) == 0.1

    def test_harmonic_start(self):
        assert step_size(StepSchedule.harmonic(1.0, 1.0), 0) == 1.0

    def test_harmonic_sums_diverge_and_square_sums_converge(self):
        # alpha_k = 1/(1+k): running sum crosses 20 while the squared sum
        # stays under 2 for every prefix up to 10^6
        total = 0.0
        k = 0
        chunk = 10 ** 7
        while total <= 20.0 and k < 10 ** 9:
            ks = np.arange(k, k + chunk, dtype=np.float64)
            total += float(np.sum(1.0 / (1.0 + ks)))
            k += chunk
        assert total > 20.0
        sq = float(np.sum(1.0 / (1.0 + np.arange(10 ** 6, dtype=np.float64)) ** 2))
        assert sq < 2.0
        # spot check the schedule against the closed form
        sched = StepSchedule.harmonic(1.0, 1.0)
        for k in (0, 1, 7, 1000):
            assert step_size(sched, k) == pytest.approx(1.0 / (1.0 + k), rel=1e-15)

    def test_nonpositive_step_rejected(self):
        with pytest.raises(ValueError):
            StepSchedule.constant(0.0)
        with pytest.raises(ValueError):
            StepSchedule.harmonic(1.0, -1.0)

    def test_negative_iteration_rejected(self):
        with pytest.raises(ValueError):
            step_size(StepSchedule.constant(0.1), -1)


class TestGradientDescent:
    def test_unit_curvature_single_step_hits_target(self):
        prob = identity_quadratic([1.0, -1.0])
        res = gradient_descent(prob, np.zeros(2), StepSchedule.constant(1.0),
                               stop=StopRule(max_iter=1))
        np.testing.assert_array_equal(res.final_w, [1.0, -1.0])

    def test_ista_pure_l1_is_one_prox(self):
        # zero features make the smooth part constant, so one ista step from
        # v is exactly the prox of v
        data = Dataset(np.zeros((4, 3)), np.array([1.0, -1.0, 1.0, -1.0]))
        prob = Problem(LinearModel(), "logistic", l1(1.0), data)
        v = np.array([1.2, -0.3, 0.05])
        res = gradient_descent(prob, v, StepSchedule.constant(0.5),
                               variant="ista", stop=StopRule(max_iter=1))
        np.testing.assert_array_equal(res.final_w,
                                      prox_step(prob.regularizer, v, 0.5))

    def test_monotone_under_lipschitz_step(self):
        prob = small_bench()
        alpha = 1.0 / lipschitz_bound(prob)
        res = gradient_descent(prob, np.zeros(8), StepSchedule.constant(alpha),
                               stop=StopRule(max_iter=100))
        fvals = res.fvals
        assert np.all(fvals[1:] <= fvals[:-1] + 1e-12)

    def test_fista_never_behind_ista_at_200(self):
        data = gen_synthetic("given_separator", 150, 8, seed=4, noise_rate=0.1,
                             row_normalize=True)
        prob = Problem(LinearModel(), "logistic", l1(0.01), data)
        sched = StepSchedule.constant(0.9)
        ista = gradient_descent(prob, np.zeros(8), sched, variant="ista",
                                stop=StopRule(max_iter=200))
        fista = gradient_descent(prob, np.zeros(8), sched, variant="fista",
                                 stop=StopRule(max_iter=200))
        assert fista.trace[-1].iter == 200 and ista.trace[-1].iter == 200
        assert fista.trace[-1].fval <= ista.trace[-1].fval + 1e-12

    def test_nesterov_converges_faster_than_plain_on_wide_gap(self):
        prob = small_bench(lam=1e-4)
        alpha = 1.0 / lipschitz_bound(prob)
        stop = StopRule(max_iter=300)
        plain = gradient_descent(prob, np.zeros(8), StepSchedule.constant(alpha),
                                 stop=stop)
        nest = gradient_descent(prob, np.zeros(8), StepSchedule.constant(alpha),
                                variant="nesterov", stop=stop)
        assert nest.trace[-1].fval <= plain.trace[-1].fval

    def test_variant_regularizer_compatibility(self):
        prob_l1 = Problem(LinearModel(), "logistic", l1(0.1),
                          gen_synthetic("two_gaussians", 10, 3, seed=0))
        with pytest.raises(ValueError):
            gradient_descent(prob_l1, np.zeros(3), StepSchedule.constant(0.1))
        prob_l2 = small_bench()
        with pytest.raises(ValueError):
            gradient_descent(prob_l2, np.zeros(8), StepSchedule.constant(0.1),
                             variant="fista")

    def test_grad_tol_termination(self):
        prob = identity_quadratic([1.0, -1.0])
        res = gradient_descent(prob, np.zeros(2), StepSchedule.constant(0.5),
                               stop=StopRule(max_iter=500, grad_tol=1e-9))
        assert res.termination == "grad_tol"
        assert res.trace[-1].gnorm <= 1e-9

    def test_trace_shape(self):
        prob = small_bench()
        res = gradient_descent(prob, np.zeros(8), StepSchedule.constant(0.5),
                               stop=StopRule(max_iter=10))
        iters = [r.iter for r in res.trace]
        assert iters == sorted(set(iters))
        evals = res.evals
        assert np.all(np.diff(evals) >= 0)


class TestSgd:
    def test_full_batch_degenerates_to_gd(self):
        prob = small_bench()
        sched = StepSchedule.constant(0.5)
        stop = StopRule(max_iter=40)
        gd_run = gradient_descent(prob, np.zeros(8), sched, stop=stop)
        sgd_run = sgd(prob, np.zeros(8), sched, batch_size=prob.data.n,
                      momentum=0.0, seed=0, stop=stop)
        np.testing.assert_allclose(sgd_run.final_w, gd_run.final_w, atol=1e-14)
        np.testing.assert_allclose(sgd_run.fvals, gd_run.fvals, atol=1e-14)

    def test_zero_gradient_field_freezes_iterate(self):
        data = Dataset(np.zeros((6, 4)), np.where(np.arange(6) % 2 == 0, 1.0, -1.0))
        prob = Problem(LinearModel(), "logistic", no_reg(), data)
        w0 = np.array([0.3, -0.2, 0.9, 0.0])
        res = sgd(prob, w0, StepSchedule.constant(0.1), batch_size=2,
                  momentum=0.9, seed=4, stop=StopRule(max_iter=50))
        np.testing.assert_array_equal(res.final_w, w0)

    def test_momentum_matches_reference_recursion(self):
        # replay Algorithm-style updates with the same batch stream
        prob = small_bench()
        sched = StepSchedule.constant(0.3)
        eta, s, seed, steps = 0.7, 8, 11, 6
        run = sgd(prob, np.zeros(8), sched, batch_size=s, momentum=eta,
                  seed=seed, stop=StopRule(max_iter=steps))
        rng = np.random.default_rng(seed)
        w = np.zeros(8)
        v = np.zeros(8)
        for _ in range(steps):
            batch = rng.integers(0, prob.data.n, size=s)
            g = prob.minibatch_gradient(w, batch)
            v = eta * v + (1.0 - eta) * g
            w = w - 0.3 * v
        np.testing.assert_array_equal(run.final_w, w)

    def test_same_seed_bit_identical(self):
        prob = small_bench()
        kwargs = dict(batch_size=4, momentum=0.5, seed=99,
                      stop=StopRule(max_iter=30))
        a = sgd(prob, np.zeros(8), StepSchedule.constant(0.2), **kwargs)
        b = sgd(prob, np.zeros(8), StepSchedule.constant(0.2), **kwargs)
        np.testing.assert_array_equal(a.final_w, b.final_w)
        assert [(r.iter, r.fval, r.gnorm) for r in a.trace] == \
            [(r.iter, r.fval, r.gnorm) for r in b.trace]

    def test_epoch_shuffle_covers_all_indices(self):
        prob = small_bench()
        res = sgd(prob, np.zeros(8), StepSchedule.constant(0.2), batch_size=50,
                  seed=1, sampling="epoch_shuffle", stop=StopRule(max_iter=9))
        assert res.trace[-1].iter == 9

    def test_objective_not_required_monotone(self):
        # documented non-invariant: small batches bounce around the optimum
        prob = small_bench()
        res = sgd(prob, np.zeros(8), StepSchedule.constant(0.5), batch_size=1,
                  seed=0, stop=StopRule(max_iter=400))
        diffs = np.diff(res.fvals)
        assert np.any(diffs > 0)

    def test_parameter_validation(self):
        prob = small_bench()
        sched = StepSchedule.constant(0.1)
        with pytest.raises(ValueError):
            sgd(prob, np.zeros(8), sched, batch_size=0)
        with pytest.raises(ValueError):
            sgd(prob, np.zeros(8), sched, batch_size=prob.data.n + 1)
        with pytest.raises(ValueError):
            sgd(prob, np.zeros(8), sched, batch_size=4, momentum=1.0)
