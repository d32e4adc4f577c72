"""Oracle correctness for the problem module: values, gradients, curvature
products, prox, convolution, prediction, and the structural invariants."""

import numpy as np
import pytest

from optlab.datasets import Dataset, gen_synthetic
from optlab.errors import ShapeError, UnsupportedOracleError
from optlab.problems import (LinearModel, MlpModel, Problem, Regularizer,
                             conv2d_valid, l1, l2, mlp, mlp_forward,
                             mlp_parameter_count, no_reg, prox_step)

from conftest import central_diff_gradient, grad_diff_hvp, rel_err


def two_sample_problem(reg=None):
    # x1 = (1, 0) labeled +1, x2 = (0, 1) labeled -1
    data = Dataset(np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([1.0, -1.0]))
    return Problem(LinearModel(), "logistic", reg or no_reg(), data)


def random_problems(seed=0):
    rng = np.random.default_rng(seed)
    data6 = gen_synthetic("two_gaussians", 30, 6, seed=1)
    data2 = gen_synthetic("two_gaussians", 16, 2, seed=2)
    probs = [
        Problem(LinearModel(), "logistic", l2(0.05), data6),
        Problem(LinearModel(), "least_squares", l2(0.05), data6),
        Problem(LinearModel(), "logistic", no_reg(), data6),
        Problem(mlp((2, 3, 1), ("sigmoid", "identity")), "logistic", l2(0.01), data2),
        Problem(mlp((2, 3, 1), ("tanh", "identity")), "least_squares", no_reg(), data2),
    ]
    return probs, rng


class TestObjectiveValue:
    def test_logistic_at_zero_is_ln2(self):
        prob = two_sample_problem()
        assert prob.value(np.zeros(2)) == pytest.approx(np.log(2.0), abs=1e-12)

    def test_hinge_at_zero_is_one(self):
        data = gen_synthetic("two_gaussians", 20, 4, seed=0)
        prob = Problem(LinearModel(), "hinge", no_reg(), data)
        assert prob.value(np.zeros(4)) == 1.0

    def test_separable_single_sample_scalars(self):
        data = Dataset(np.array([[1.0]]), np.array([1.0]))
        prob = Problem(LinearModel(), "logistic", no_reg(), data)
        f1 = prob.value(np.array([1.0]))
        f10 = prob.value(np.array([10.0]))
        assert f1 == pytest.approx(np.log(1.0 + np.exp(-1.0)), rel=1e-12)
        assert f10 == pytest.approx(np.log(1.0 + np.exp(-10.0)), rel=1e-9)
        assert f10 < f1  # scaling a separator only lowers the loss

    def test_l2_term_included(self):
        prob = two_sample_problem(l2(0.5))
        w = np.array([2.0, -1.0])
        base = two_sample_problem().value(w)
        assert prob.value(w) == pytest.approx(base + 0.5 * 5.0, rel=1e-12)

    def test_dimension_mismatch(self):
        prob = two_sample_problem()
        with pytest.raises(ShapeError):
            prob.value(np.zeros(3))


class TestGradient:
    def test_two_sample_at_zero(self):
        prob = two_sample_problem()
        np.testing.assert_allclose(prob.gradient(np.zeros(2)),
                                   [-0.25, 0.25], atol=1e-15)

    def test_least_squares_interpolation_gives_zero(self):
        data = Dataset(np.eye(3), np.array([1.0, -1.0, 1.0]))
        prob = Problem(LinearModel(), "least_squares", no_reg(), data)
        np.testing.assert_array_equal(prob.gradient(np.array([1.0, -1.0, 1.0])),
                                      np.zeros(3))

    def test_matches_central_differences(self):
        probs, rng = random_problems()
        for prob in probs:
            for _ in range(4):
                w = rng.standard_normal(prob.dim) * 0.5
                assert rel_err(prob.gradient(w),
                               central_diff_gradient(prob, w)) <= 1e-5

    def test_zero_one_has_no_gradient(self):
        data = gen_synthetic("two_gaussians", 10, 3, seed=0)
        prob = Problem(LinearModel(), "zero_one", no_reg(), data)
        assert prob.value(np.zeros(3)) == 1.0  # ties count as errors
        with pytest.raises(UnsupportedOracleError):
            prob.gradient(np.zeros(3))


class TestMinibatchGradient:
    def test_full_batch_equals_gradient(self):
        probs, rng = random_problems()
        for prob in probs:
            w = rng.standard_normal(prob.dim) * 0.3
            full = prob.minibatch_gradient(w, np.arange(prob.data.n))
            np.testing.assert_allclose(full, prob.gradient(w), atol=1e-14)

    def test_singleton_average_is_unbiased(self):
        prob = random_problems()[0][0]
        w = np.linspace(-0.5, 0.5, prob.dim)
        singles = np.array([prob.minibatch_gradient(w, [i])
                            for i in range(prob.data.n)])
        np.testing.assert_allclose(singles.mean(axis=0), prob.gradient(w),
                                   atol=1e-12)

    def test_single_sample_term(self):
        prob = two_sample_problem()
        np.testing.assert_allclose(prob.minibatch_gradient(np.zeros(2), [0]),
                                   [-0.5, 0.0], atol=1e-15)

    def test_duplicates_average_as_drawn(self):
        prob = two_sample_problem()
        w = np.array([0.3, -0.2])
        got = prob.minibatch_gradient(w, [0, 0, 1])
        parts = [prob.minibatch_gradient(w, [i]) for i in (0, 0, 1)]
        np.testing.assert_allclose(got, np.mean(parts, axis=0), atol=1e-14)

    def test_bad_batches(self):
        prob = two_sample_problem()
        with pytest.raises(ValueError):
            prob.minibatch_gradient(np.zeros(2), [])
        with pytest.raises(ValueError):
            prob.minibatch_gradient(np.zeros(2), [2])
        with pytest.raises(ValueError):
            prob.minibatch_gradient(np.zeros(2), [-1])


class TestHessianVectorProduct:
    def test_zero_direction(self):
        prob = two_sample_problem()
        np.testing.assert_array_equal(
            prob.hessian_vector_product(np.zeros(2), np.zeros(2)), np.zeros(2))

    def test_two_sample_identity_over_eight(self):
        prob = two_sample_problem()
        hv = prob.hessian_vector_product(np.zeros(2), np.array([1.0, 1.0]))
        np.testing.assert_allclose(hv, [0.125, 0.125], atol=1e-15)

    def test_matches_gradient_differences(self):
        probs, rng = random_problems()
        for prob in probs:
            if prob.loss == "hinge":
                continue
            w = rng.standard_normal(prob.dim) * 0.4
            v = rng.standard_normal(prob.dim)
            hv = prob.hessian_vector_product(w, v)
            assert rel_err(hv, grad_diff_hvp(prob, w, v)) <= 1e-4

    def test_linearity(self):
        prob = random_problems()[0][3]
        rng = np.random.default_rng(5)
        w = prob.initial_point(rng)
        u, v = rng.standard_normal((2, prob.dim))
        left = prob.hessian_vector_product(w, 2.0 * u - 3.0 * v)
        right = 2.0 * prob.hessian_vector_product(w, u) \
            - 3.0 * prob.hessian_vector_product(w, v)
        np.testing.assert_allclose(left, right, atol=1e-12)

    def test_symmetry(self):
        probs, rng = random_problems(3)
        for prob in (probs[0], probs[3]):
            w = rng.standard_normal(prob.dim) * 0.3
            u, v = rng.standard_normal((2, prob.dim))
            uhv = float(u @ prob.hessian_vector_product(w, v))
            vhu = float(v @ prob.hessian_vector_product(w, u))
            assert abs(uhv - vhu) <= 1e-10 * (1.0 + abs(uhv))

    def test_unsupported_losses(self):
        data = gen_synthetic("two_gaussians", 10, 3, seed=0)
        for loss in ("hinge", "zero_one"):
            prob = Problem(LinearModel(), loss, no_reg(), data)
            with pytest.raises(UnsupportedOracleError):
                prob.hessian_vector_product(np.zeros(3), np.ones(3))

    def test_relu_kink_refused(self):
        data = Dataset(np.array([[0.0, 0.0], [1.0, 1.0]]), np.array([1.0, -1.0]))
        prob = Problem(mlp((2, 2, 1), ("relu", "identity")), "logistic",
                       no_reg(), data)
        w = np.zeros(prob.dim)  # zero weights and shifts: pre-activations at 0
        with pytest.raises(UnsupportedOracleError):
            prob.hessian_vector_product(w, np.ones(prob.dim))
        # away from the kink the oracle works and matches differences
        w = prob.initial_point(3) + 0.05
        v = np.random.default_rng(0).standard_normal(prob.dim)
        hv = prob.hessian_vector_product(w, v, batch=[1])
        assert np.all(np.isfinite(hv))


class TestGaussNewton:
    def test_linear_least_squares_equals_hessian(self):
        data = gen_synthetic("two_gaussians", 25, 5, seed=4)
        prob = Problem(LinearModel(), "least_squares", l2(0.1), data)
        rng = np.random.default_rng(0)
        w, v = rng.standard_normal((2, 5))
        np.testing.assert_allclose(
            prob.gauss_newton_vector_product(w, v),
            prob.hessian_vector_product(w, v), atol=1e-10)

    def test_zero_direction(self):
        prob = random_problems()[0][3]
        w = prob.initial_point(0)
        np.testing.assert_array_equal(
            prob.gauss_newton_vector_product(w, np.zeros(prob.dim)),
            np.zeros(prob.dim))

    def test_positive_semidefinite(self):
        prob = random_problems()[0][3]
        rng = np.random.default_rng(11)
        w = prob.initial_point(rng)
        for _ in range(100):
            v = rng.standard_normal(prob.dim)
            quad = float(v @ prob.gauss_newton_vector_product(w, v))
            assert quad >= -1e-10

    def test_equals_hessian_at_interpolation(self):
        # build a net whose output layer solves the 4 targets exactly, so the
        # residual-weighted model curvature term vanishes
        from optlab import networks
        rng = np.random.default_rng(4)
        X = rng.standard_normal((4, 2))
        y = np.array([1.0, -1.0, 1.0, -1.0])
        prob = Problem(mlp((2, 3, 1), ("tanh", "identity")), "least_squares",
                       no_reg(), Dataset(X, y))
        w = prob.initial_point(8)
        weights, shifts = networks.unpack_layers(w, (2, 3, 1))
        hidden = np.tanh(X @ weights[0].T + shifts[0])
        sol = np.linalg.solve(np.hstack([hidden, np.ones((4, 1))]), y)
        w_star = np.concatenate([weights[0].ravel(), shifts[0], sol[:3], sol[3:]])
        assert prob.value(w_star) < 1e-20
        v = rng.standard_normal(prob.dim)
        np.testing.assert_allclose(
            prob.gauss_newton_vector_product(w_star, v),
            prob.hessian_vector_product(w_star, v), atol=1e-6)


class TestProx:
    def test_l1_soft_threshold(self):
        got = prox_step(l1(1.0), np.array([1.2, -0.3]), 0.5)
        np.testing.assert_allclose(got, [0.7, 0.0], atol=1e-15)

    def test_none_is_identity(self):
        v = np.array([3.0, -2.0, 0.0])
        np.testing.assert_array_equal(prox_step(no_reg(), v, 0.7), v)

    def test_l2_shrinkage(self):
        v = np.array([2.0, -4.0])
        np.testing.assert_allclose(prox_step(l2(0.5), v, 1.0), v / 2.0)

    def test_l1_prox_minimizes_scalar_objective(self):
        lam, t = 0.8, 0.6
        reg = l1(lam)
        grid = np.linspace(-3.0, 3.0, 200001)
        for v in (-2.3, -0.4, 0.0, 0.17, 1.9):
            u = prox_step(reg, np.array([v]), t)[0]
            obj = lambda x: 0.5 * (x - v) ** 2 + t * lam * np.abs(x)
            assert obj(u) <= obj(grid).min() + 1e-8

    def test_nonpositive_step(self):
        with pytest.raises(ValueError):
            prox_step(l1(1.0), np.ones(2), 0.0)


class TestMlpForward:
    def test_identity_single_layer(self):
        data = Dataset(np.eye(3), np.array([1.0, 1.0, -1.0]))
        prob = Problem(MlpModel((3, 3), ("identity",)), "least_squares",
                       no_reg(), Dataset(np.eye(3), np.array([[1, 0, 0],
                                                              [0, 1, 0],
                                                              [0, 0, 1]])))
        w = np.concatenate([np.eye(3).ravel(), np.zeros(3)])
        x = np.array([0.3, -1.2, 2.0])
        pred, _ = mlp_forward(prob, w, x)
        np.testing.assert_array_equal(pred, x)
        del data

    def test_affine_single_layer(self):
        labels = np.array([[1, 0], [0, 1]])
        prob = Problem(MlpModel((3, 2), ("identity",)), "least_squares",
                       no_reg(), Dataset(np.zeros((2, 3)) + 1.0, labels))
        W = np.array([[1.0, 2.0, 3.0], [-1.0, 0.5, 0.0]])
        shift = np.array([0.25, -0.75])
        w = np.concatenate([W.ravel(), shift])
        x = np.array([1.0, -1.0, 2.0])
        pred, _ = mlp_forward(prob, w, x)
        np.testing.assert_allclose(pred, W @ x + shift, atol=1e-15)

    def test_caches_reproduce_forward(self):
        rng = np.random.default_rng(9)
        labels = np.zeros((6, 3))
        labels[np.arange(6), rng.integers(0, 3, 6)] = 1.0
        prob = Problem(mlp((5, 4, 4, 3), ("tanh", "sigmoid", "identity")),
                       "least_squares", no_reg(),
                       Dataset(rng.standard_normal((6, 5)), labels))
        w = prob.initial_point(2)
        x = rng.standard_normal(5)
        pred, (pre, post) = mlp_forward(prob, w, x)
        assert pred.shape == (3,)
        assert len(pre) == 3 and len(post) == 4
        np.testing.assert_array_equal(post[0], x)
        # recompute each layer from the cached pre-activations
        acts = ("tanh", "sigmoid", "identity")
        for z, a_next, kind in zip(pre, post[1:], acts):
            ref = {"tanh": np.tanh, "sigmoid": lambda t: 1 / (1 + np.exp(-t)),
                   "identity": lambda t: t}[kind](z)
            np.testing.assert_allclose(a_next, ref, atol=1e-15)
        np.testing.assert_array_equal(pred, post[-1])


class TestParameterCount:
    def test_paper_network(self):
        assert mlp_parameter_count([5, 4, 4, 3]) == 59

    def test_smallest(self):
        assert mlp_parameter_count([1, 1]) == 2

    def test_direct_sum(self):
        assert mlp_parameter_count([2, 3, 1]) == 13

    def test_needs_two_layers(self):
        with pytest.raises(ValueError):
            mlp_parameter_count([4])


class TestConv2dValid:
    def test_figure_example_exact(self):
        data = np.array([[1, 8, 0, 2], [9, 1, 7, 0], [2, 8, 0, 8], [1, 0, 9, 2]],
                        dtype=float)
        filt = np.array([[0, 1], [1, 0]], dtype=float)
        expected = np.array([[17, 1, 9], [3, 15, 0], [9, 0, 17]], dtype=float)
        np.testing.assert_array_equal(conv2d_valid(data, filt), expected)

    def test_identity_filter(self):
        rng = np.random.default_rng(3)
        data = rng.standard_normal((4, 5))
        np.testing.assert_array_equal(conv2d_valid(data, np.array([[1.0]])), data)

    def test_patch_sums(self):
        out = conv2d_valid(np.ones((3, 3)), np.ones((2, 2)))
        np.testing.assert_array_equal(out, np.full((2, 2), 4.0))

    def test_filter_too_large(self):
        with pytest.raises(ValueError):
            conv2d_valid(np.ones((2, 2)), np.ones((3, 1)))


class TestPredictLabel:
    def test_binary_sign(self):
        data = Dataset(np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([1.0, -1.0]))
        prob = Problem(LinearModel(), "logistic", no_reg(), data)
        assert prob.predict_label(np.array([1.0, 0.0]), np.array([2.0, 3.0])) == 1.0

    def test_zero_maps_to_plus_one(self):
        data = Dataset(np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([1.0, -1.0]))
        prob = Problem(LinearModel(), "logistic", no_reg(), data)
        assert prob.predict_label(np.array([1.0, 0.0]), np.array([0.0, 5.0])) == 1.0

    def test_multiclass_argmax(self):
        labels = np.array([[1.0, 0.0, 0.0]])
        prob = Problem(MlpModel((1, 3), ("identity",)), "least_squares",
                       no_reg(), Dataset(np.array([[1.0]]), labels))
        w = np.concatenate([np.array([0.1, 0.7, 0.2]), np.zeros(3)])
        assert prob.predict_label(w, np.array([1.0])) == 1


class TestStructuralInvariants:
    def test_logistic_l2_convexity_and_strong_gap(self):
        data = gen_synthetic("two_gaussians", 40, 6, seed=8)
        lam = 0.05
        prob = Problem(LinearModel(), "logistic", l2(lam), data)
        rng = np.random.default_rng(12)
        for _ in range(20):
            w1, w2 = rng.standard_normal((2, 6))
            t = rng.uniform(0.05, 0.95)
            mix = prob.value(t * w1 + (1 - t) * w2)
            chord = t * prob.value(w1) + (1 - t) * prob.value(w2)
            assert mix <= chord + 1e-12
            gap = chord - mix
            assert gap >= lam * t * (1 - t) * np.sum((w1 - w2) ** 2) - 1e-10

    def test_separable_ray_strictly_decreasing(self):
        data = gen_synthetic("two_gaussians", 200, 5, seed=3, margin=10.0)
        prob = Problem(LinearModel(), "logistic", no_reg(), data)
        w = np.zeros(5)
        w[0] = 1.0
        assert np.min(data.labels * (data.features @ w)) > 0
        vals = [prob.value(theta * w) for theta in range(1, 11)]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_oracles_do_not_mutate_inputs(self):
        prob = two_sample_problem(l2(0.1))
        w = np.array([0.4, -0.7])
        w_copy = w.copy()
        feats = prob.data.features.copy()
        prob.value(w)
        prob.gradient(w)
        prob.hessian_vector_product(w, w)
        np.testing.assert_array_equal(w, w_copy)
        np.testing.assert_array_equal(prob.data.features, feats)
        with pytest.raises(ValueError):
            prob.data.features[0, 0] = 99.0

    def test_regularizer_validation(self):
        with pytest.raises(ValueError):
            Regularizer("l2", -1.0)
        with pytest.raises(ValueError):
            Regularizer("elastic", 0.1)
