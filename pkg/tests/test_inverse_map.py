import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize

from decisionmap.classifier import ClassifierHandle, train_softmax
from decisionmap.datasets import Dataset, make_blobs
from decisionmap.errors import ParameterError, UnsupportedError
from decisionmap.inverse_map import (
    InverseMapModel,
    constant_sigma_hat,
    evaluate,
    evaluate_batch,
    local_metrics,
    merge_duplicate_anchors,
    optimal_learning_rate,
    similarity_weights,
    train,
    training_gradient,
)

from conftest import finite_diff_gradient, golden_section_line_search


def simple_model(anchors, theta, sigma=None, a=1.0, b=1.0):
    anchors = np.asarray(anchors, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    if sigma is None:
        sigma = np.ones(anchors.shape[0])
    return InverseMapModel(anchors2d=anchors, theta=theta, sigma_hat=np.asarray(sigma),
                           a=a, b=b)


class TestEvaluate:
    def test_single_anchor_constant(self):
        model = simple_model([[0.0, 0.0]], [[1.0], [2.0], [3.0]])
        for y in ([0.0, 0.0], [5.0, -7.0], [1e3, 1e3]):
            assert np.array_equal(evaluate(model, y), np.array([1.0, 2.0, 3.0]))

    def test_equidistant_midpoint(self):
        model = simple_model([[-1.0, 0.0], [1.0, 0.0]], [[0.0, 4.0], [2.0, 6.0]])
        out = evaluate(model, [0.0, 3.0])
        assert np.allclose(out, [2.0, 4.0], atol=1e-12)

    def test_query_at_far_anchor_recovers_column(self):
        rng = np.random.default_rng(0)
        anchors = np.array([[0.0, 0.0], [12.0, 0.0], [0.0, 15.0], [14.0, 14.0]])
        theta = rng.normal(size=(5, 4))
        model = simple_model(anchors, theta)
        for j in range(4):
            out = evaluate(model, anchors[j])
            err = np.linalg.norm(out - theta[:, j]) / np.linalg.norm(theta[:, j])
            assert err < 0.05

    def test_convex_hull_property(self):
        rng = np.random.default_rng(1)
        theta = rng.normal(size=(3, 6))
        model = simple_model(rng.normal(scale=4.0, size=(6, 2)), theta)
        ys = rng.normal(scale=20.0, size=(50, 2))
        out = evaluate_batch(model, ys)
        lo = theta.min(axis=1) - 1e-12
        hi = theta.max(axis=1) + 1e-12
        assert np.all(out >= lo) and np.all(out <= hi)

    def test_far_query_log_space_guard(self):
        model = simple_model([[0.0, 0.0], [1.0, 0.0]], [[1.0, 3.0]])
        out = evaluate(model, [1e200, 0.0])
        assert np.all(np.isfinite(out))
        assert 1.0 - 1e-9 <= out[0] <= 3.0 + 1e-9

    def test_batch_row_matches_single(self):
        rng = np.random.default_rng(2)
        model = simple_model(rng.normal(size=(8, 2)), rng.normal(size=(4, 8)))
        ys = rng.normal(size=(40, 2))
        batch = evaluate_batch(model, ys)
        assert np.array_equal(batch[17], evaluate(model, ys[17]))

    def test_lipschitz_sample(self):
        rng = np.random.default_rng(3)
        model = simple_model(rng.normal(scale=3.0, size=(10, 2)),
                             rng.normal(size=(4, 10)))
        span = np.linalg.norm(model.theta.max(axis=1) - model.theta.min(axis=1))
        ys = rng.uniform(-6, 6, size=(200, 2))
        deltas = rng.normal(scale=1e-3, size=(200, 2))
        a = evaluate_batch(model, ys)
        b = evaluate_batch(model, ys + deltas)
        step = np.linalg.norm(deltas, axis=1)
        jump = np.linalg.norm(a - b, axis=1)
        # crude anchor-geometry bound: kernels vary at unit scale, so the
        # output moves by at most ~theta-span per unit of query motion
        assert np.all(jump <= 50.0 * span * step)


class TestTrain:
    @staticmethod
    def isometric_pairs(n=20, dim=7, seed=4):
        rng = np.random.default_rng(seed)
        grid = np.stack(np.meshgrid(np.arange(5.0), np.arange(4.0)), axis=-1).reshape(-1, 2)
        coords = grid * 3.0
        basis, _ = np.linalg.qr(rng.normal(size=(dim, 2)))
        points = coords @ basis.T
        return points[:n], coords[:n]

    def test_error_reduction(self):
        points, coords = self.isometric_pairs()
        sigma = np.full(20, constant_sigma_hat(coords))
        model, report = train(points, coords, a=1.0, b=1.0, sigma_hat=sigma)
        before = np.linalg.norm(
            evaluate_batch(simple_model(coords, points.T, sigma), coords) - points, axis=1
        ).mean()
        after = np.linalg.norm(evaluate_batch(model, coords) - points, axis=1).mean()
        assert after <= 0.1 * before
        assert report.loss_trace[-1] <= report.loss_trace[0]

    def test_single_pair_immediate_zero(self):
        model, report = train(np.array([[2.0, -1.0]]), np.array([[0.3, 0.4]]),
                              a=1.0, b=1.0, sigma_hat=np.ones(1))
        assert report.loss_trace[0] == 0.0
        assert report.iterations <= 1
        assert np.array_equal(evaluate(model, [0.3, 0.4]), np.array([2.0, -1.0]))

    def test_zero_momentum_monotone(self):
        points, coords = self.isometric_pairs(seed=5)
        sigma = np.full(20, constant_sigma_hat(coords))
        _, report = train(points, coords, a=1.0, b=1.0, sigma_hat=sigma,
                          momentum=0.0, max_iters=60)
        trace = np.array(report.loss_trace)
        assert np.all(trace[1:] <= trace[:-1] + 1e-12)

    def test_momentum_final_not_worse(self):
        points, coords = self.isometric_pairs(seed=6)
        sigma = np.full(20, constant_sigma_hat(coords))
        _, report = train(points, coords, a=1.0, b=1.0, sigma_hat=sigma, momentum=0.9)
        assert report.loss_trace[-1] <= report.loss_trace[0]

    def test_bad_momentum_rejected(self):
        with pytest.raises(ParameterError):
            train(np.ones((3, 2)), np.ones((3, 2)), 1.0, 1.0, np.ones(3), momentum=1.0)


class TestOptimalLearningRate:
    def test_single_anchor_newton_step(self):
        theta = np.array([[5.0], [1.0]])
        target = np.array([[1.0], [3.0]])
        w = np.array([[1.0]])
        grad = training_gradient(theta, w, target)
        eta = optimal_learning_rate(theta, grad, w, target)
        stepped = theta - eta * grad
        assert np.allclose(stepped, target, atol=1e-12)

    def test_zero_direction_returns_zero(self):
        theta = np.ones((2, 3))
        assert optimal_learning_rate(theta, np.zeros_like(theta), np.eye(3), theta) == 0.0

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_matches_golden_section_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n, d = 8, 5
        theta = rng.normal(size=(d, n))
        w = rng.dirichlet(np.ones(n), size=n).T
        targets = rng.normal(size=(d, n))
        metrics = rng.uniform(0.2, 3.0, size=(n, d))
        direction = training_gradient(theta, w, targets, metrics)

        def line_loss(eta):
            resid = (theta - eta * direction) @ w - targets
            return float((resid * (metrics.T * resid)).sum())

        eta = optimal_learning_rate(theta, direction, w, targets, metrics)
        oracle = golden_section_line_search(line_loss)
        assert eta == pytest.approx(oracle, abs=1e-8)


class TestTrainingGradient:
    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=20, deadline=None)
    def test_matches_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        n, d = 5, 3
        theta = rng.normal(size=(d, n))
        w = rng.dirichlet(np.ones(n), size=n).T
        targets = rng.normal(size=(d, n))
        metrics = rng.uniform(0.2, 3.0, size=(n, d))
        grad = training_gradient(theta, w, targets, metrics)

        def loss_flat(flat):
            t = flat.reshape(d, n)
            resid = t @ w - targets
            return float((resid * (metrics.T * resid)).sum())

        fd = finite_diff_gradient(loss_flat, theta.ravel()).reshape(d, n)
        denom = np.maximum(np.abs(fd), 1e-6)
        assert np.all(np.abs(2.0 * grad - fd) / denom <= 1e-4)


class TestLocalMetrics:
    def test_identity_mode(self, blobs_small):
        assert local_metrics(blobs_small, None, mode="identity") is None

    def test_constant_classifier_floors(self):
        data = Dataset(np.random.default_rng(0).normal(size=(10, 3)))
        h = ClassifierHandle(class_count=2, kind="softmax_linear", batch_limit=1 << 20,
                             dim=3, layers=((np.zeros((3, 2)), np.zeros(2)),))
        entries = local_metrics(data, h, mode="fisher_diag")
        assert np.all(entries == 1e-6)

    def test_logistic_peaks_near_boundary(self):
        w = np.array([[3.0, -3.0], [0.0, 0.0]])
        h = ClassifierHandle(class_count=2, kind="softmax_linear", batch_limit=1 << 20,
                             dim=2, layers=((w, np.zeros(2)),))
        pts = np.array([[0.0, 0.0], [3.0, 0.0]])  # on and far from the boundary
        entries = local_metrics(Dataset(pts), h, mode="fisher_diag")
        assert entries[0, 0] > entries[1, 0]
        assert entries[0, 0] > entries[0, 1]  # sensitive along x, flat along y

    def test_fd_oracle(self):
        rng = np.random.default_rng(1)
        w = rng.normal(size=(2, 3))
        h = ClassifierHandle(class_count=3, kind="softmax_linear", batch_limit=1 << 20,
                             dim=2, layers=((w, np.zeros(3)),))
        pts = rng.normal(size=(5, 2))
        entries = local_metrics(Dataset(pts), h, mode="fisher_diag")
        from decisionmap.fisher_metric import js_sqrt_distance
        from decisionmap.classifier import predict_batch

        for i in range(5):
            for axis in range(2):
                e = np.zeros(2)
                e[axis] = 1e-3
                p = predict_batch(h, (pts[i] + e)[None])[0]
                m = predict_batch(h, (pts[i] - e)[None])[0]
                expected = (js_sqrt_distance(p, m) / 2e-3) ** 2
                expected = min(max(expected, 1e-6), 1e6)
                assert entries[i, axis] == pytest.approx(expected, rel=1e-9)

    def test_external_unsupported(self, blobs_small):
        h = ClassifierHandle(class_count=3, kind="external", batch_limit=8, dim=4)
        with pytest.raises(UnsupportedError):
            local_metrics(blobs_small, h, mode="fisher_diag")

    def test_high_dim_rejected(self):
        data = Dataset(np.zeros((3, 65)))
        h = ClassifierHandle(class_count=2, kind="softmax_linear", batch_limit=1 << 20,
                             dim=65, layers=((np.zeros((65, 2)), np.zeros(2)),))
        with pytest.raises(ParameterError):
            local_metrics(data, h, mode="fisher_diag")


class TestBarycenterLemma:
    def test_weighted_metric_minimizer_is_euclidean_mean(self):
        rng = np.random.default_rng(7)
        for d in (2, 5):
            base = rng.normal(size=(d, d))
            spd = base @ base.T + d * np.eye(d)
            pts = rng.normal(size=(6, d))
            wts = rng.uniform(0.1, 1.0, size=6)
            closed = (wts[:, None] * pts).sum(axis=0) / wts.sum()

            def objective(x):
                diff = x[None, :] - pts
                return float((wts * np.einsum("id,de,ie->i", diff, spd, diff)).sum())

            res = minimize(objective, rng.normal(size=d), method="BFGS",
                           options={"gtol": 1e-12})
            assert np.allclose(res.x, closed, atol=1e-8)


class TestMergeAnchors:
    def test_merge_preserves_function(self):
        anchors = np.array([[0.0, 0.0], [0.0, 0.0], [2.0, 1.0]])
        theta = np.array([[1.0, 3.0, 10.0]])
        sigma = np.array([0.5, 1.0, 1.0])
        model = simple_model(anchors, theta, sigma)
        merged = merge_duplicate_anchors(model)
        assert merged.n == 2
        for y in ([0.0, 0.0], [1.0, 0.5], [-3.0, 2.0]):
            assert evaluate(merged, y) == pytest.approx(evaluate(model, y), rel=1e-12)

    def test_no_duplicates_untouched(self):
        model = simple_model([[0.0, 0.0], [1.0, 1.0]], [[1.0, 2.0]])
        assert merge_duplicate_anchors(model) is model
