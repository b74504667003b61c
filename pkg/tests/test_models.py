import math

import mpmath as mp
import numpy as np
import pytest

from splithmc import (
    Dataset,
    DatasetFormatError,
    LogisticRegressionModel,
    StudentTModel,
    ar1_precision,
    load_dataset,
    standardize_design,
)

from conftest import assert_gradient_matches, write_logistic_csv


class TestLogisticRegression:
    def test_single_observation_hand_value(self):
        model = LogisticRegressionModel(np.array([[1.0]]), np.array([1.0]))
        beta = np.zeros(1)
        assert model.potential(beta) == pytest.approx(math.log(2.0), rel=1e-14)
        np.testing.assert_allclose(model.gradient(beta), [-0.5], atol=1e-15)

    def test_prior_vanishes_at_zero(self):
        rng = np.random.default_rng(0)
        design = np.column_stack([np.ones(30), rng.standard_normal((30, 3))])
        labels = (rng.random(30) < 0.5).astype(float)
        with_prior = LogisticRegressionModel(design, labels, prior_variance=100.0)
        tight_prior = LogisticRegressionModel(design, labels, prior_variance=1e-6)
        beta = np.zeros(4)
        assert with_prior.potential(beta) == tight_prior.potential(beta)
        np.testing.assert_array_equal(with_prior.gradient(beta), tight_prior.gradient(beta))

    def test_saturated_predictor_is_stable(self):
        """At x.beta = 50 the likelihood terms saturate without overflow and
        match a 50-digit reference computation."""
        model = LogisticRegressionModel(np.array([[1.0]]), np.array([1.0]), prior_variance=100.0)
        beta = np.array([50.0])
        with mp.workdps(50):
            z = mp.mpf(50)
            expected_u = mp.log(1 + mp.e**z) - z + z * z / 200
            expected_g = -(1 - 1 / (1 + mp.e**-z)) + z / 100
            assert model.potential(beta) == pytest.approx(float(expected_u), rel=1e-14)
            assert model.gradient(beta)[0] == pytest.approx(float(expected_g), rel=1e-12)
        big = LogisticRegressionModel(np.array([[1.0]]), np.array([1.0]))
        assert math.isfinite(big.potential(np.array([1e4])))
        assert np.isfinite(big.gradient(np.array([1e4]))).all()

    def test_convex_along_random_segments(self):
        rng = np.random.default_rng(9)
        n, d = 25, 3
        design = np.column_stack([np.ones(n), rng.standard_normal((n, d - 1))])
        labels = (rng.random(n) < 0.4).astype(float)
        model = LogisticRegressionModel(design, labels)
        for _ in range(40):
            a = rng.standard_normal(d) * 3
            b = rng.standard_normal(d) * 3
            mid = model.potential((a + b) / 2)
            assert mid <= 0.5 * (model.potential(a) + model.potential(b)) + 1e-12

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            LogisticRegressionModel(np.array([[1.0]]), np.array([2.0]))
        with pytest.raises(ValueError):
            LogisticRegressionModel(np.array([[0.5]]), np.array([1.0]))


class TestStudentT:
    def test_kernel_maximum(self):
        model = StudentTModel(ar1_precision(4, 0.5), dof=5.0)
        assert model.potential(np.zeros(4)) == 0.0
        np.testing.assert_array_equal(model.gradient(np.zeros(4)), np.zeros(4))

    def test_one_dimensional_hand_values(self):
        model = StudentTModel(np.array([[1.0]]), dof=5.0)
        x = np.array([1.0])
        assert model.potential(x) == pytest.approx(3 * math.log(1.2), rel=1e-13)
        assert model.gradient(x)[0] == pytest.approx(1.0, rel=1e-13)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(12)
        model = StudentTModel(ar1_precision(10, 0.95), dof=5.0)
        assert_gradient_matches(model, rng.standard_normal((20, 10)))

    def test_even_kernel(self):
        rng = np.random.default_rng(13)
        model = StudentTModel(ar1_precision(5, 0.8), dof=5.0)
        for _ in range(20):
            x = rng.standard_normal(5) * 2
            assert model.potential(x) == model.potential(-x)

    def test_tridiagonal_path_matches_dense(self):
        rng = np.random.default_rng(14)
        q = ar1_precision(50, 0.95)
        fast = StudentTModel(q, dof=5.0)
        assert fast._tridiagonal
        for _ in range(10):
            x = rng.standard_normal(50)
            np.testing.assert_allclose(fast._qx(x), q @ x, rtol=1e-13)

    def test_dense_precision_accepted(self):
        q = np.array([[2.0, 0.3, 0.1], [0.3, 1.5, 0.2], [0.1, 0.2, 1.0]])
        model = StudentTModel(q, dof=4.0)
        assert not model._tridiagonal
        rng = np.random.default_rng(15)
        assert_gradient_matches(model, rng.standard_normal((10, 3)))

    def test_rejects_indefinite_precision(self):
        with pytest.raises(ValueError):
            StudentTModel(np.array([[1.0, 2.0], [2.0, 1.0]]), dof=5.0)


class TestAr1Precision:
    def test_three_by_three(self):
        got = ar1_precision(3, 0.95)
        expected = np.array(
            [[1.0, -0.95, 0.0], [-0.95, 1.9025, -0.95], [0.0, -0.95, 1.0]]
        )
        np.testing.assert_allclose(got, expected, atol=1e-15)

    def test_zero_autocorrelation_is_identity(self):
        np.testing.assert_array_equal(ar1_precision(5, 0.0), np.eye(5))

    def test_inverse_matches_analytic_covariance(self):
        d, rho = 40, 0.95
        precision = ar1_precision(d, rho)
        idx = np.arange(d)
        covariance = rho ** np.abs(idx[:, None] - idx[None, :]) / (1 - rho * rho)
        np.testing.assert_allclose(np.linalg.inv(covariance), precision, atol=1e-10)

    @pytest.mark.parametrize("d", [2, 7, 200])
    def test_positive_definite_and_inverse_pair(self, d):
        rho = 0.95
        precision = ar1_precision(d, rho)
        np.testing.assert_array_equal(precision, precision.T)
        assert np.linalg.eigvalsh(precision)[0] > 0
        idx = np.arange(d)
        covariance = rho ** np.abs(idx[:, None] - idx[None, :]) / (1 - rho * rho)
        np.testing.assert_allclose(precision @ covariance, np.eye(d), atol=1e-8)

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            ar1_precision(1, 0.5)
        with pytest.raises(ValueError):
            ar1_precision(5, 1.0)


class TestLoadDataset:
    def test_toy_csv(self, tmp_path):
        path = tmp_path / "toy.csv"
        path.write_text("a,b,label\n1,2,0\n3,4,1\n5,6,0\n", encoding="utf-8")
        dataset = load_dataset(path)
        assert dataset.num_observations == 3
        assert dataset.dim == 3  # two covariates plus intercept
        np.testing.assert_array_equal(dataset.labels, [0.0, 1.0, 0.0])

    def test_bad_label_names_row(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,label\n1,0\n2,2\n", encoding="utf-8")
        with pytest.raises(DatasetFormatError, match="row 3"):
            load_dataset(path)

    def test_ragged_row_located(self, tmp_path):
        path = tmp_path / "ragged.csv"
        path.write_text("a,b,label\n1,2,0\n1,0\n", encoding="utf-8")
        with pytest.raises(DatasetFormatError, match="row 3"):
            load_dataset(path)

    def test_non_numeric_cell_located(self, tmp_path):
        path = tmp_path / "text.csv"
        path.write_text("a,label\nx,0\n", encoding="utf-8")
        with pytest.raises(DatasetFormatError, match="row 2, column 1"):
            load_dataset(path)

    def test_synthetic_generator_shape(self, tmp_path):
        path = write_logistic_csv(tmp_path / "synthetic.csv", n=250, num_covariates=6, seed=3)
        dataset = load_dataset(path)
        assert dataset.num_observations == 250
        assert dataset.dim == 7


class TestStandardizeDesign:
    def test_hand_standardization(self):
        dataset = Dataset("toy", np.array([[1.0], [2.0], [3.0]]), np.array([0.0, 1.0, 0.0]))
        model = standardize_design(dataset)
        column = model._x[:, 1]
        np.testing.assert_allclose(column, [-1.2247, 0.0, 1.2247], atol=1e-4)

    def test_intercept_column(self):
        rng = np.random.default_rng(2)
        dataset = Dataset("r", rng.standard_normal((20, 3)), (rng.random(20) < 0.5).astype(float))
        model = standardize_design(dataset)
        assert model.dim == 4
        np.testing.assert_array_equal(model._x[:, 0], np.ones(20))
        assert model.prior_variance == 100.0

    def test_idempotent(self):
        rng = np.random.default_rng(6)
        dataset = Dataset("r", rng.standard_normal((50, 4)) * 7 + 3, (rng.random(50) < 0.5).astype(float))
        once = standardize_design(dataset)
        again = standardize_design(Dataset("r2", once._x[:, 1:], dataset.labels))
        np.testing.assert_allclose(again._x, once._x, atol=1e-12)

    def test_zero_variance_column_named(self):
        data = np.column_stack([np.ones(10), np.arange(10.0)])
        dataset = Dataset("flat", data, np.zeros(10))
        with pytest.raises(ValueError, match="column 1"):
            standardize_design(dataset)
