"""Target families: standard Gaussian, Bayesian logistic regression, and a
multivariate student-t with a first-order autoregressive precision.

Logistic-regression designs come from CSV files (header row, real-valued
covariate columns, final column a 0/1 label).  Covariates are centred and
scaled before fitting so adapted step sizes are comparable across data
sets, and an intercept column of ones is prepended.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit

from .core import TargetModel

__all__ = [
    "StdGaussianModel",
    "LogisticRegressionModel",
    "StudentTModel",
    "Dataset",
    "DatasetFormatError",
    "ar1_precision",
    "load_dataset",
    "standardize_design",
]


class StdGaussianModel(TargetModel):
    """Standard Gaussian in d dimensions: U(q) = q.q/2, grad U(q) = q."""

    def __init__(self, dim: int):
        super().__init__()
        if dim < 1:
            raise ValueError("dimension must be >= 1")
        self._dim = int(dim)

    @property
    def dim(self) -> int:
        return self._dim

    def potential(self, q: np.ndarray) -> float:
        return 0.5 * float(q @ q)

    def _gradient(self, q: np.ndarray) -> np.ndarray:
        return np.array(q, dtype=float)


class LogisticRegressionModel(TargetModel):
    """Bayesian logistic regression with an isotropic Gaussian prior.

    The design matrix carries an explicit intercept (first column all
    ones).  The potential is the negative Bernoulli log likelihood plus
    the prior term beta.beta / (2 * prior_variance); log-sigmoid terms are
    evaluated through log(1 + e^z) so large linear predictors saturate
    without overflow.
    """

    def __init__(self, design: np.ndarray, labels: np.ndarray, prior_variance: float = 100.0):
        super().__init__()
        design = np.asarray(design, dtype=float)
        labels = np.asarray(labels, dtype=float)
        if design.ndim != 2:
            raise ValueError("design matrix must be 2-d")
        if labels.shape != (design.shape[0],):
            raise ValueError("labels must align with design rows")
        if not np.isin(labels, (0.0, 1.0)).all():
            raise ValueError("labels must be 0 or 1")
        if not np.all(design[:, 0] == 1.0):
            raise ValueError("first design column must be the intercept (all ones)")
        if prior_variance <= 0:
            raise ValueError("prior variance must be positive")
        self._x = design
        self._y = labels
        self._prior_variance = float(prior_variance)

    @property
    def dim(self) -> int:
        return self._x.shape[1]

    @property
    def num_observations(self) -> int:
        return self._x.shape[0]

    @property
    def prior_variance(self) -> float:
        return self._prior_variance

    def potential(self, beta: np.ndarray) -> float:
        z = self._x @ beta
        # softplus(z) - y*z summed over observations, then the prior
        nll = float(np.logaddexp(0.0, z).sum() - self._y @ z)
        return nll + 0.5 * float(beta @ beta) / self._prior_variance

    def _gradient(self, beta: np.ndarray) -> np.ndarray:
        z = self._x @ beta
        return self._x.T @ (expit(z) - self._y) + beta / self._prior_variance


class StudentTModel(TargetModel):
    """Multivariate student-t kernel with precision Q and dof nu:

        U(x) = (nu + d)/2 * log(1 + x.Qx / nu).

    Q must be symmetric positive definite.  When Q is tridiagonal (as the
    AR(1) precision is) the quadratic form and gradient use the banded
    structure, keeping evaluations O(d).
    """

    def __init__(self, precision: np.ndarray, dof: float = 5.0):
        super().__init__()
        q = np.asarray(precision, dtype=float)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise ValueError("precision must be a square matrix")
        if not np.allclose(q, q.T, atol=1e-12):
            raise ValueError("precision must be symmetric")
        if dof <= 0:
            raise ValueError("degrees of freedom must be positive")
        eigenvalues = np.linalg.eigvalsh(q)
        if eigenvalues[0] <= 0:
            raise ValueError("precision must be positive definite")
        self._q = q
        self._dof = float(dof)
        self._dim = q.shape[0]
        off_band = q - np.diag(np.diag(q))
        off_band -= np.diag(np.diag(q, 1), 1) + np.diag(np.diag(q, -1), -1)
        self._tridiagonal = self._dim >= 2 and not off_band.any()
        if self._tridiagonal:
            self._diag = np.diag(q).copy()
            self._off = np.diag(q, 1).copy()

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def dof(self) -> float:
        return self._dof

    @property
    def precision(self) -> np.ndarray:
        return self._q.copy()

    def _qx(self, x: np.ndarray) -> np.ndarray:
        if self._tridiagonal:
            out = self._diag * x
            out[:-1] += self._off * x[1:]
            out[1:] += self._off * x[:-1]
            return out
        return self._q @ x

    def potential(self, x: np.ndarray) -> float:
        quad = float(x @ self._qx(x))
        return 0.5 * (self._dof + self._dim) * math.log1p(quad / self._dof)

    def _gradient(self, x: np.ndarray) -> np.ndarray:
        qx = self._qx(x)
        quad = float(x @ qx)
        return (self._dof + self._dim) * qx / (self._dof + quad)


def ar1_precision(dim: int, rho: float) -> np.ndarray:
    """Tridiagonal precision of a stationary unit-innovation AR(1) chain.

    Corner diagonal entries are 1, interior entries 1 + rho^2, and the
    off-diagonals -rho; the inverse is the covariance rho^|i-j|/(1-rho^2).
    """
    if dim < 2:
        raise ValueError("dimension must be >= 2")
    if not -1.0 < rho < 1.0:
        raise ValueError("autocorrelation must lie in (-1, 1)")
    diagonal = np.full(dim, 1.0 + rho * rho)
    diagonal[0] = diagonal[-1] = 1.0
    matrix = np.diag(diagonal)
    off = np.full(dim - 1, -rho)
    matrix += np.diag(off, 1) + np.diag(off, -1)
    return matrix


# ---------------------------------------------------------------------------
# Dataset ingestion
# ---------------------------------------------------------------------------


class DatasetFormatError(ValueError):
    """A CSV did not match the expected covariates-then-binary-label layout."""


@dataclass(frozen=True)
class Dataset:
    """A binary-classification table: covariates, 0/1 labels, and the model
    dimension d (covariates plus intercept)."""

    name: str
    covariates: np.ndarray
    labels: np.ndarray

    @property
    def num_observations(self) -> int:
        return self.covariates.shape[0]

    @property
    def dim(self) -> int:
        return self.covariates.shape[1] + 1


def load_dataset(path) -> Dataset:
    """Read a dataset CSV: header row, covariate columns, last column 0/1.

    Raises :class:`DatasetFormatError` naming the offending row/column on
    ragged rows, unparseable numbers, or labels outside {0, 1}.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetFormatError(f"{path}: file is empty") from None
        if len(header) < 2:
            raise DatasetFormatError(f"{path}: need at least one covariate and a label column")
        width = len(header)
        covariate_rows = []
        labels = []
        for line_number, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise DatasetFormatError(
                    f"{path}: row {line_number} has {len(row)} fields, expected {width}"
                )
            values = []
            for column, cell in enumerate(row, start=1):
                try:
                    values.append(float(cell))
                except ValueError:
                    raise DatasetFormatError(
                        f"{path}: row {line_number}, column {column}: "
                        f"cannot parse {cell!r} as a number"
                    ) from None
            label = values[-1]
            if label not in (0.0, 1.0):
                raise DatasetFormatError(
                    f"{path}: row {line_number}: label {label!r} is not 0 or 1"
                )
            covariate_rows.append(values[:-1])
            labels.append(label)
    if not covariate_rows:
        raise DatasetFormatError(f"{path}: no data rows")
    return Dataset(
        name=path.stem,
        covariates=np.asarray(covariate_rows, dtype=float),
        labels=np.asarray(labels, dtype=float),
    )


def standardize_design(dataset: Dataset, prior_variance: float = 100.0) -> LogisticRegressionModel:
    """Centre and scale each covariate (denominator n), prepend an intercept
    column, and attach the Gaussian prior.

    Raises on covariate columns with zero variance, naming the column.
    """
    x = dataset.covariates
    if x.shape[0] < 2:
        raise ValueError("standardization needs at least two observations")
    means = x.mean(axis=0)
    scales = x.std(axis=0)
    zero = np.flatnonzero(scales == 0.0)
    if zero.size:
        raise ValueError(
            f"covariate column {zero[0] + 1} of {dataset.name!r} has zero variance"
        )
    standardized = (x - means) / scales
    design = np.column_stack([np.ones(x.shape[0]), standardized])
    return LogisticRegressionModel(design, dataset.labels, prior_variance)
