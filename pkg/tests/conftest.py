"""Shared helpers: finite-difference oracles and synthetic datasets."""

from __future__ import annotations

import csv

import numpy as np
from scipy.special import expit


def central_difference_gradient(potential, q, scale=1e-6):
    """Central finite differences with per-coordinate step scale*max(1, |q_i|)."""
    q = np.asarray(q, dtype=float)
    grad = np.empty_like(q)
    for i in range(q.size):
        h = scale * max(1.0, abs(q[i]))
        forward = q.copy()
        backward = q.copy()
        forward[i] += h
        backward[i] -= h
        grad[i] = (potential(forward) - potential(backward)) / (2.0 * h)
    return grad


def assert_gradient_matches(model, points, rtol=1e-5):
    """Model gradients agree with finite differences of the potential."""
    for q in points:
        numeric = central_difference_gradient(model.potential, q)
        analytic = model.gradient(q)
        scale = max(float(np.linalg.norm(numeric)), 1e-12)
        err = float(np.linalg.norm(analytic - numeric)) / scale
        assert err < rtol, f"gradient mismatch at {q}: rel err {err:.2e}"


def write_logistic_csv(path, n=532, num_covariates=7, seed=0):
    """A synthetic binary-classification table with mixed covariate scales."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, num_covariates))
    if num_covariates >= 2:
        x[:, 1] = 0.6 * x[:, 0] + 0.8 * x[:, 1]  # some collinearity
    x *= np.linspace(0.5, 3.0, num_covariates)  # varied scales
    beta = rng.normal(0.0, 1.0, num_covariates)
    z = 0.3 + (x / x.std(axis=0)) @ beta
    y = (rng.random(n) < expit(z)).astype(int)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"c{i + 1}" for i in range(num_covariates)] + ["label"])
        for row, label in zip(x, y):
            writer.writerow([f"{v:.10g}" for v in row] + [label])
    return path


def ar1_series(rho, n, rng):
    """A stationary AR(1) chain with unit innovations."""
    x = np.empty(n)
    x[0] = rng.standard_normal() / np.sqrt(1.0 - rho * rho) if rho != 0 else rng.standard_normal()
    noise = rng.standard_normal(n)
    for t in range(1, n):
        x[t] = rho * x[t - 1] + noise[t]
    return x
