"""Exact and asymptotic efficiency analysis on the standard Gaussian target.

For U(q) = q.q/2 every coordinate evolves independently under one
integrator step as a linear map: a 2x2 matrix built from the scheme's
drift shears [[1, c*eps], [0, 1]] and kick shears [[1, 0], [-b*eps, 1]].
All four schemes are palindromic, so the matrix has unit determinant and
equal diagonal entries, and L steps amount to a matrix power that rotates
phase space by L*theta with cos(theta) = trace/2.

Choosing eps so that the diagonal of the L-step matrix vanishes (theta =
pi/(2L), i.e. eps*L close to pi/2) makes the proposal independent of the
current state: q* = r * p0 and p* = s * q0 with r*s = -1.  The energy
gain of such a proposal is

    delta = 1/2 * sum_i [(1 - s^2) q_i^2 + (1 - r^2) p_i^2],

a sum of d iid terms, so its mean and variance are exact chi-square
algebra and a central limit argument gives the expected acceptance
E[min(1, e^Z)] for Z normal in the large-d limit.  Efficiency is that
acceptance divided by the gradient cost L * cost_per_step of the
trajectory; maximising it over L reproduces how the schemes rank as the
dimension grows.

Numerical notes: the matrix entries are kept as exact polynomials in eps
(built once per scheme), and the independence step size is refined with
extended-precision arithmetic.  The quantities that drive the moments are
u = r - 1 and v = s + 1; they can be as small as 1e-14 where double
subtraction would lose every significant digit, so they are formed in
extended precision and only then rounded.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import mpmath as mp
import numpy as np
from scipy.special import log_ndtr, ndtr

from .integrators import DRIFT, Scheme, build_stage_sequence, coefficients, scheme_constants

__all__ = [
    "NoIndependencePointError",
    "PropagationMatrix",
    "IndependencePoint",
    "EnergyErrorMoments",
    "EfficiencyPoint",
    "propagation_matrix",
    "matrix_power",
    "independence_step_size",
    "energy_error_moments",
    "asymptotic_acceptance",
    "efficiency_point",
    "best_efficiency",
    "default_dimension_grid",
    "efficiency_curves",
    "write_efficiency_curves",
    "EFFICIENCY_CSV_HEADER",
]

_EPS_MAX = 10.0
_MP_DPS = 50


class NoIndependencePointError(ValueError):
    """No step size inside the stability interval makes the L-step map's
    diagonal vanish for this scheme."""


# ---------------------------------------------------------------------------
# Polynomial form of the one-step map
# ---------------------------------------------------------------------------


def _poly_matrix(kind: Scheme, constants: dict, zero, one):
    """Entries of the one-step map as polynomials in eps (index = power).

    Arithmetic is generic so the same construction serves float64 and
    extended precision.
    """

    def polymul(a, b):
        out = [zero] * (len(a) + len(b) - 1)
        for i, x in enumerate(a):
            for j, y in enumerate(b):
                out[i + j] = out[i + j] + x * y
        return out

    def polyadd(a, b):
        n = max(len(a), len(b))
        out = [zero] * n
        for i, x in enumerate(a):
            out[i] = out[i] + x
        for i, x in enumerate(b):
            out[i] = out[i] + x
        return out

    m = [[[one], [zero]], [[zero], [one]]]
    for op, c in build_stage_sequence(kind, constants):
        if op == DRIFT:
            shear = [[[one], [zero, c]], [[zero], [one]]]
        else:
            shear = [[[one], [zero]], [[zero, -c], [one]]]
        m = [
            [
                polyadd(polymul(shear[i][0], m[0][j]), polymul(shear[i][1], m[1][j]))
                for j in range(2)
            ]
            for i in range(2)
        ]
    return m


def _padded(coeffs, length, zero):
    return list(coeffs) + [zero] * (length - len(coeffs))


@lru_cache(maxsize=None)
def _float_polys(kind: Scheme):
    consts = scheme_constants()
    m = _poly_matrix(kind, consts, 0.0, 1.0)
    entries = {
        (i, j): np.asarray(m[i][j], dtype=float) for i in range(2) for j in range(2)
    }
    # 1 - trace/2 with the constant term cancelled symbolically
    n = max(len(m[0][0]), len(m[1][1]))
    m11 = np.asarray(_padded(m[0][0], n, 0.0))
    m22 = np.asarray(_padded(m[1][1], n, 0.0))
    one_minus = -0.5 * (m11 + m22)
    one_minus[0] = 0.0
    entries["one_minus_half_trace"] = one_minus
    return entries


@lru_cache(maxsize=None)
def _mp_polys(kind: Scheme):
    with mp.workdps(_MP_DPS):
        consts = scheme_constants(sqrt=mp.sqrt, number=mp.mpf)
        m = _poly_matrix(kind, consts, mp.mpf(0), mp.mpf(1))
        n = max(len(m[0][0]), len(m[1][1]))
        m11 = _padded(m[0][0], n, mp.mpf(0))
        m22 = _padded(m[1][1], n, mp.mpf(0))
        one_minus = [-(a + b) / 2 for a, b in zip(m11, m22)]
        one_minus[0] = mp.mpf(0)
        return {"m12": m[0][1], "m21": m[1][0], "one_minus_half_trace": one_minus}


def _horner(coeffs, x):
    acc = 0.0 * x
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


# ---------------------------------------------------------------------------
# One-step map and its powers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PropagationMatrix:
    """The linear one-step map [[m11, m12], [m21, m22]] per coordinate.

    ``theta`` is the rotation angle with cos(theta) = trace/2, present only
    inside the stability interval |trace| < 2.  The determinant is 1 up to
    rounding for every scheme and step size.
    """

    kind: Scheme
    eps: float
    m11: float
    m12: float
    m21: float
    m22: float
    theta: Optional[float]

    def as_array(self) -> np.ndarray:
        return np.array([[self.m11, self.m12], [self.m21, self.m22]])

    @property
    def determinant(self) -> float:
        return self.m11 * self.m22 - self.m12 * self.m21

    @property
    def stable(self) -> bool:
        return self.theta is not None


def _theta_from_gap(gap: float) -> Optional[float]:
    """Rotation angle from 1 - trace/2, stable for tiny angles."""
    if gap <= 0.0 or gap >= 2.0:
        return None
    return 2.0 * math.asin(math.sqrt(0.5 * gap))


def propagation_matrix(kind: Scheme, eps: float) -> PropagationMatrix:
    """One-step map of ``kind`` on the standard Gaussian at step size ``eps``."""
    if eps <= 0:
        raise ValueError("step size must be positive")
    polys = _float_polys(kind)
    gap = _horner(polys["one_minus_half_trace"], eps)
    return PropagationMatrix(
        kind=kind,
        eps=eps,
        m11=_horner(polys[0, 0], eps),
        m12=_horner(polys[0, 1], eps),
        m21=_horner(polys[1, 0], eps),
        m22=_horner(polys[1, 1], eps),
        theta=_theta_from_gap(gap),
    )


def matrix_power(matrix: PropagationMatrix, num_steps: int) -> np.ndarray:
    """The L-step map ``matrix``^L as a 2x2 array.

    Inside the stability interval this uses the rotation-angle identity
    M^L = sin(L*theta)/sin(theta) * M - sin((L-1)*theta)/sin(theta) * I,
    valid for any unit-determinant matrix; outside it falls back to exact
    repeated squaring.
    """
    if num_steps < 1:
        raise ValueError("number of steps must be >= 1")
    a = matrix.as_array()
    if num_steps == 1:
        return a
    theta = matrix.theta
    if theta is None:
        return np.linalg.matrix_power(a, num_steps)
    sin_t = math.sin(theta)
    c1 = math.sin(num_steps * theta) / sin_t
    c2 = math.sin((num_steps - 1) * theta) / sin_t
    return c1 * a - c2 * np.eye(2)


# ---------------------------------------------------------------------------
# Independent proposals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IndependencePoint:
    """Step size at which L steps map (q0, p0) to (r*p0, s*q0).

    ``r`` and ``s`` are the off-diagonal entries of the L-step map once its
    diagonal vanishes; they satisfy r*s = -1.  ``r_minus_one`` and
    ``s_plus_one`` carry the small gaps u = r - 1 and v = s + 1 at full
    relative precision for the moment computations downstream.
    """

    kind: Scheme
    num_steps: int
    eps: float
    r: float
    s: float
    r_minus_one: float
    s_plus_one: float


def _bracket_smallest_root(kind: Scheme, target: float, step: float):
    """March the float polynomial upward to bracket the first crossing of
    1 - trace/2 through ``target``."""
    coeffs = _float_polys(kind)["one_minus_half_trace"]
    lo = 0.0
    while True:
        hi = lo + step
        if hi > _EPS_MAX:
            raise NoIndependencePointError(
                f"{kind.value}: no independence step size below eps={_EPS_MAX}"
            )
        if _horner(coeffs, hi) >= target:
            return lo, hi
        lo = hi


@lru_cache(maxsize=None)
def independence_step_size(kind: Scheme, num_steps: int) -> IndependencePoint:
    """Smallest eps > 0 whose L-step map has zero diagonal (|diag| < 1e-12).

    Solved by bracketing the angle condition theta(eps) = pi/(2L) on the
    float polynomial, then bisecting in extended precision; the off-diagonal
    pair is evaluated at the refined root.
    """
    if num_steps < 1:
        raise ValueError("number of steps must be >= 1")
    L = num_steps
    approx_root = math.pi / (2 * L)
    target_f = 1.0 - math.cos(approx_root)
    lo_f, hi_f = _bracket_smallest_root(kind, target_f, min(0.01, approx_root / 16))

    with mp.workdps(_MP_DPS):
        polys = _mp_polys(kind)
        gap_poly = polys["one_minus_half_trace"]
        target = 1 - mp.cos(mp.pi / (2 * L))
        lo, hi = mp.mpf(lo_f), mp.mpf(hi_f)
        pad = hi - lo
        # the float bracket can miss by a rounding; nudge endpoints if needed
        while _horner(gap_poly, lo) >= target and lo > 0:
            lo = max(mp.mpf(0), lo - pad)
        while _horner(gap_poly, hi) < target:
            hi = hi + pad
            if hi > _EPS_MAX:
                raise NoIndependencePointError(
                    f"{kind.value}: no independence step size below eps={_EPS_MAX}"
                )
        tol = mp.mpf(10) ** (-(_MP_DPS - 8))
        while hi - lo > tol * hi:
            mid = (lo + hi) / 2
            if _horner(gap_poly, mid) >= target:
                hi = mid
            else:
                lo = mid
        eps = (lo + hi) / 2

        gap = _horner(gap_poly, eps)
        theta = 2 * mp.asin(mp.sqrt(gap / 2))
        sin_theta = mp.sqrt(gap * (2 - gap))
        sin_L = mp.sin(L * theta)
        diag = mp.cos(L * theta)
        if abs(diag) >= 1e-12:
            raise NoIndependencePointError(
                f"{kind.value}, L={L}: diagonal only reached {float(diag):.3e}"
            )
        r = _horner(polys["m12"], eps) * sin_L / sin_theta
        s = _horner(polys["m21"], eps) * sin_L / sin_theta
        return IndependencePoint(
            kind=kind,
            num_steps=L,
            eps=float(eps),
            r=float(r),
            s=float(s),
            r_minus_one=float(r - 1),
            s_plus_one=float(s + 1),
        )


# ---------------------------------------------------------------------------
# Energy-error moments and expected acceptance
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EnergyErrorMoments:
    """Mean and variance of the trajectory energy gain in dimension d."""

    mean: float
    variance: float
    dim: int


def energy_error_moments(point: IndependencePoint, dim: int) -> EnergyErrorMoments:
    """Exact moments of delta = 1/2 sum[(1-s^2) q_i^2 + (1-r^2) p_i^2].

    With q_i, p_i iid standard normal each term contributes its coefficient
    to the mean and twice its square to the variance.  The coefficients are
    formed from the precision-carrying gaps u = r - 1, v = s + 1 because
    1 - r^2 and 1 - s^2 cancel almost exactly for accurate integrators.
    """
    if dim < 1:
        raise ValueError("dimension must be >= 1")
    u = point.r_minus_one
    v = point.s_plus_one
    a = v * (2.0 - v)  # 1 - s^2
    b = -u * (2.0 + u)  # 1 - r^2
    mean = 0.5 * dim * (a + b)
    variance = 0.5 * dim * (a * a + b * b)
    # r*s = -1 forces mean <= 0; clip rounding residue of order u^2*ulp
    return EnergyErrorMoments(mean=min(mean, 0.0), variance=variance, dim=dim)


def asymptotic_acceptance(moments: EnergyErrorMoments) -> float:
    """E[min(1, e^Z)] for Z ~ Normal(mean, variance), the large-d acceptance.

    Evaluates Phi(mu/sigma) + exp(mu + sigma^2/2) * Phi(-sigma - mu/sigma)
    with the second term kept in log space, so extreme parameters neither
    overflow nor round to garbage.
    """
    mu = moments.mean
    sigma2 = moments.variance
    if sigma2 < 0:
        raise ValueError("variance must be nonnegative")
    if sigma2 == 0.0:
        return 1.0
    sigma = math.sqrt(sigma2)
    first = float(ndtr(mu / sigma))
    second = math.exp(mu + 0.5 * sigma2 + float(log_ndtr(-sigma - mu / sigma)))
    return min(1.0, first + second)


# ---------------------------------------------------------------------------
# Efficiency over (scheme, d, L)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EfficiencyPoint:
    """Expected acceptance and accepted-moves-per-gradient at an
    independence point."""

    kind: Scheme
    dim: int
    num_steps: int
    eps: float
    expected_accept: float
    efficiency: float


def efficiency_point(kind: Scheme, dim: int, num_steps: int) -> EfficiencyPoint:
    """Acceptance and efficiency of ``kind`` at the (dim, L) independence point.

    Efficiency divides the expected acceptance by the gradient cost of the
    whole trajectory, cost_per_step * L.
    """
    point = independence_step_size(kind, num_steps)
    moments = energy_error_moments(point, dim)
    accept = asymptotic_acceptance(moments)
    cost = coefficients(kind).gradient_cost_per_step * num_steps
    return EfficiencyPoint(
        kind=kind,
        dim=dim,
        num_steps=num_steps,
        eps=point.eps,
        expected_accept=accept,
        efficiency=accept / cost,
    )


_MAX_CONSECUTIVE_DECREASES = 8


def best_efficiency(kind: Scheme, dim: int, max_steps: int = 4096) -> Optional[EfficiencyPoint]:
    """The efficiency-maximising L in 1..max_steps (ties go to smaller L).

    Efficiency along the independence curve is unimodal in practice, so the
    scan stops early once it has decreased eight times in a row.  Returns
    None when no L in range admits an independence point.
    """
    best: Optional[EfficiencyPoint] = None
    previous: Optional[float] = None
    decreases = 0
    for L in range(1, max_steps + 1):
        try:
            candidate = efficiency_point(kind, dim, L)
        except NoIndependencePointError:
            continue
        if best is None or candidate.efficiency > best.efficiency:
            best = candidate
        if previous is not None and candidate.efficiency < previous:
            decreases += 1
            if decreases >= _MAX_CONSECUTIVE_DECREASES:
                break
        else:
            decreases = 0
        previous = candidate.efficiency
    return best


def default_dimension_grid(
    low_exponent: int = 1, high_exponent: int = 6, points_per_decade: int = 10
) -> list:
    """Logarithmic integer dimension grid, ``points_per_decade`` per decade."""
    n = (high_exponent - low_exponent) * points_per_decade
    dims = {
        int(round(10 ** (low_exponent + k / points_per_decade))) for k in range(n + 1)
    }
    return sorted(dims)


def efficiency_curves(dims: Sequence[int], max_steps: int = 4096) -> dict:
    """Best efficiency per scheme across a dimension grid.

    Returns {scheme: {d: EfficiencyPoint}} with schemes in enum order.
    """
    if len(dims) == 0:
        raise ValueError("dimension grid must be nonempty")
    return {
        kind: {d: best_efficiency(kind, d, max_steps) for d in dims} for kind in Scheme
    }


EFFICIENCY_CSV_HEADER = [
    "scheme",
    "d",
    "L",
    "eps",
    "expected_accept",
    "upsilon",
    "ratio_vs_leapfrog",
]


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def write_efficiency_curves(curves: dict, sink) -> None:
    """Write the curve table as CSV: one row per (scheme, d) in scheme enum
    order then ascending d, floats at 12 significant digits."""
    if isinstance(sink, (str,)) or hasattr(sink, "__fspath__"):
        with open(sink, "w", newline="", encoding="utf-8") as fh:
            _write_curve_rows(curves, fh)
    else:
        _write_curve_rows(curves, sink)


def _write_curve_rows(curves: dict, fh) -> None:
    writer = csv.writer(fh)
    writer.writerow(EFFICIENCY_CSV_HEADER)
    leapfrog = curves.get(Scheme.LEAPFROG, {})
    for kind in Scheme:
        if kind not in curves:
            continue
        for d in sorted(curves[kind]):
            point = curves[kind][d]
            if point is None:
                continue
            reference = leapfrog.get(d)
            ratio = (
                point.efficiency / reference.efficiency if reference is not None else float("nan")
            )
            writer.writerow(
                [
                    kind.value,
                    d,
                    point.num_steps,
                    _fmt(point.eps),
                    _fmt(point.expected_accept),
                    _fmt(point.efficiency),
                    _fmt(ratio),
                ]
            )
