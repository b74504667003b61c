"""Effective sample size estimation and per-cost chain summaries.

ESS follows the initial-monotone-positive-sequence construction: sample
autocorrelations are folded into consecutive pair sums, the sum is
truncated at the first nonpositive pair, the kept pairs are forced
nonincreasing, and N is divided by the implied integrated autocorrelation
time.  The estimator is deterministic and needs nothing beyond an FFT.

Chains with negative autocorrelation can report more effective samples
than draws; by default the estimate is capped at N, with the raw value a
flag away.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List

import numpy as np

__all__ = [
    "UndefinedEssError",
    "EssSummary",
    "autocovariance",
    "ess",
    "summarize",
]


class UndefinedEssError(ValueError):
    """ESS is undefined, e.g. for a series with zero variance."""


def autocovariance(series: np.ndarray, max_lag: int) -> np.ndarray:
    """Sample autocovariances at lags 0..max_lag, normalised by 1/N.

    Computed via FFT in O(N log N).  A constant series yields the all-zero
    vector (zero variance at lag 0).
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise ValueError("series must be 1-d")
    n = x.size
    if n < 10:
        raise ValueError("series too short for autocovariance")
    if not 0 <= max_lag < n:
        raise ValueError("max_lag must satisfy 0 <= max_lag < len(series)")
    centered = x - x.mean()
    size = 2 ** int(np.ceil(np.log2(2 * n)))
    transformed = np.fft.rfft(centered, size)
    full = np.fft.irfft(transformed * np.conj(transformed), size)[: max_lag + 1]
    return full / n


def ess(series: np.ndarray, cap_at_length: bool = True) -> float:
    """Effective sample size N / (1 + 2 * sum of kept autocorrelations).

    The sum is truncated by the initial-monotone-positive-sequence rule on
    pair sums rho[2k] + rho[2k+1].  Raises :class:`UndefinedEssError` for a
    series with no variation.  With ``cap_at_length`` (default) the result
    never exceeds N.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise ValueError("series must be 1-d")
    n = x.size
    if n < 100:
        raise ValueError("need at least 100 draws to estimate ESS")
    if np.ptp(x) == 0.0:
        raise UndefinedEssError("series is constant; ESS undefined")
    gamma = autocovariance(x, n - 1)
    if gamma[0] <= 0.0:
        raise UndefinedEssError("series has zero variance; ESS undefined")
    rho = gamma / gamma[0]

    pair_sums = []
    for k in range(0, n - 1, 2):
        pair = rho[k] + rho[k + 1]
        if pair <= 0.0:
            break
        pair_sums.append(pair)
    if not pair_sums:
        # even rho[0] + rho[1] <= 0: maximally antithetic chain
        tau = 1.0 + 2.0 * rho[1]
    else:
        running = np.minimum.accumulate(pair_sums)
        tau = 2.0 * float(running.sum()) - 1.0
    # antithetic chains can push tau to or below zero; keep the raw
    # estimate finite by flooring the integrated time at 1/N
    tau = max(tau, 1.0 / n)
    estimate = n / tau
    if cap_at_length:
        return float(min(estimate, float(n)))
    return float(estimate)


@dataclass(frozen=True)
class EssSummary:
    """Per-coordinate ESS with order statistics and cost-normalised rates.

    Coordinates whose ESS is undefined (frozen chains) are listed in
    ``undefined_coordinates`` and excluded from the order statistics.
    """

    ess_per_coordinate: np.ndarray
    min_ess: float
    median_ess: float
    max_ess: float
    wall_time: float
    gradient_count: int
    adapted_eps: float
    min_ess_per_second: float
    median_ess_per_second: float
    min_ess_per_gradient: float
    undefined_coordinates: List[int] = field(default_factory=list)


def summarize(chain, cap_at_length: bool = True) -> EssSummary:
    """Summarise a finished chain: coordinate-wise ESS and per-cost rates.

    ``chain`` is a :class:`~splithmc.samplers.ChainOutput`; wall time and
    gradient counts are taken from it unchanged.
    """
    samples = np.asarray(chain.samples, dtype=float)
    if samples.ndim != 2 or samples.shape[0] == 0:
        raise ValueError("chain has no samples to summarise")
    values = np.full(samples.shape[1], np.nan)
    undefined: List[int] = []
    for j in range(samples.shape[1]):
        try:
            values[j] = ess(samples[:, j], cap_at_length=cap_at_length)
        except UndefinedEssError:
            undefined.append(j)
    defined = values[np.isfinite(values)]
    if defined.size:
        low = float(defined.min())
        mid = float(np.median(defined))
        high = float(defined.max())
    else:
        low = mid = high = float("nan")
    wall = float(chain.wall_time)
    grads = int(chain.gradient_count)
    return EssSummary(
        ess_per_coordinate=values,
        min_ess=low,
        median_ess=mid,
        max_ess=high,
        wall_time=wall,
        gradient_count=grads,
        adapted_eps=float(chain.adapted_eps),
        min_ess_per_second=low / wall if wall > 0 else float("nan"),
        median_ess_per_second=mid / wall if wall > 0 else float("nan"),
        min_ess_per_gradient=low / grads if grads > 0 else float("nan"),
        undefined_coordinates=undefined,
    )
