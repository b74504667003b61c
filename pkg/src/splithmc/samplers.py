"""Plain HMC and the No-U-Turn sampler, parameterized by integration scheme.

The NUTS transition follows the doubling construction with a slice
variable: a trajectory is grown by repeatedly integrating 2^j steps in a
random direction until the ends of the path start moving toward each
other, the slice bound is violated beyond the divergence threshold, or a
depth cap is hit.  The next state is drawn uniformly from the slice-valid
states via the usual recursive swaps, and the step size is adapted during
warmup by dual averaging toward a target acceptance statistic.

Replacing the leapfrog step with any of the other schemes preserves the
construction: each scheme is time reversible, so integrating with -eps
walks the same trajectory backwards exactly.

All randomness flows through a ``numpy.random.Generator``; runs are
reproducible given a seed, and chains run concurrently need only
independent generators and models.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, List, Optional, Union

import numpy as np

from .core import PhasePoint, TargetModel, accept_probability
from .integrators import Scheme, integrate, step_arrays

__all__ = [
    "HmcConfig",
    "NutsConfig",
    "ChainOutput",
    "NutsDraw",
    "DualAveraging",
    "StepSizeSearchError",
    "find_reasonable_epsilon",
    "hmc_iteration",
    "nuts_draw",
    "run_chain",
    "u_turn",
]

_LN2 = math.log(2.0)


class StepSizeSearchError(RuntimeError):
    """The initial step-size search failed to cross acceptance 1/2."""


@dataclass(frozen=True)
class HmcConfig:
    """Fixed-parameter HMC: scheme, step size, and steps per proposal."""

    scheme: Scheme
    eps: float
    num_steps: int
    seed: int = 0

    def __post_init__(self) -> None:
        if self.eps <= 0:
            raise ValueError("step size must be positive")
        if self.num_steps < 1:
            raise ValueError("number of steps must be >= 1")


@dataclass(frozen=True)
class NutsConfig:
    """NUTS with dual-averaging step-size adaptation.

    ``adapt_iterations`` defaults to the burn-in length handed to
    :func:`run_chain`.  ``delta_max`` is the slice margin beyond which a
    subtree counts as divergent and is pruned.
    """

    scheme: Scheme
    target_accept: float = 0.8
    max_tree_depth: int = 10
    adapt_iterations: Optional[int] = None
    gamma: float = 0.05
    t0: float = 10.0
    kappa: float = 0.75
    delta_max: float = 1000.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.target_accept < 1.0:
            raise ValueError("target acceptance must lie in (0, 1)")
        if not 1 <= self.max_tree_depth <= 15:
            raise ValueError("max tree depth must lie in 1..15")
        if self.adapt_iterations is not None and self.adapt_iterations < 0:
            raise ValueError("adaptation window must be nonnegative")
        if min(self.gamma, self.t0, self.kappa) <= 0:
            raise ValueError("dual-averaging constants must be positive")


@dataclass
class ChainOutput:
    """A finished chain: retained draws plus bookkeeping.

    ``samples`` holds the post-burn-in draws row by row.  ``wall_time``
    covers sampling (warmup included), not model construction or I/O.
    """

    samples: np.ndarray
    accept_stat_trace: np.ndarray
    adapted_eps: float
    gradient_count: int
    wall_time: float
    divergence_count: int


class DualAveraging:
    """Dual-averaging recursion driving log(eps) toward a target acceptance.

    The noisy iterate shrinks toward a reference ``mu`` (conventionally
    log of ten times the initial step size); the averaged iterate is the
    value to freeze after warmup.
    """

    def __init__(
        self,
        mu: float,
        target: float = 0.8,
        gamma: float = 0.05,
        t0: float = 10.0,
        kappa: float = 0.75,
    ):
        self.mu = mu
        self.target = target
        self.gamma = gamma
        self.t0 = t0
        self.kappa = kappa
        self._h_bar = 0.0
        self._log_eps = mu
        self._log_eps_bar = 0.0
        self._iteration = 0

    def update(self, accept_stat: float) -> float:
        """Feed one acceptance statistic; returns the next (noisy) eps."""
        if math.isnan(accept_stat):
            accept_stat = 0.0
        accept_stat = min(max(accept_stat, 0.0), 1.0)
        self._iteration += 1
        m = self._iteration
        eta = 1.0 / (m + self.t0)
        self._h_bar = (1.0 - eta) * self._h_bar + eta * (self.target - accept_stat)
        self._log_eps = self.mu - math.sqrt(m) / self.gamma * self._h_bar
        w = m ** (-self.kappa)
        self._log_eps_bar = w * self._log_eps + (1.0 - w) * self._log_eps_bar
        return math.exp(self._log_eps)

    @property
    def eps(self) -> float:
        return math.exp(self._log_eps)

    @property
    def averaged_eps(self) -> float:
        """The smoothed iterate; the step size to freeze after adaptation."""
        return math.exp(self._log_eps_bar)


def _hamiltonian(model: TargetModel, q: np.ndarray, p: np.ndarray) -> float:
    return float(model.potential(q)) + 0.5 * float(p @ p)


def u_turn(q_minus, q_plus, p_minus, p_plus) -> bool:
    """True when either end of the path has started moving back toward the
    other: (q+ - q-) . p < 0 at one of the ends."""
    gap = q_plus - q_minus
    return float(gap @ p_minus) < 0.0 or float(gap @ p_plus) < 0.0


def find_reasonable_epsilon(
    model: TargetModel,
    q0: np.ndarray,
    scheme: Scheme,
    rng: np.random.Generator,
    max_attempts: int = 100,
) -> float:
    """Coarse initial step size: doubled or halved from 1 until the
    one-step acceptance ratio crosses 1/2.

    The returned eps sits on the >= 1/2 side of the crossing, so one step
    at eps keeps at least half the density ratio while one step at 2*eps
    does not.  Raises :class:`StepSizeSearchError` if the crossing is not
    found within ``max_attempts`` scalings (e.g. a flat potential).
    """
    q0 = np.asarray(q0, dtype=float)
    if not np.isfinite(q0).all():
        raise ValueError("starting position must be finite")
    p0 = rng.standard_normal(model.dim)
    h0 = _hamiltonian(model, q0, p0)
    grad0 = model.gradient(q0) if scheme is Scheme.LEAPFROG else None

    def log_ratio(eps: float) -> float:
        q1, p1, _ = step_arrays(scheme, model, q0, p0, eps, grad0)
        h1 = _hamiltonian(model, q1, p1)
        delta = h0 - h1
        return delta if math.isfinite(delta) else -math.inf

    eps = 1.0
    ratio = log_ratio(eps)
    direction = 1.0 if ratio > -_LN2 else -1.0
    for _ in range(max_attempts):
        if not direction * ratio > -direction * _LN2:
            # crossed: back off the last doubling so the returned eps is on
            # the acceptable side
            return eps / 2.0 if direction > 0 else eps
        eps *= 2.0**direction
        ratio = log_ratio(eps)
    raise StepSizeSearchError(
        f"no acceptance-1/2 crossing within {max_attempts} doublings/halvings"
    )


def hmc_iteration(
    model: TargetModel,
    position: np.ndarray,
    cfg: HmcConfig,
    rng: np.random.Generator,
):
    """One HMC transition: momentum refresh, L integrator steps, accept test.

    Returns ``(next_position, accepted, delta)`` where ``delta`` is the
    energy of the start state minus the energy of the proposal; a
    non-finite delta marks a divergent trajectory (always rejected).  The
    proposal's momentum is discarded once the acceptance probability is
    computed.
    """
    q = np.asarray(position, dtype=float)
    p = rng.standard_normal(model.dim)
    h0 = _hamiltonian(model, q, p)
    state, diverged = integrate(cfg.scheme, model, PhasePoint(q, p), cfg.eps, cfg.num_steps)
    if diverged:
        delta = -math.inf
    else:
        h1 = _hamiltonian(model, state.position, state.momentum)
        delta = h0 - h1
        if math.isnan(delta):
            delta = -math.inf
    alpha = accept_probability(delta)
    accepted = rng.random() < alpha
    return (state.position if accepted else q), accepted, delta


@dataclass(frozen=True)
class NutsDraw:
    """Result of a single NUTS transition."""

    position: np.ndarray
    accept_stat: float
    tree_depth: int
    divergent: bool
    gradient_evaluations: int


def nuts_draw(
    model: TargetModel,
    position: np.ndarray,
    eps: float,
    scheme: Scheme,
    max_depth: int,
    rng: np.random.Generator,
    delta_max: float = 1000.0,
    trace: Optional[List] = None,
) -> NutsDraw:
    """One No-U-Turn transition at fixed step size.

    ``accept_stat`` is the mean of min(1, exp(energy defect)) over the
    states of the final doubling, the quantity dual averaging consumes.
    ``trace``, if given, receives (q_in, p_in, signed_eps, q_out, p_out)
    for every integrator step taken, in execution order.
    """
    if eps <= 0:
        raise ValueError("step size must be positive")
    q0 = np.asarray(position, dtype=float)
    grads_before = model.gradient_evaluations
    p0 = rng.standard_normal(model.dim)
    h0 = _hamiltonian(model, q0, p0)
    if not math.isfinite(h0):
        raise ValueError("initial state has non-finite energy")
    # gradient at the start seeds both directions when the scheme opens
    # with a kick (leapfrog); drift-first schemes never need it
    grad0 = model.gradient(q0) if scheme is Scheme.LEAPFROG else None
    u = rng.random()
    log_u = -h0 + (math.log(u) if u > 0.0 else -math.inf)

    def build(q, p, grad, direction, depth):
        """Grow 2^depth steps from (q, p) in ``direction``; returns
        (q-, p-, g-, q+, p+, g+, q_prop, n_valid, keep_going, alpha_sum,
        n_alpha, divergent)."""
        if depth == 0:
            q1, p1, g1 = step_arrays(scheme, model, q, p, direction * eps, grad)
            if trace is not None:
                trace.append((q, p, direction * eps, q1, p1))
            if np.isfinite(q1).all() and np.isfinite(p1).all():
                h1 = _hamiltonian(model, q1, p1)
            else:
                h1 = math.inf
            if math.isnan(h1):
                h1 = math.inf
            valid = 1 if log_u <= -h1 else 0
            divergent = not (log_u < delta_max - h1)
            alpha = accept_probability(h0 - h1)
            return q1, p1, g1, q1, p1, g1, q1, valid, not divergent, alpha, 1, divergent
        (
            q_minus, p_minus, g_minus,
            q_plus, p_plus, g_plus,
            q_prop, n_valid, keep_going, alpha_sum, n_alpha, divergent,
        ) = build(q, p, grad, direction, depth - 1)
        if keep_going:
            if direction < 0:
                (
                    q_minus, p_minus, g_minus, _, _, _,
                    q_prop2, n_valid2, keep2, alpha2, n_alpha2, div2,
                ) = build(q_minus, p_minus, g_minus, direction, depth - 1)
            else:
                (
                    _, _, _, q_plus, p_plus, g_plus,
                    q_prop2, n_valid2, keep2, alpha2, n_alpha2, div2,
                ) = build(q_plus, p_plus, g_plus, direction, depth - 1)
            if n_valid + n_valid2 > 0 and rng.random() < n_valid2 / (n_valid + n_valid2):
                q_prop = q_prop2
            keep_going = keep2 and not u_turn(q_minus, q_plus, p_minus, p_plus)
            n_valid += n_valid2
            alpha_sum += alpha2
            n_alpha += n_alpha2
            divergent = divergent or div2
        return (
            q_minus, p_minus, g_minus,
            q_plus, p_plus, g_plus,
            q_prop, n_valid, keep_going, alpha_sum, n_alpha, divergent,
        )

    q_minus = q_plus = q0
    p_minus = p_plus = p0
    g_minus = g_plus = grad0
    sample = q0
    n_valid = 1
    depth = 0
    keep_going = True
    divergent_any = False
    accept_stat = 0.0

    while keep_going and depth < max_depth:
        direction = -1.0 if rng.random() < 0.5 else 1.0
        if direction < 0:
            (
                q_minus, p_minus, g_minus, _, _, _,
                q_prop, n_valid2, keep2, alpha_sum, n_alpha, div2,
            ) = build(q_minus, p_minus, g_minus, direction, depth)
        else:
            (
                _, _, _, q_plus, p_plus, g_plus,
                q_prop, n_valid2, keep2, alpha_sum, n_alpha, div2,
            ) = build(q_plus, p_plus, g_plus, direction, depth)
        if keep2 and rng.random() < min(1.0, n_valid2 / n_valid):
            sample = q_prop
        n_valid += n_valid2
        keep_going = keep2 and not u_turn(q_minus, q_plus, p_minus, p_plus)
        divergent_any = divergent_any or div2
        accept_stat = alpha_sum / n_alpha
        depth += 1

    return NutsDraw(
        position=sample,
        accept_stat=accept_stat,
        tree_depth=depth,
        divergent=divergent_any,
        gradient_evaluations=model.gradient_evaluations - grads_before,
    )


def _resolve_rng(
    config, seed: Optional[int], rng: Optional[np.random.Generator]
) -> np.random.Generator:
    if rng is not None:
        return rng
    if seed is not None:
        return np.random.default_rng(seed)
    return np.random.default_rng(config.seed)


def run_chain(
    model: TargetModel,
    config: Union[HmcConfig, NutsConfig],
    iterations: int,
    burn_in: int,
    seed: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    initial_position: Optional[np.ndarray] = None,
    iterations_include_burn_in: bool = False,
    clock: Callable[[], float] = time.perf_counter,
) -> ChainOutput:
    """Run one chain and return its retained draws and cost accounting.

    By default ``iterations`` counts retained (post-burn-in) draws, so the
    chain performs ``burn_in + iterations`` transitions; passing
    ``iterations_include_burn_in=True`` makes ``iterations`` the total
    instead.  NUTS adapts its step size during burn-in and freezes it at
    the dual-averaging mean afterwards; HMC uses its fixed parameters
    throughout.  The accept-statistic trace, like the samples, covers only
    retained draws.  Given the same seed the output is bitwise identical.
    """
    if burn_in < 0:
        raise ValueError("burn-in must be >= 0")
    retained = iterations - burn_in if iterations_include_burn_in else iterations
    if retained < 1:
        raise ValueError("need at least one retained draw")
    generator = _resolve_rng(config, seed, rng)
    if initial_position is None:
        q = np.zeros(model.dim)
    else:
        q = np.array(initial_position, dtype=float)
        if q.shape != (model.dim,):
            raise ValueError("initial position has wrong dimension")

    samples = np.empty((retained, model.dim))
    accept_trace = np.empty(retained)
    divergences = 0
    grads_before = model.gradient_evaluations

    start = clock()
    if isinstance(config, NutsConfig):
        adapt_iterations = (
            burn_in if config.adapt_iterations is None else min(config.adapt_iterations, burn_in)
        )
        eps = find_reasonable_epsilon(model, q, config.scheme, generator)
        averaging = DualAveraging(
            mu=math.log(10.0 * eps),
            target=config.target_accept,
            gamma=config.gamma,
            t0=config.t0,
            kappa=config.kappa,
        )
        for m in range(1, burn_in + 1):
            draw = nuts_draw(
                model, q, eps, config.scheme, config.max_tree_depth, generator,
                delta_max=config.delta_max,
            )
            q = draw.position
            if m <= adapt_iterations:
                eps = averaging.update(draw.accept_stat)
                if m == adapt_iterations:
                    eps = averaging.averaged_eps
        adapted_eps = eps
        for i in range(retained):
            draw = nuts_draw(
                model, q, eps, config.scheme, config.max_tree_depth, generator,
                delta_max=config.delta_max,
            )
            q = draw.position
            samples[i] = q
            accept_trace[i] = draw.accept_stat
            divergences += int(draw.divergent)
    else:
        for _ in range(burn_in):
            q, _, _ = hmc_iteration(model, q, config, generator)
        adapted_eps = config.eps
        for i in range(retained):
            q, _, delta = hmc_iteration(model, q, config, generator)
            samples[i] = q
            accept_trace[i] = accept_probability(delta)
            divergences += int(not math.isfinite(delta))
    wall = clock() - start

    return ChainOutput(
        samples=samples,
        accept_stat_trace=accept_trace,
        adapted_eps=adapted_eps,
        gradient_count=model.gradient_evaluations - grads_before,
        wall_time=wall,
        divergence_count=divergences,
    )
