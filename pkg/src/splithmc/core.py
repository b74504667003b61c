"""Phase-space primitives shared by all samplers.

A target is anything that can report its dimension, evaluate a potential
U(q) = -log density(q) up to an additive constant, and evaluate the
gradient of that potential.  Momenta are auxiliary standard-normal
variables, so the total energy of a state (q, p) is U(q) + p.p/2 and the
Metropolis rule accepts a proposal with probability min(1, exp(delta))
where delta is the energy lost along the trajectory.

Gradient evaluations are the unit of computational cost throughout the
package, so every model counts them behind a thread-safe counter.
"""

from __future__ import annotations

import math
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

__all__ = [
    "GradientCounter",
    "PhasePoint",
    "TargetModel",
    "total_energy",
    "sample_momentum",
    "accept_probability",
]


class GradientCounter:
    """Monotone gradient-evaluation counter, safe to bump from several chains."""

    __slots__ = ("_lock", "_count")

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._count = 0

    def increment(self, by: int = 1) -> None:
        with self._lock:
            self._count += by

    @property
    def count(self) -> int:
        return self._count


@dataclass(frozen=True)
class PhasePoint:
    """A position/momentum pair on the augmented phase space.

    Both arrays have the same length d >= 1.  Entries of a valid state are
    finite; states produced by a blown-up trajectory may carry non-finite
    entries and are detected with :meth:`is_finite`.
    """

    position: np.ndarray
    momentum: np.ndarray

    def __post_init__(self) -> None:
        q = np.asarray(self.position, dtype=float)
        p = np.asarray(self.momentum, dtype=float)
        if q.ndim != 1 or p.ndim != 1:
            raise ValueError("position and momentum must be 1-d vectors")
        if q.shape != p.shape:
            raise ValueError(
                f"position and momentum lengths differ: {q.shape[0]} vs {p.shape[0]}"
            )
        if q.shape[0] < 1:
            raise ValueError("phase points need dimension >= 1")
        object.__setattr__(self, "position", q)
        object.__setattr__(self, "momentum", p)

    @property
    def dim(self) -> int:
        return self.position.shape[0]

    def flip(self) -> "PhasePoint":
        """Return the state with the momentum negated."""
        return PhasePoint(self.position, -self.momentum)

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.position).all() and np.isfinite(self.momentum).all())


class TargetModel(ABC):
    """A target density known up to a constant, via its potential and gradient.

    Subclasses implement :meth:`potential` and :meth:`_gradient`; calls to
    :meth:`gradient` are routed through a counter so samplers can report
    cost in gradient evaluations.  Models must be immutable after
    construction apart from the counter.
    """

    def __init__(self) -> None:
        self._counter = GradientCounter()

    @property
    @abstractmethod
    def dim(self) -> int:
        """Dimension of the position space."""

    @abstractmethod
    def potential(self, q: np.ndarray) -> float:
        """U(q) = -log density(q), up to an additive constant."""

    @abstractmethod
    def _gradient(self, q: np.ndarray) -> np.ndarray:
        """Gradient of the potential; not counted, use :meth:`gradient`."""

    def gradient(self, q: np.ndarray) -> np.ndarray:
        """Gradient of the potential at q.  Increments the evaluation counter by 1."""
        self._counter.increment()
        return self._gradient(q)

    @property
    def gradient_evaluations(self) -> int:
        return self._counter.count


def total_energy(model: TargetModel, state: PhasePoint) -> float:
    """Potential plus kinetic energy U(q) + p.p/2 of a state.

    A non-finite potential propagates into a non-finite energy, which
    callers treat as certain rejection.
    """
    if state.dim != model.dim:
        raise ValueError(f"state dimension {state.dim} does not match model dimension {model.dim}")
    p = state.momentum
    return float(model.potential(state.position)) + 0.5 * float(p @ p)


def sample_momentum(rng: np.random.Generator, d: int) -> np.ndarray:
    """Draw a fresh momentum of dimension d from N(0, I)."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    return rng.standard_normal(d)


def accept_probability(delta: float) -> float:
    """Metropolis acceptance probability min(1, exp(delta)).

    ``delta`` is the energy of the current state minus the energy of the
    proposal.  Non-finite deltas (energy blow-ups) yield probability 0.
    """
    if math.isnan(delta) or delta == -math.inf:
        return 0.0
    if delta >= 0.0:
        return 1.0
    return math.exp(delta)
