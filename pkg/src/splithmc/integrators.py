"""Time-reversible, volume-preserving integration schemes for HMC.

Each scheme is a palindromic composition of two elementary maps acting on
a state (q, p) over one step of size eps:

* drift by c:  q <- q + c * eps * p
* kick by b:   p <- p - b * eps * grad U(q)

Four schemes are provided.  The classic leapfrog (kick 1/2, drift 1,
kick 1/2) costs one fresh gradient per step once the gradient computed by
the closing kick is reused to open the next step, so an L-step trajectory
costs L + 1 evaluations.  The two-stage family inserts the kicks between
three drifts and costs two gradients per step; the three-stage scheme
uses four drifts and three kicks.  Stage coefficients are evaluated from
their exact expressions at import time rather than stored as truncated
decimals.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import PhasePoint, TargetModel

__all__ = [
    "Scheme",
    "SchemeCoefficients",
    "coefficients",
    "stage_sequence",
    "step",
    "step_arrays",
    "integrate",
]

DRIFT = "drift"
KICK = "kick"


class Scheme(enum.Enum):
    """The four interchangeable integration schemes."""

    LEAPFROG = "leapfrog"
    TWO_STAGE = "two-stage"
    NEW_TWO_STAGE = "new-two-stage"
    THREE_STAGE = "three-stage"

    @classmethod
    def from_name(cls, name: str) -> "Scheme":
        for kind in cls:
            if kind.value == name:
                return kind
        names = ", ".join(k.value for k in cls)
        raise ValueError(f"unknown scheme {name!r}; expected one of: {names}")


@dataclass(frozen=True)
class SchemeCoefficients:
    """Free stage coefficients and per-step gradient cost of a scheme.

    ``a1`` is the outer drift fraction (unused by leapfrog) and ``b1`` the
    outer kick fraction (three-stage only).  ``gradient_cost_per_step``
    already assumes the leapfrog gradient reuse described in the module
    docstring.
    """

    a1: Optional[float]
    b1: Optional[float]
    gradient_cost_per_step: int


def scheme_constants(sqrt: Callable = math.sqrt, number: Callable = float) -> dict:
    """Exact stage-coefficient expressions, evaluated with a caller-chosen
    arithmetic (``math.sqrt``/``float`` or an extended-precision equivalent)."""
    return {
        Scheme.TWO_STAGE: {"a1": (3 - sqrt(3)) / 6},
        Scheme.NEW_TWO_STAGE: {"a1": (3 - sqrt(5)) / 4},
        Scheme.THREE_STAGE: {
            "a1": number(12127897) / number(102017882),
            "b1": number(4271554) / number(14421423),
        },
    }


_CONSTANTS = scheme_constants()

_COEFFICIENTS = {
    Scheme.LEAPFROG: SchemeCoefficients(a1=None, b1=None, gradient_cost_per_step=1),
    Scheme.TWO_STAGE: SchemeCoefficients(
        a1=_CONSTANTS[Scheme.TWO_STAGE]["a1"], b1=None, gradient_cost_per_step=2
    ),
    Scheme.NEW_TWO_STAGE: SchemeCoefficients(
        a1=_CONSTANTS[Scheme.NEW_TWO_STAGE]["a1"], b1=None, gradient_cost_per_step=2
    ),
    Scheme.THREE_STAGE: SchemeCoefficients(
        a1=_CONSTANTS[Scheme.THREE_STAGE]["a1"],
        b1=_CONSTANTS[Scheme.THREE_STAGE]["b1"],
        gradient_cost_per_step=3,
    ),
}


def coefficients(kind: Scheme) -> SchemeCoefficients:
    """Stage coefficients and per-step gradient cost for a scheme."""
    return _COEFFICIENTS[kind]


def build_stage_sequence(kind: Scheme, constants: dict) -> tuple:
    """Ordered (op, fraction) stages of one step, from a constants table."""
    if kind is Scheme.LEAPFROG:
        return ((KICK, 0.5), (DRIFT, 1.0), (KICK, 0.5))
    if kind in (Scheme.TWO_STAGE, Scheme.NEW_TWO_STAGE):
        a1 = constants[kind]["a1"]
        return (
            (DRIFT, a1),
            (KICK, 0.5),
            (DRIFT, 1 - 2 * a1),
            (KICK, 0.5),
            (DRIFT, a1),
        )
    if kind is Scheme.THREE_STAGE:
        a1 = constants[kind]["a1"]
        b1 = constants[kind]["b1"]
        return (
            (DRIFT, a1),
            (KICK, b1),
            (DRIFT, 0.5 - a1),
            (KICK, 1 - 2 * b1),
            (DRIFT, 0.5 - a1),
            (KICK, b1),
            (DRIFT, a1),
        )
    raise ValueError(f"unknown scheme {kind!r}")


_STAGES = {kind: build_stage_sequence(kind, _CONSTANTS) for kind in Scheme}


def stage_sequence(kind: Scheme) -> tuple:
    """The ordered drift/kick stages making up one step of ``kind``."""
    return _STAGES[kind]


def step_arrays(
    kind: Scheme,
    model: TargetModel,
    q: np.ndarray,
    p: np.ndarray,
    eps: float,
    grad: Optional[np.ndarray] = None,
):
    """One integration step on raw arrays; the hot path used by samplers.

    ``eps`` may be negative, which integrates backwards in time (exact for
    these palindromic schemes).  ``grad`` optionally supplies the gradient
    at ``q`` for schemes that open with a kick; the returned third element
    is the gradient at the new position when the scheme closes with a kick
    (leapfrog), else None.

    Returns ``(q_new, p_new, grad_out)`` without validating finiteness;
    callers decide how to handle blow-ups.
    """
    stages = _STAGES[kind]
    last = len(stages) - 1
    grad_out = None
    for i, (op, c) in enumerate(stages):
        if op == DRIFT:
            q = q + (c * eps) * p
        else:
            if i == 0 and grad is not None:
                g = grad
            else:
                g = model.gradient(q)
            p = p - (c * eps) * g
            grad_out = g if i == last else None
    return q, p, grad_out


def step(kind: Scheme, model: TargetModel, state: PhasePoint, eps: float) -> PhasePoint:
    """Advance a state by one step of size ``eps`` with the given scheme.

    The model's gradient counter increases by the number of kick stages
    (2 for a bare leapfrog step; within :func:`integrate` the closing
    gradient is reused so subsequent leapfrog steps cost 1).  A blown-up
    step returns a state with non-finite entries, detectable via
    :meth:`PhasePoint.is_finite`.
    """
    if eps <= 0:
        raise ValueError("step size must be positive")
    if state.dim != model.dim:
        raise ValueError(f"state dimension {state.dim} does not match model dimension {model.dim}")
    q, p, _ = step_arrays(kind, model, state.position, state.momentum, eps)
    return PhasePoint(q, p)


def integrate(
    kind: Scheme,
    model: TargetModel,
    state: PhasePoint,
    eps: float,
    num_steps: int,
):
    """Apply ``num_steps`` steps, feeding each output into the next.

    Returns ``(final_state, diverged)``.  Integration stops at the first
    step whose output is non-finite; the flagged state is returned so the
    caller can reject and move on.
    """
    if eps <= 0:
        raise ValueError("step size must be positive")
    if num_steps < 1:
        raise ValueError("number of steps must be >= 1")
    if state.dim != model.dim:
        raise ValueError(f"state dimension {state.dim} does not match model dimension {model.dim}")

    q = state.position
    p = state.momentum
    grad = None
    for _ in range(num_steps):
        q, p, grad = step_arrays(kind, model, q, p, eps, grad)
        if not (np.isfinite(q).all() and np.isfinite(p).all()):
            return PhasePoint(q, p), True
    return PhasePoint(q, p), False
