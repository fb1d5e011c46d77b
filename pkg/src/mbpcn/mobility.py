"""Mobility models, the double-well potential, and the stabilizer bounds.

The reaction term of the scheme is ``f(rho) = M(rho) * F'(rho)`` with the fixed
potential ``F(rho) = (1 - rho^2)^2 / 4``.  Whether a time step keeps iterates
inside [-1, 1] is governed by three computable quantities:

* ``s1_lower_bound``: the smallest S1 with ``S1 >= max (M'F' + MF'')`` on [-1, 1];
* ``s2_lower_bound``: the S2 that makes the Crank-Nicolson step unconditionally
  bound preserving;
* ``tau_max_conditional``: the step-size ceiling when S2 = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

SAMPLES = 100_001
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


class MobilityEvaluationError(ValueError):
    """Raised when a mobility (or its derivative) returns a non-finite value."""


def potential(rho):
    return 0.25 * (1.0 - rho * rho) ** 2


def potential_prime(rho):
    return rho * rho * rho - rho


def potential_second(rho):
    return 3.0 * rho * rho - 1.0


@dataclass(frozen=True)
class Mobility:
    """A mobility ``M`` with its derivative and declared range on [-1, 1].

    ``declared_max`` is the constant L entering the S2 and step-size bounds;
    ``declared_min`` is M0 (zero for degenerate mobilities).
    """

    name: str
    evaluate: Callable
    derivative: Callable
    declared_max: float
    declared_min: float

    def __call__(self, rho):
        return self.evaluate(rho)

    @property
    def is_degenerate(self) -> bool:
        # energy-stability results assume a strictly positive lower bound
        return self.declared_min <= 0.0


def constant_mobility(scale: float = 1.0) -> Mobility:
    if not scale > 0:
        raise ValueError(f"mobility scale must be positive, got {scale}")
    scale = float(scale)
    # 0 * rho keeps the input's shape for scalars and arrays alike
    return Mobility(
        name="constant",
        evaluate=lambda rho: scale + 0.0 * rho,
        derivative=lambda rho: 0.0 * rho,
        declared_max=scale,
        declared_min=scale,
    )


def degenerate_mobility() -> Mobility:
    """``M(rho) = 1 - rho^2``, vanishing at the pure phases."""
    return Mobility(
        name="degenerate",
        evaluate=lambda rho: 1.0 - rho * rho,
        derivative=lambda rho: -2.0 * rho,
        declared_max=1.0,
        declared_min=0.0,
    )


def reaction(mobility: Mobility, rho):
    return mobility.evaluate(rho) * potential_prime(rho)


def _s1_integrand(mobility: Mobility, rho):
    return mobility.derivative(rho) * potential_prime(rho) + mobility.evaluate(rho) * potential_second(rho)


def _finite(values: np.ndarray, what: str) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise MobilityEvaluationError(f"non-finite value while evaluating {what}")
    return values


def _golden_max(g: Callable[[float], float], a: float, b: float, tol: float = 1e-12) -> tuple[float, float]:
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    gc, gd = g(c), g(d)
    while b - a > tol:
        if gc > gd:
            b, d, gd = d, c, gc
            c = b - _INVPHI * (b - a)
            gc = g(c)
        else:
            a, c, gc = c, d, gd
            d = a + _INVPHI * (b - a)
            gd = g(d)
    x = 0.5 * (a + b)
    return x, g(x)


def s1_lower_bound(mobility: Mobility) -> float:
    """Maximum of ``M'F' + MF''`` over [-1, 1].

    Dense uniform sampling locates the best sample, then golden-section search
    on the bracketing interval refines it.
    """
    rho = np.linspace(-1.0, 1.0, SAMPLES)
    values = _finite(_s1_integrand(mobility, rho), "M'F' + MF''")
    k = int(np.argmax(values))
    best = float(values[k])
    lo, hi = rho[max(k - 1, 0)], rho[min(k + 1, SAMPLES - 1)]

    def g(x):
        return float(_finite(_s1_integrand(mobility, np.array([x])), "M'F' + MF''")[0])

    _, refined = _golden_max(g, float(lo), float(hi))
    return max(best, refined)


def s2_lower_bound(s1: float, mobility_max: float, eps: float, h: float) -> float:
    return (s1 / 4.0 + mobility_max * eps**2 / h**2) ** 2


def tau_max_conditional(s1: float, mobility_max: float, eps: float, h: float) -> float:
    denom = s1 + 4.0 * mobility_max * eps**2 / h**2
    if not denom > 0:
        raise ValueError("step-size bound undefined for S1 = 0 and L*eps = 0")
    return 2.0 / denom


@dataclass(frozen=True)
class BoundReport:
    s1: float
    max_deviation: float
    passed: bool

    @property
    def margin(self) -> float:
        return self.s1 - self.max_deviation


def check_stabilized_bound(mobility: Mobility, s1: float) -> BoundReport:
    """Sample ``|S1 rho - f(rho)|`` on [-1, 1] and compare it to S1."""
    rho = np.linspace(-1.0, 1.0, SAMPLES)
    dev = float(np.max(np.abs(s1 * rho - _finite(reaction(mobility, rho), "f"))))
    return BoundReport(s1=s1, max_deviation=dev, passed=dev <= s1 + 1e-12)


def check_declared_range(mobility: Mobility, samples: int = 10_001) -> bool:
    """True when sampled values on [-1, 1] sit inside the declared range."""
    rho = np.linspace(-1.0, 1.0, samples)
    m = _finite(mobility.evaluate(rho), "M")
    tol = 1e-12 * max(1.0, abs(mobility.declared_max))
    return bool(np.all(m >= -tol) and np.all(m <= mobility.declared_max + tol) and np.all(m >= mobility.declared_min - tol))
