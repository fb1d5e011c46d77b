"""Stabilized BDF1 and doubly stabilized Crank-Nicolson steps.

Both steps are linear: the mobility and the reaction term are frozen at a
known state, so one step costs one (BDF1) or two (CN) Helmholtz-type solves.
The CN step uses a BDF1 half step as predictor, then solves

    [(1/tau + S1/2 + S2 tau) I - (eps^2/2) Lam D] phi_new
        = [(1/tau - S1/2 + S2 tau) I + (eps^2/2) Lam D] phi
          + S1 phi_half - f(phi_half)

with ``Lam = M(phi_half)``.  No clipping to [-1, 1] is ever applied.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import laplacian
from .linsolve import HelmholtzOperator, NonConvergenceError, SolveReport, SolverConfig, solve
from .mobility import Mobility, reaction


@dataclass(frozen=True)
class SchemeParams:
    eps: float
    s1: float
    s2: float = 0.0
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if not (self.s1 >= 0 and self.s2 >= 0):
            raise ValueError("stabilizers s1 and s2 must be nonnegative")


@dataclass(frozen=True)
class StepOutput:
    half_state: np.ndarray
    next_state: np.ndarray
    predictor_report: SolveReport
    corrector_report: SolveReport


def bdf1_step(
    phi: np.ndarray, tau: float, h: float, params: SchemeParams, mobility: Mobility
) -> tuple[np.ndarray, SolveReport]:
    """One stabilized backward-Euler step of size ``tau``."""
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    shift = 1.0 / tau + params.s1
    op = HelmholtzOperator(shift, params.eps**2, mobility(phi), h)
    rhs = shift * phi - reaction(mobility, phi)
    return solve(op, rhs, params.solver)


def cn_step(
    phi: np.ndarray, tau: float, h: float, params: SchemeParams, mobility: Mobility
) -> StepOutput:
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    try:
        half, pred = bdf1_step(phi, 0.5 * tau, h, params, mobility)
    except NonConvergenceError as err:
        err.stage = "predictor"
        raise

    s1, s2, kappa = params.s1, params.s2, 0.5 * params.eps**2
    lam = mobility(half)
    rhs = (
        (1.0 / tau - 0.5 * s1 + s2 * tau) * phi
        + kappa * lam * laplacian(phi, h)
        + s1 * half
        - reaction(mobility, half)
    )
    op = HelmholtzOperator(1.0 / tau + 0.5 * s1 + s2 * tau, kappa, lam, h)
    try:
        new, corr = solve(op, rhs, params.solver)
    except NonConvergenceError as err:
        err.stage = "corrector"
        raise
    return StepOutput(half, new, pred, corr)
