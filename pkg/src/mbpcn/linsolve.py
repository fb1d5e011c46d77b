"""Matrix-free solves of ``(c I - kappa Lambda D_h) x = b``.

Every implicit stage of the time stepper has this form: a positive shift ``c``,
a diffusion scale ``kappa`` and a diagonal of mobility values ``Lambda``.  With
``Lambda > 0`` the system is similar to the SPD matrix ``c Lambda^-1 - kappa D_h``
and conjugate gradients apply; when some mobility values vanish the original
nonsymmetric system is handed to BiCGSTAB instead.  Both use Jacobi scaling and
a zero initial guess.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels

SYMMETRIZE_THRESHOLD = 1e-12
METHOD_CG = "symmetrized-CG"
METHOD_BICGSTAB = "stabilized-biconjugate"


@dataclass(frozen=True)
class SolverConfig:
    rel_tolerance: float = 1e-12
    abs_tolerance: float = 1e-14
    max_iterations: int | None = None  # None means 10 * M^2

    def __post_init__(self):
        if not (self.rel_tolerance > 0 and self.abs_tolerance > 0):
            raise ValueError("solver tolerances must be positive")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be a positive integer")

    def budget(self, n_cells: int) -> int:
        return self.max_iterations if self.max_iterations is not None else 10 * n_cells


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    final_relative_residual: float
    method_used: str


class NonConvergenceError(RuntimeError):
    """The iteration budget ran out; ``report`` holds the last state.

    ``stage`` is set by the time stepper to ``"predictor"`` or ``"corrector"``.
    """

    def __init__(self, message: str, report: SolveReport, stage: str | None = None):
        super().__init__(message)
        self.report = report
        self.stage = stage


class NonFiniteInputError(ValueError):
    """The right-hand side holds inf or nan (typically an exploding state)."""


@dataclass(frozen=True)
class HelmholtzOperator:
    shift: float
    diffusion_scale: float
    mobility_diag: np.ndarray
    h: float

    def __post_init__(self):
        if not self.shift > 0:
            raise ValueError(f"shift must be positive, got {self.shift}")
        if not self.diffusion_scale >= 0:
            raise ValueError(f"diffusion scale must be nonnegative, got {self.diffusion_scale}")
        lam = np.ascontiguousarray(self.mobility_diag, dtype=np.float64)
        if not np.all(np.isfinite(lam)):
            raise ValueError("mobility values must be finite")
        object.__setattr__(self, "mobility_diag", lam)

    def apply(self, u: np.ndarray) -> np.ndarray:
        u = np.ascontiguousarray(u, dtype=np.float64)
        out = np.empty_like(u)
        _kernels.helmholtz_into(
            u, self.mobility_diag, self.shift, self.diffusion_scale, 1.0 / self.h**2, out
        )
        return out


def apply(op: HelmholtzOperator, u: np.ndarray) -> np.ndarray:
    return op.apply(u)


def solve(
    op: HelmholtzOperator, rhs: np.ndarray, cfg: SolverConfig | None = None
) -> tuple[np.ndarray, SolveReport]:
    """Solve ``op x = rhs`` to ``||op x - rhs|| <= rel ||rhs|| + abs``.

    The residual bound is checked on an explicitly recomputed residual; if
    rounding in the recurrence leaves it unmet the iteration restarts from the
    current iterate until the budget is spent.
    """
    cfg = cfg or SolverConfig()
    rhs = np.ascontiguousarray(rhs, dtype=np.float64)
    if rhs.shape != op.mobility_diag.shape:
        raise ValueError("right-hand side does not match the operator's grid")
    if not np.all(np.isfinite(rhs)):
        raise NonFiniteInputError("right-hand side contains non-finite values")

    lam = op.mobility_diag
    c, kappa, inv_h2 = float(op.shift), float(op.diffusion_scale), 1.0 / op.h**2
    peak = float(np.abs(rhs).max()) if rhs.size else 0.0
    if peak > 0 and not 2.0**-500 < peak < 2.0**500:
        # squared norms would over/underflow; a power-of-two rescale is exact
        scale = math.ldexp(1.0, math.frexp(peak)[1])
        scaled = SolverConfig(cfg.rel_tolerance, max(cfg.abs_tolerance / scale, 5e-324), cfg.max_iterations)
        x, rep = solve(op, rhs / scale, scaled)
        return x * scale, rep
    rhs_norm = float(np.linalg.norm(rhs))
    target = cfg.rel_tolerance * rhs_norm + cfg.abs_tolerance
    budget = cfg.budget(rhs.size)

    symmetric = kappa == 0.0 or float(lam.min()) >= SYMMETRIZE_THRESHOLD
    if symmetric and kappa == 0.0:
        lam = np.ones_like(lam)  # kappa * Lambda D vanishes; any positive Lambda works
    method = METHOD_CG if symmetric else METHOD_BICGSTAB
    kernel = _kernels.pcg_symmetrized if symmetric else _kernels.bicgstab

    x = np.zeros_like(rhs)
    used = 0
    true_res = rhs_norm
    while True:
        its, _ = kernel(lam, c, kappa, inv_h2, rhs, x, target, budget - used)
        used += its
        true_res = float(np.linalg.norm(op.apply(x) - rhs))
        if true_res <= target:
            break
        if used >= budget or its == 0 or not np.isfinite(true_res):
            report = SolveReport(used, _relative(true_res, rhs_norm), method)
            raise NonConvergenceError(
                f"{method} did not reach residual {target:.3e} in {used} iterations "
                f"(residual {true_res:.3e})",
                report,
            )
    return x, SolveReport(used, _relative(true_res, rhs_norm), method)


def _relative(res: float, rhs_norm: float) -> float:
    return res / rhs_norm if rhs_norm > 0 else res
