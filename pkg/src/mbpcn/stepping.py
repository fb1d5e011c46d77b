"""Trajectory drivers with per-step monitoring.

A run applies :func:`mbpcn.scheme.cn_step` over a time grid and records, for
the initial state and after every step, the time, step size, sup norm,
discrete energy and linear-solver iteration counts.  A state that turns
non-finite ends the run with ``status == "blowup"`` instead of raising.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .grid import grad, inner_edge, norm_sup
from .linsolve import NonConvergenceError, NonFiniteInputError
from .mobility import Mobility, potential
from .rng import SplitMix64
from .scheme import SchemeParams, cn_step

MBP_SLACK = 1e-8

StepCallback = Callable[[int, float, np.ndarray], None]
StopPredicate = Callable[[float, np.ndarray], bool]


def discrete_energy(phi: np.ndarray, h: float, eps: float) -> float:
    g = grad(phi, h)
    return 0.5 * eps**2 * inner_edge(g, g, h) + h * h * float(np.sum(potential(phi)))


@dataclass(frozen=True)
class TimeGrid:
    step_sizes: np.ndarray

    def __post_init__(self):
        steps = np.asarray(self.step_sizes, dtype=np.float64)
        if steps.ndim != 1 or steps.size == 0:
            raise ValueError("a time grid needs at least one step")
        if not np.all(steps > 0):
            raise ValueError("time steps must be positive")
        object.__setattr__(self, "step_sizes", steps)

    @classmethod
    def uniform(cls, n_steps: int, horizon: float) -> "TimeGrid":
        return cls(np.full(n_steps, horizon / n_steps))

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def times(self) -> np.ndarray:
        """Cumulative times ``t_0 = 0, ..., t_N``."""
        return np.concatenate(([0.0], np.cumsum(self.step_sizes)))

    @property
    def max_step(self) -> float:
        return float(self.step_sizes.max())

    @property
    def ratios(self) -> np.ndarray:
        """Adjacent ratios ``tau_n / tau_{n-1}``."""
        return self.step_sizes[1:] / self.step_sizes[:-1]

    def __len__(self) -> int:
        return self.step_sizes.size


def perturbed_mesh(n_steps: int, amplitude: float = 0.4, seed: int = 0, horizon: float = 1.0) -> TimeGrid:
    """Uniform grid with each step scaled by ``1 + amplitude * sigma``, sigma ~ U(-1, 1).

    The steps are rescaled afterwards so that they sum to ``horizon``.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    if not 0 <= amplitude < 1:
        raise ValueError("amplitude must lie in [0, 1)")
    if amplitude == 0:
        return TimeGrid.uniform(n_steps, horizon)
    sigma = SplitMix64(seed).symmetric(n_steps)
    raw = (1.0 + amplitude * sigma) / n_steps
    return TimeGrid(raw * (horizon / raw.sum()))


@dataclass(frozen=True)
class AdaptiveParams:
    tau_min: float
    tau_max: float
    alpha: float

    def __post_init__(self):
        if not (0 < self.tau_min <= self.tau_max):
            raise ValueError("need 0 < tau_min <= tau_max")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")

    def next_step(self, energy_rate: float) -> float:
        return max(self.tau_min, self.tau_max / math.sqrt(1.0 + self.alpha * energy_rate**2))


class StepRow(NamedTuple):
    step: int
    t: float
    tau: float
    sup_norm: float
    energy: float
    pred_iters: int
    corr_iters: int
    mbp_margin: float


COLUMNS = StepRow._fields


@dataclass
class RunRecord:
    rows: list[StepRow] = field(default_factory=list)
    final_state: np.ndarray | None = None
    status: str = "completed"  # completed | blowup | stopped
    blowup_step: int | None = None
    blowup_time: float | None = None
    message: str = ""

    def column(self, name: str) -> np.ndarray:
        k = COLUMNS.index(name)
        return np.array([r[k] for r in self.rows])

    @property
    def blew_up(self) -> bool:
        return self.status == "blowup"

    @property
    def max_sup_norm(self) -> float:
        return max(r.sup_norm for r in self.rows)

    def mbp_violations(self, slack: float = MBP_SLACK) -> list[StepRow]:
        return [r for r in self.rows if r.sup_norm > 1.0 + slack]


class MBPViolation(RuntimeError):
    """A state left [-1, 1] beyond the slack under strict monitoring."""

    def __init__(self, message: str, record: RunRecord):
        super().__init__(message)
        self.record = record


class _Driver:
    def __init__(self, initial, h, params, mobility, strict_mbp, on_step):
        self.phi = np.array(initial, dtype=np.float64)
        if not np.all(np.isfinite(self.phi)):
            raise ValueError("initial state contains non-finite values")
        self.h, self.params, self.mobility = h, params, mobility
        self.strict_mbp = strict_mbp
        self.on_step = on_step
        self.t = 0.0
        self.n = 0
        self.record = RunRecord()
        self.energy = discrete_energy(self.phi, h, params.eps)
        self._push(0.0, 0, 0)

    def _push(self, tau, pred, corr):
        sup = norm_sup(self.phi)
        self.record.rows.append(StepRow(self.n, self.t, tau, sup, self.energy, pred, corr, 1.0 - sup))
        if self.on_step is not None:
            self.on_step(self.n, self.t, self.phi)
        if self.strict_mbp and sup > 1.0 + MBP_SLACK:
            self.record.final_state = self.phi
            raise MBPViolation(f"sup norm {sup!r} exceeds 1 at step {self.n}, t={self.t!r}", self.record)

    def _blowup(self, t_new, message):
        rec = self.record
        rec.status = "blowup"
        rec.blowup_step = self.n + 1
        rec.blowup_time = t_new
        rec.message = message

    def advance(self, tau: float, t_new: float) -> bool:
        """Take one step; False when the run has blown up."""
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                out = cn_step(self.phi, tau, self.h, self.params, self.mobility)
        except NonFiniteInputError:
            self._blowup(t_new, "non-finite intermediate state")
            return False
        except NonConvergenceError as err:
            if norm_sup(self.phi) > 1.0 + MBP_SLACK:
                # the frozen mobility left its admissible range: ill-posed solve
                self._blowup(t_new, f"{err.stage} solve broke down after bound loss: {err}")
                return False
            raise
        new = out.next_state
        if not np.all(np.isfinite(new)):
            self._blowup(t_new, "non-finite state")
            return False
        with np.errstate(over="ignore", invalid="ignore"):
            energy = discrete_energy(new, self.h, self.params.eps)
        if not math.isfinite(energy):
            self._blowup(t_new, "non-finite energy")
            return False
        self.phi, self.energy, self.t = new, energy, t_new
        self.n += 1
        self._push(tau, out.predictor_report.iterations, out.corrector_report.iterations)
        return True

    def finish(self) -> RunRecord:
        self.record.final_state = self.phi
        return self.record


def run(
    initial: np.ndarray,
    grid: TimeGrid,
    h: float,
    params: SchemeParams,
    mobility: Mobility,
    *,
    strict_mbp: bool = False,
    on_step: StepCallback | None = None,
) -> RunRecord:
    """Integrate over a prescribed time grid."""
    drv = _Driver(initial, h, params, mobility, strict_mbp, on_step)
    times = grid.times
    for k, tau in enumerate(grid.step_sizes):
        if not drv.advance(float(tau), float(times[k + 1])):
            break
    return drv.finish()


def run_adaptive(
    initial: np.ndarray,
    horizon: float,
    adaptive: AdaptiveParams,
    h: float,
    params: SchemeParams,
    mobility: Mobility,
    *,
    strict_mbp: bool = False,
    on_step: StepCallback | None = None,
    stop: StopPredicate | None = None,
) -> RunRecord:
    """Integrate to ``horizon`` with energy-variation step selection.

    The first step is ``tau_min``.  Afterwards the energy rate is the backward
    difference over the last accepted step and the next step is
    ``max(tau_min, tau_max / sqrt(1 + alpha * rate^2))``.  Near the horizon the
    step is shortened so the run lands exactly on it without leaving a sliver
    shorter than ``tau_min``.  ``stop(t, phi)`` may end the run early.
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    drv = _Driver(initial, h, params, mobility, strict_mbp, on_step)
    tau = adaptive.tau_min
    while True:
        remaining = horizon - drv.t
        if remaining - tau < adaptive.tau_min:
            tau = remaining if remaining <= adaptive.tau_max else 0.5 * remaining
        last = tau == remaining
        e_old = drv.energy
        if not drv.advance(tau, horizon if last else drv.t + tau):
            break
        if last:
            break
        if stop is not None and stop(drv.t, drv.phi):
            drv.record.status = "stopped"
            break
        tau = adaptive.next_step((drv.energy - e_old) / tau)
    return drv.finish()
