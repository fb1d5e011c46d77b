"""Initial data and the three benchmark drivers.

* :func:`convergence_study` -- temporal self-convergence at T by comparing the
  N-step and 2N-step terminal states.
* :func:`coarsening_benchmark` -- degenerate-mobility coarsening from small
  random data, including the deliberately unstable ``S2 = 0`` configuration.
* :func:`bubble_benchmark` -- a shrinking circular bubble compared with the
  radius law ``R(t) = sqrt(R0^2 - 2 eps^2 t)``.

Defaults are desk scale (h = 1/256, short horizons); every size parameter can
be raised to the full-scale values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .grid import Domain2D, norm_h1, norm_sup
from .linsolve import SolverConfig
from .mobility import Mobility, constant_mobility, degenerate_mobility, s2_lower_bound
from .rng import SplitMix64
from .scheme import SchemeParams
from .stepping import AdaptiveParams, RunRecord, TimeGrid, perturbed_mesh, run, run_adaptive


def init_trig(domain: Domain2D) -> np.ndarray:
    x, y = domain.mesh()
    return 0.1 * (np.cos(3 * x) * np.cos(2 * y) + np.cos(5 * x) * np.cos(5 * y))


def init_random(domain: Domain2D, seed: int, amplitude: float = 0.1) -> np.ndarray:
    """Independent U[-amplitude, amplitude) entries in row-major order."""
    if not 0 < amplitude <= 1:
        raise ValueError("amplitude must lie in (0, 1]")
    m = domain.cells_per_side
    return amplitude * SplitMix64(seed).symmetric(m * m).reshape(m, m)


def init_bubble(domain: Domain2D, radius: float = 0.2) -> np.ndarray:
    """+1 inside the disc of given radius about the domain centre, -1 outside."""
    if not 0 < radius < domain.side_length / 2:
        raise ValueError("bubble radius must lie in (0, L/2)")
    centre = domain.origin + 0.5 * domain.side_length
    x, y = domain.mesh()
    inside = (x - centre) ** 2 + (y - centre) ** 2 < radius**2
    return np.where(inside, 1.0, -1.0)


def mobility_by_name(name: str, scale: float = 1.0) -> Mobility:
    if name == "constant":
        return constant_mobility(scale)
    if name == "degenerate":
        return degenerate_mobility()
    raise ValueError(f"unknown mobility {name!r} (expected 'constant' or 'degenerate')")


# --- temporal convergence ------------------------------------------------------


@dataclass(frozen=True)
class ConvergenceRow:
    n_steps: int
    max_ratio: float
    err_h1: float
    err_sup: float
    order_h1: float = math.nan
    order_sup: float = math.nan


@dataclass(frozen=True)
class ConvergenceConfig:
    ladder: Sequence[int] = (10, 20, 40, 80, 160)
    cells_per_side: int = 256
    side_length: float = 1.0
    eps: float = 0.01
    s1: float = 2.0
    s2: float = 2.0
    horizon: float = 1.0
    mobility: str = "constant"
    mesh: str = "uniform"  # uniform | perturbed
    amplitude: float = 0.4
    seed: int = 2024
    solver: SolverConfig = field(default_factory=SolverConfig)

    def time_grid(self, n: int) -> TimeGrid:
        if self.mesh == "uniform":
            return TimeGrid.uniform(n, self.horizon)
        if self.mesh == "perturbed":
            # each resolution draws its own mesh; seed offset keeps them distinct
            return perturbed_mesh(n, self.amplitude, self.seed + n, self.horizon)
        raise ValueError(f"unknown mesh kind {self.mesh!r}")


def convergence_study(
    config: ConvergenceConfig,
    runner: Callable[[np.ndarray, TimeGrid], np.ndarray] | None = None,
    on_run: Callable[[int, RunRecord], None] | None = None,
) -> list[ConvergenceRow]:
    """Self-convergence table over ``config.ladder``.

    For each N the terminal states on the N- and 2N-step grids are compared in
    the discrete sup and H1 norms; orders are ``log2`` of successive error
    ratios.  ``runner(initial, grid)`` replaces the CN integrator when given.
    Each distinct resolution is integrated once and reused.
    """
    ladder = sorted(int(n) for n in config.ladder)
    if not ladder or ladder[0] < 1 or len(set(ladder)) != len(ladder):
        raise ValueError("ladder must list distinct positive step counts")
    domain = Domain2D(config.side_length, config.cells_per_side)
    h = domain.spacing
    phi0 = init_trig(domain)
    mobility = mobility_by_name(config.mobility)
    params = SchemeParams(config.eps, config.s1, config.s2, config.solver)

    if runner is None:

        def runner(initial, grid):
            rec = run(initial, grid, h, params, mobility)
            if on_run is not None:
                on_run(len(grid), rec)
            if rec.blew_up:
                raise RuntimeError(f"run with {len(grid)} steps blew up: {rec.message}")
            return rec.final_state

    finals: dict[int, np.ndarray] = {}
    grids: dict[int, TimeGrid] = {}
    for n in sorted(set(ladder) | {2 * n for n in ladder}):
        grids[n] = config.time_grid(n)
        finals[n] = runner(phi0, grids[n])

    rows: list[ConvergenceRow] = []
    for n in ladder:
        diff = finals[n] - finals[2 * n]
        ratios = grids[n].ratios
        max_ratio = float(ratios.max()) if ratios.size else 1.0
        e_h1, e_sup = norm_h1(diff, h), norm_sup(diff)
        order_h1 = order_sup = math.nan
        if rows and rows[-1].n_steps * 2 == n:
            order_h1 = _order(rows[-1].err_h1, e_h1)
            order_sup = _order(rows[-1].err_sup, e_sup)
        rows.append(ConvergenceRow(n, max_ratio, e_h1, e_sup, order_h1, order_sup))
    return rows


def _order(coarse: float, fine: float) -> float:
    if coarse > 0 and fine > 0:
        return math.log2(coarse / fine)
    return math.nan


def fixed_step_grid(tau: float, horizon: float) -> TimeGrid:
    """Steps of size ``tau``, with a shorter last step if ``tau`` does not divide ``horizon``."""
    n = max(1, round(horizon / tau))
    if math.isclose(n * tau, horizon, rel_tol=1e-12):
        return TimeGrid.uniform(n, horizon)
    n = math.floor(horizon / tau)
    steps = np.full(n + 1, tau)
    steps[-1] = horizon - n * tau
    return TimeGrid(steps)


# --- coarsening ----------------------------------------------------------------


@dataclass(frozen=True)
class CoarseningConfig:
    cells_per_side: int = 256
    side_length: float = 1.0
    eps: float = 1.0 / 256
    s1: float = 0.8
    s2: float | None = None  # None: smallest S2 giving unconditional bound preservation
    tau: float = 2.0
    horizon: float = 100.0
    adaptive: AdaptiveParams | None = None
    seed: int = 7
    amplitude: float = 0.1
    solver: SolverConfig = field(default_factory=SolverConfig)

    @property
    def domain(self) -> Domain2D:
        return Domain2D(self.side_length, self.cells_per_side)

    def resolved_s2(self) -> float:
        if self.s2 is not None:
            return self.s2
        return s2_lower_bound(self.s1, degenerate_mobility().declared_max, self.eps, self.domain.spacing)


def coarsening_benchmark(config: CoarseningConfig, **run_kwargs) -> RunRecord:
    """Degenerate-mobility coarsening; blow-up is reported in the record."""
    domain = config.domain
    h = domain.spacing
    phi0 = init_random(domain, config.seed, config.amplitude)
    params = SchemeParams(config.eps, config.s1, config.resolved_s2(), config.solver)
    mobility = degenerate_mobility()
    if config.adaptive is not None:
        return run_adaptive(phi0, config.horizon, config.adaptive, h, params, mobility, **run_kwargs)
    return run(phi0, fixed_step_grid(config.tau, config.horizon), h, params, mobility, **run_kwargs)


# --- shrinking bubble ------------------------------------------------------------


def bubble_radius(phi: np.ndarray, h: float) -> float:
    """Equivalent radius ``sqrt(A+/pi)`` of the region where ``phi > 0``."""
    return math.sqrt(h * h * np.count_nonzero(phi > 0) / math.pi)


def predicted_radius(r0: float, eps: float, t: float) -> float:
    r2 = r0 * r0 - 2.0 * eps * eps * t
    return math.sqrt(r2) if r2 >= 0 else math.nan


@dataclass(frozen=True)
class BubbleConfig:
    cells_per_side: int = 256
    side_length: float = 1.0
    eps: float = 0.01
    radius: float = 0.2
    s1: float = 2.0
    s2: float | None = None
    adaptive: AdaptiveParams = field(default_factory=lambda: AdaptiveParams(1e-5, 0.01, 1e5))
    horizon: float = 250.0
    sample_every: float = 1.0
    stop_on_vanish: bool = True
    solver: SolverConfig = field(default_factory=SolverConfig)

    @property
    def domain(self) -> Domain2D:
        return Domain2D(self.side_length, self.cells_per_side, centered=True)

    def resolved_s2(self) -> float:
        if self.s2 is not None:
            return self.s2
        return s2_lower_bound(self.s1, 1.0, self.eps, self.domain.spacing)


@dataclass
class BubbleReport:
    times: list[float] = field(default_factory=list)
    measured: list[float] = field(default_factory=list)
    predicted: list[float] = field(default_factory=list)
    vanish_time: float = math.nan
    record: RunRecord | None = None

    def max_deviation(self, t_max: float) -> float:
        dev = [abs(m - p) for t, m, p in zip(self.times, self.measured, self.predicted) if t <= t_max]
        return max(dev) if dev else math.nan


def bubble_benchmark(config: BubbleConfig, **run_kwargs) -> BubbleReport:
    """Adaptive run of the shrinking bubble with constant unit mobility.

    The radius is sampled at the first step on or after each multiple of
    ``sample_every``; the vanish time is the first step time at which
    ``max(phi) < 0``.
    """
    domain = config.domain
    h = domain.spacing
    r0, eps = config.radius, config.eps
    phi0 = init_bubble(domain, r0)
    params = SchemeParams(eps, config.s1, config.resolved_s2(), config.solver)
    report = BubbleReport()
    next_sample = [0.0]
    user_hook = run_kwargs.pop("on_step", None)

    def on_step(n, t, phi):
        if t >= next_sample[0] - 1e-12:
            report.times.append(t)
            report.measured.append(bubble_radius(phi, h))
            report.predicted.append(predicted_radius(r0, eps, t))
            next_sample[0] = config.sample_every * (math.floor(t / config.sample_every + 1e-9) + 1)
        if math.isnan(report.vanish_time) and float(phi.max()) < 0:
            report.vanish_time = t
        if user_hook is not None:
            user_hook(n, t, phi)

    stop = (lambda t, phi: not math.isnan(report.vanish_time)) if config.stop_on_vanish else None
    report.record = run_adaptive(
        phi0, config.horizon, config.adaptive, h, params, constant_mobility(), on_step=on_step, stop=stop, **run_kwargs
    )
    return report
