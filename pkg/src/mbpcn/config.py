"""Flat ``key = value`` run configuration.

Lines are ``key = value``; ``#`` starts a comment.  Unknown keys are rejected
and every error names the key it is about.  ``s1 = auto`` / ``s2 = auto`` (or
``auto_s1 = true`` / ``auto_s2 = true``) resolve to the smallest admissible
stabilizers for the chosen mobility and grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Mapping

from .grid import Domain2D
from .linsolve import SolverConfig
from .mobility import MobilityEvaluationError, s1_lower_bound, s2_lower_bound
from .scheme import SchemeParams
from .stepping import AdaptiveParams, TimeGrid, perturbed_mesh


class ConfigError(ValueError):
    def __init__(self, key: str | None, message: str):
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key


_BOOL = {"true": True, "yes": True, "1": True, "on": True, "false": False, "no": False, "0": False, "off": False}


@dataclass(frozen=True)
class RunConfig:
    side_length: float = 1.0
    cells_per_side: int = 64
    centered: bool = False
    mobility: str = "constant"
    mobility_scale: float = 1.0
    eps: float = 0.01
    s1: float = 2.0
    s2: float = 0.0
    stepping: str = "uniform"  # uniform | perturbed | adaptive
    n_steps: int = 100
    mesh_seed: int = 0
    mesh_amplitude: float = 0.4
    tau_min: float = 1e-5
    tau_max: float = 0.01
    alpha: float = 1e5
    horizon: float = 1.0
    initial: str = "trig"  # trig | random | bubble
    seed: int = 0
    init_amplitude: float = 0.1
    radius: float = 0.2
    timeseries: str = ""
    snapshot_dir: str = ""
    snapshot_every: int = 0
    strict_mbp: bool = False
    binary: bool = False
    rel_tol: float = 1e-12
    abs_tol: float = 1e-14
    max_iters: int = 0  # 0: solver default budget

    @property
    def domain(self) -> Domain2D:
        return Domain2D(self.side_length, self.cells_per_side, self.centered)

    @property
    def solver(self) -> SolverConfig:
        return SolverConfig(self.rel_tol, self.abs_tol, self.max_iters or None)

    @property
    def scheme(self) -> SchemeParams:
        return SchemeParams(self.eps, self.s1, self.s2, self.solver)

    @property
    def adaptive(self) -> AdaptiveParams:
        return AdaptiveParams(self.tau_min, self.tau_max, self.alpha)

    def time_grid(self) -> TimeGrid:
        if self.stepping == "uniform":
            return TimeGrid.uniform(self.n_steps, self.horizon)
        if self.stepping == "perturbed":
            return perturbed_mesh(self.n_steps, self.mesh_amplitude, self.mesh_seed, self.horizon)
        raise ValueError("adaptive runs have no fixed time grid")

    def echo(self) -> str:
        return "\n".join(f"{f.name} = {_show(getattr(self, f.name))}" for f in fields(self))


def _show(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


# file keys that differ from field names
_ALIASES = {
    "solver.rel_tol": "rel_tol",
    "solver.abs_tol": "abs_tol",
    "solver.max_iters": "max_iters",
}
_FIELDS = {f.name: f for f in fields(RunConfig)}
_CHOICES = {
    "mobility": ("constant", "degenerate"),
    "stepping": ("uniform", "perturbed", "adaptive"),
    "initial": ("trig", "random", "bubble"),
}
KNOWN_KEYS = frozenset(_FIELDS) | frozenset(_ALIASES) | {"auto_s1", "auto_s2"}


def read_pairs(text: str, source: str = "<config>") -> dict[str, str]:
    pairs: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(key or None, f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        if key in pairs:
            raise ConfigError(key, f"{source}:{lineno}: duplicate key")
        pairs[key] = value.strip()
    return pairs


def _convert(key: str, name: str, raw: str):
    kind = _FIELDS[name].type
    try:
        if kind == "bool":
            return _BOOL[raw.lower()]
        if kind == "int":
            return int(raw)
        if kind == "float":
            value = float(raw)
            if not math.isfinite(value):
                raise ValueError
            return value
    except (KeyError, ValueError):
        raise ConfigError(key, f"cannot parse {raw!r} as {kind}") from None
    return raw


def parse_config(
    path: str | Path | None = None, overrides: Mapping[str, str] | None = None
) -> RunConfig:
    """Read a config file (optional) and apply string overrides on top.

    Values are validated against the constraints of the modules they feed.
    """
    pairs: dict[str, str] = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as err:
            raise ConfigError(None, f"cannot read config {path}: {err.strerror}") from None
        pairs.update(read_pairs(text, str(path)))
    pairs.update(overrides or {})

    values: dict = {}
    auto = {"s1": False, "s2": False}
    for key, raw in pairs.items():
        if key not in KNOWN_KEYS:
            raise ConfigError(key, "unknown key")
        if key in ("auto_s1", "auto_s2"):
            if raw.lower() not in _BOOL:
                raise ConfigError(key, f"cannot parse {raw!r} as bool")
            auto[key[-2:]] |= _BOOL[raw.lower()]
            continue
        if key in ("s1", "s2") and raw.lower() == "auto":
            auto[key] = True
            continue
        name = _ALIASES.get(key, key)
        values[name] = _convert(key, name, raw)

    cfg = RunConfig(**values)
    _validate(cfg)
    if auto["s1"] or auto["s2"]:
        cfg = _resolve_auto(cfg, auto)
    return cfg


def _validate(cfg: RunConfig) -> None:
    def need(ok, key, msg):
        if not ok:
            raise ConfigError(key, msg)

    for key, options in _CHOICES.items():
        need(getattr(cfg, key) in options, key, f"must be one of {', '.join(options)}")
    need(cfg.side_length > 0, "side_length", "must be positive")
    need(cfg.cells_per_side >= 2, "cells_per_side", "must be at least 2")
    need(cfg.mobility_scale > 0, "mobility_scale", "must be positive")
    need(cfg.eps > 0, "eps", f"must be positive, got {cfg.eps!r}")
    need(cfg.s1 >= 0, "s1", "must be nonnegative")
    need(cfg.s2 >= 0, "s2", "must be nonnegative")
    need(cfg.horizon > 0, "horizon", "must be positive")
    need(cfg.n_steps >= 1, "n_steps", "must be at least 1")
    need(0 <= cfg.mesh_amplitude < 1, "mesh_amplitude", "must lie in [0, 1)")
    need(cfg.tau_min > 0, "tau_min", "must be positive")
    need(cfg.tau_max >= cfg.tau_min, "tau_max", "must be >= tau_min")
    need(cfg.alpha > 0, "alpha", "must be positive")
    need(0 < cfg.init_amplitude <= 1, "init_amplitude", "must lie in (0, 1]")
    need(0 < cfg.radius < cfg.side_length / 2, "radius", "must lie in (0, side_length/2)")
    need(cfg.snapshot_every >= 0, "snapshot_every", "must be nonnegative")
    need(cfg.seed >= 0, "seed", "must be nonnegative")
    need(cfg.mesh_seed >= 0, "mesh_seed", "must be nonnegative")
    need(cfg.rel_tol > 0, "solver.rel_tol", "must be positive")
    need(cfg.abs_tol >= 0, "solver.abs_tol", "must be nonnegative")
    need(cfg.max_iters >= 0, "solver.max_iters", "must be nonnegative")


def _resolve_auto(cfg: RunConfig, auto: dict[str, bool]) -> RunConfig:
    from dataclasses import replace

    from .experiments import mobility_by_name

    mob = mobility_by_name(cfg.mobility, cfg.mobility_scale)
    s1 = cfg.s1
    if auto["s1"]:
        try:
            s1 = s1_lower_bound(mob)
        except MobilityEvaluationError as err:
            raise ConfigError("s1", f"auto bound failed: {err}") from None
    s2 = cfg.s2
    if auto["s2"]:
        s2 = s2_lower_bound(s1, mob.declared_max, cfg.eps, cfg.side_length / cfg.cells_per_side)
    return replace(cfg, s1=s1, s2=s2)
