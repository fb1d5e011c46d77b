"""``mbpcn`` command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 linear-solver
non-convergence, 4 bound violation under ``--strict-mbp``, 5 blow-up.
``MBPCN_THREADS`` caps kernel threads (0 = automatic).
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import output
from .config import ConfigError, parse_config
from .experiments import (
    BubbleConfig,
    CoarseningConfig,
    ConvergenceConfig,
    bubble_benchmark,
    coarsening_benchmark,
    convergence_study,
    init_bubble,
    init_random,
    init_trig,
    mobility_by_name,
)
from .linsolve import NonConvergenceError
from .mobility import check_stabilized_bound, s1_lower_bound, s2_lower_bound, tau_max_conditional
from .stepping import AdaptiveParams, MBPViolation, RunRecord, run, run_adaptive

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_MBP = 4
EXIT_BLOWUP = 5


def _say(msg: str) -> None:
    print(msg, flush=True)


def _snapshot_hook(directory: str, every: int, h: float, binary: bool):
    """on_step callback writing ``snap_<step>.csv`` every ``every`` steps."""
    if not directory or every <= 0:
        return None
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)

    def hook(n, t, phi):
        if n % every == 0:
            output.write_snapshot(phi, t, h, out / f"snap_{n:07d}.csv", binary=binary)

    return hook


def _finish(record: RunRecord, args, h: float) -> int:
    if getattr(args, "timeseries", None):
        output.write_timeseries(record, args.timeseries)
    if getattr(args, "snapshot", None) and record.final_state is not None:
        output.write_snapshot(record.final_state, record.rows[-1].t, h, args.snapshot, binary=args.binary)
    last = record.rows[-1]
    _say(
        f"status={record.status} steps={last.step} t={last.t!r} "
        f"max_sup={record.max_sup_norm!r} energy={last.energy!r}"
    )
    if record.blew_up:
        _say(f"blow-up at step {record.blowup_step}, t={record.blowup_time!r}: {record.message}")
        return EXIT_BLOWUP
    return EXIT_OK


# --- subcommands ---------------------------------------------------------------


def cmd_run(args) -> int:
    overrides = dict(_split_set(s) for s in args.set)
    if args.strict_mbp:
        overrides["strict_mbp"] = "true"
    if args.binary:
        overrides["binary"] = "true"
    cfg = parse_config(args.config, overrides)
    if args.echo:
        _say(cfg.echo())
    args.timeseries = args.timeseries or cfg.timeseries
    args.binary = cfg.binary
    domain = cfg.domain
    h = domain.spacing
    if cfg.initial == "trig":
        phi0 = init_trig(domain)
    elif cfg.initial == "random":
        phi0 = init_random(domain, cfg.seed, cfg.init_amplitude)
    else:
        phi0 = init_bubble(domain, cfg.radius)
    mob = mobility_by_name(cfg.mobility, cfg.mobility_scale)
    hook = _snapshot_hook(cfg.snapshot_dir, cfg.snapshot_every, h, cfg.binary)
    kwargs = dict(strict_mbp=cfg.strict_mbp, on_step=hook)
    if cfg.stepping == "adaptive":
        record = run_adaptive(phi0, cfg.horizon, cfg.adaptive, h, cfg.scheme, mob, **kwargs)
    else:
        record = run(phi0, cfg.time_grid(), h, cfg.scheme, mob, **kwargs)
    return _finish(record, args, h)


def _split_set(item: str) -> tuple[str, str]:
    key, sep, value = item.partition("=")
    if not sep:
        raise ConfigError(key, f"--set expects key=value, got {item!r}")
    return key.strip(), value.strip()


def cmd_converge(args) -> int:
    cfg = ConvergenceConfig(
        ladder=tuple(args.ladder),
        cells_per_side=args.cells,
        eps=args.eps,
        s1=args.s1,
        s2=args.s2,
        horizon=args.horizon,
        mobility=args.mobility,
        mesh=args.mesh,
        amplitude=args.amplitude,
        seed=args.seed,
    )
    if args.auto_s2:
        mob = mobility_by_name(args.mobility)
        cfg = replace(cfg, s2=s2_lower_bound(cfg.s1, mob.declared_max, cfg.eps, 1.0 / args.cells))
    _say(f"s1={cfg.s1!r} s2={cfg.s2!r} mesh={cfg.mesh} mobility={cfg.mobility} M={cfg.cells_per_side}")
    rows = convergence_study(cfg, on_run=lambda n, rec: _say(f"  N={n} done"))
    _say(output.CONVERGENCE_HEADER)
    for r in rows:
        _say(",".join(output.format_float(v) if isinstance(v, float) else str(v) for v in r.__dict__.values()))
    if args.out:
        output.write_convergence(rows, args.out)
    return EXIT_OK


def cmd_coarsen(args) -> int:
    tau = args.tau if args.tau is not None else 2.0
    s2 = args.s2
    if args.unstable:
        s2 = 0.0
    cfg = CoarseningConfig(
        cells_per_side=args.cells,
        eps=args.eps if args.eps is not None else 1.0 / args.cells,
        s2=s2,
        tau=tau,
        horizon=args.horizon,
        seed=args.seed,
    )
    _say(f"s1={cfg.s1!r} s2={cfg.resolved_s2()!r} tau={cfg.tau!r} T={cfg.horizon!r} M={cfg.cells_per_side}")
    h = cfg.domain.spacing
    hook = _snapshot_hook(args.snapshot_dir, args.snapshot_every, h, args.binary)
    record = coarsening_benchmark(cfg, strict_mbp=args.strict_mbp, on_step=hook)
    return _finish(record, args, h)


def cmd_bubble(args) -> int:
    cfg = BubbleConfig(
        cells_per_side=args.cells,
        eps=args.eps,
        adaptive=AdaptiveParams(args.tau_min, args.tau_max, args.alpha),
        horizon=args.horizon,
    )
    report = bubble_benchmark(cfg, strict_mbp=args.strict_mbp)
    if args.radius_out:
        output.write_bubble(report, args.radius_out)
    _say(f"vanish_time={report.vanish_time!r} max_radius_deviation(t<=150)={report.max_deviation(150.0)!r}")
    return _finish(report.record, args, cfg.domain.spacing)


def cmd_verify(args) -> int:
    from .oracle import verify_all

    results = verify_all(trials=args.trials, seed=args.seed)
    for r in results:
        _say(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<42s} margin={r.margin:+.3e}  {r.detail}")
    failed = sum(not r.passed for r in results)
    _say(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_OK if failed == 0 else 1


def cmd_bounds(args) -> int:
    mob = mobility_by_name(args.mobility, args.mobility_scale)
    s1 = args.s1 if args.s1 is not None else s1_lower_bound(mob)
    h = args.side_length / args.cells
    big_l = mob.declared_max
    _say(f"mobility={mob.name} L={big_l!r} eps={args.eps!r} h={h!r}")
    _say(f"s1_lower_bound={s1_lower_bound(mob)!r}")
    _say(f"s1={s1!r}")
    rep = check_stabilized_bound(mob, s1)
    _say(f"stabilized_reaction_bound={'ok' if rep.passed else 'violated'} max={rep.max_deviation!r}")
    _say(f"s2_unconditional={s2_lower_bound(s1, big_l, args.eps, h)!r}")
    _say(f"tau_max_with_s2_zero={tau_max_conditional(s1, big_l, args.eps, h)!r}")
    return EXIT_OK


# --- parser --------------------------------------------------------------------


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mbpcn", description="Bound-preserving Crank-Nicolson solver for Allen-Cahn with mobility.")
    sub = p.add_subparsers(dest="command", required=True)

    def outputs(sp, snapshots=True):
        sp.add_argument("--timeseries", help="write per-step CSV here")
        sp.add_argument("--snapshot", help="write the final field as CSV here")
        if snapshots:
            sp.add_argument("--snapshot-dir", default="", help="directory for periodic snapshots")
            sp.add_argument("--snapshot-every", type=int, default=0, help="snapshot cadence in steps")
        sp.add_argument("--binary", action="store_true", help="also write raw little-endian float64 snapshots")
        sp.add_argument("--strict-mbp", action="store_true", help="exit 4 as soon as |phi| > 1 + 1e-8")

    sp = sub.add_parser("run", help="config-driven simulation")
    sp.add_argument("config", nargs="?", help="key=value config file")
    sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
    sp.add_argument("--echo", action="store_true", help="print the resolved configuration")
    outputs(sp, snapshots=False)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("converge", help="temporal self-convergence ladder")
    sp.add_argument("--mobility", choices=("constant", "degenerate"), default="constant")
    sp.add_argument("--mesh", choices=("uniform", "perturbed"), default="uniform")
    sp.add_argument("--ladder", type=_positive_int, nargs="+", default=[10, 20, 40, 80, 160])
    sp.add_argument("--cells", type=_positive_int, default=256)
    sp.add_argument("--eps", type=float, default=0.01)
    sp.add_argument("--s1", type=float, default=2.0)
    sp.add_argument("--s2", type=float, default=2.0)
    sp.add_argument("--auto-s2", action="store_true", help="use the smallest unconditional S2 instead of --s2")
    sp.add_argument("--horizon", type=float, default=1.0)
    sp.add_argument("--amplitude", type=float, default=0.4)
    sp.add_argument("--seed", type=int, default=2024)
    sp.add_argument("--out", help="write the table as CSV here")
    sp.set_defaults(func=cmd_converge)

    sp = sub.add_parser("coarsen", help="degenerate-mobility coarsening from random data")
    sp.add_argument("--tau", type=float)
    sp.add_argument("--s2", type=float, help="default: smallest unconditional value")
    sp.add_argument("--unstable", action="store_true", help="S2 = 0 with tau = 2 (expected to blow up)")
    sp.add_argument("--cells", type=_positive_int, default=256)
    sp.add_argument("--eps", type=float, help="default: h")
    sp.add_argument("--horizon", type=float, default=100.0)
    sp.add_argument("--seed", type=int, default=7)
    outputs(sp)
    sp.set_defaults(func=cmd_coarsen)

    sp = sub.add_parser("bubble", help="shrinking bubble with adaptive steps")
    sp.add_argument("--cells", type=_positive_int, default=256)
    sp.add_argument("--eps", type=float, default=0.01)
    sp.add_argument("--tau-min", type=float, default=1e-5)
    sp.add_argument("--tau-max", type=float, default=0.01)
    sp.add_argument("--alpha", type=float, default=1e5)
    sp.add_argument("--horizon", type=float, default=250.0)
    sp.add_argument("--radius-out", help="write sampled radii as CSV here")
    outputs(sp, snapshots=False)
    sp.set_defaults(func=cmd_bubble)

    sp = sub.add_parser("verify", help="dense-oracle verification suite")
    sp.add_argument("--trials", type=_positive_int, default=50)
    sp.add_argument("--seed", type=int, default=12345)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("bounds", help="print stabilizer and step-size bounds")
    sp.add_argument("--mobility", choices=("constant", "degenerate"), default="degenerate")
    sp.add_argument("--mobility-scale", type=float, default=1.0)
    sp.add_argument("--eps", type=float, default=1.0 / 256)
    sp.add_argument("--cells", type=_positive_int, default=256)
    sp.add_argument("--side-length", type=float, default=1.0)
    sp.add_argument("--s1", type=float, help="default: computed lower bound")
    sp.set_defaults(func=cmd_bounds)
    return p


def _apply_threads() -> None:
    raw = os.environ.get("MBPCN_THREADS")
    if raw is None:
        return
    try:
        n = int(raw)
        if n < 0:
            raise ValueError
    except ValueError:
        raise ConfigError("MBPCN_THREADS", f"expected a nonnegative integer, got {raw!r}") from None
    from ._kernels import set_threads

    set_threads(n)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _apply_threads()
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except NonConvergenceError as err:
        print(f"solver did not converge: {err}", file=sys.stderr)
        return EXIT_SOLVER
    except MBPViolation as err:
        rec = err.record
        if getattr(args, "timeseries", None):
            output.write_timeseries(rec, args.timeseries)
        print(f"bound violation: {err}", file=sys.stderr)
        return EXIT_MBP
    except ValueError as err:
        print(f"invalid parameter: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
