"""``rangelp`` command line.

Exit codes: 0 success, 1 runtime or verdict failure, 2 usage error.
Rates are per year; grid spacing is given in minutes (525600 per year).
"""

import argparse
import json
import math
import os
import sys
import tempfile
import time
from datetime import datetime, timezone

from . import __version__
from .estimators import estimate_gbm, estimate_mr, load_paired_csv, load_price_series
from .montecarlo import (
    STRATEGIES,
    ExperimentConfig,
    WORKERS_ENV,
    default_workers,
    export_stats,
    pathwise_compare,
    run_experiment,
)
from .price_models import MINUTES_PER_YEAR, GbmParams, MeanRevParams, SimGrid
from .strategies import price_band, safe_interval_approx, safe_interval_exact

# parameters fitted to ETH-USDC minute data; used as flag defaults
DEFAULT_MU = -1.17
DEFAULT_SIGMA = 0.75
DEFAULT_THETA = 1058.49
DEFAULT_GAMMA = 0.68
FIG1_STEPS = 35280
FIG1_ROUNDS_DESK = 100
FIG1_ROUNDS_FULL = 1000


def _alpha(text):
    value = _float(text)
    if not value > 1.0:
        raise argparse.ArgumentTypeError(f"alpha must be > 1 (the range [Z/alpha, alpha*Z] must be non-empty), got {text}")
    return value


def _float(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"must be finite, got {text}")
    return value


def _positive(text):
    value = _float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return value


def _nonnegative(text):
    value = _float(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return value


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return value


def write_manifest(path, command, argv, config, artifacts, started, seed=None):
    """Atomically write a JSON run manifest next to the outputs."""
    manifest = {
        "command": command,
        "argv": list(argv),
        "config": config,
        "artifacts": [os.path.abspath(a) for a in artifacts],
        "wall_clock_seconds": time.time() - started,
        "finished_utc": datetime.now(timezone.utc).isoformat(),
        "version": __version__,
        "base_seed": seed,
    }
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".manifest-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return manifest


def _add_model_flags(p):
    p.add_argument("--mu", type=_float, default=DEFAULT_MU, help="GBM drift per year")
    p.add_argument("--sigma", type=_nonnegative, default=DEFAULT_SIGMA, help="GBM volatility per sqrt(year)")
    p.add_argument("--theta", type=_positive, default=DEFAULT_THETA, help="mean-reversion speed per year")
    p.add_argument("--gamma", type=_nonnegative, default=DEFAULT_GAMMA, help="AMM volatility per sqrt(year)")
    p.add_argument("--alpha", type=_alpha, default=1.1, help="range width factor (> 1)")
    p.add_argument("--z0", type=_positive, default=2000.0, help="initial AMM price")
    p.add_argument("--p0", type=_positive, default=None, help="initial exchange price (default: z0)")
    p.add_argument("--l0", type=_positive, default=1000.0, help="initial liquidity")
    p.add_argument("--dt-minutes", type=_positive, default=1.0, help="time step in minutes")
    p.add_argument("--seed", type=int, default=0, help="base seed")
    p.add_argument("--workers", type=_positive_int, default=None,
                   help=f"worker processes (default: ${WORKERS_ENV} or CPU count)")
    p.add_argument("--plot", metavar="SVG", default=None, help="also write an SVG of the ensemble means")


def _add_manifest_flags(p, command):
    default = f"rangelp-{command}.manifest.json"
    p.add_argument("--manifest", default=default, help=f"run manifest path (default: ./{default})")
    p.add_argument("--no-manifest", dest="manifest", action="store_const", const=None, help="skip the manifest")


def build_parser():
    parser = argparse.ArgumentParser(prog="rangelp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one Monte Carlo experiment and write per-step stats")
    sim.add_argument("--model", choices=["exogenous", "mean-reverting"], default="mean-reverting")
    sim.add_argument("--strategy", choices=STRATEGIES, default="chasing")
    _add_model_flags(sim)
    sim.add_argument("--rounds", type=_positive_int, default=FIG1_ROUNDS_DESK)
    sim.add_argument("--steps", type=_positive_int, default=FIG1_STEPS)
    sim.add_argument("--gate", choices=["exact", "approx"], default="exact",
                     help="safe interval used by the gated strategy")
    sim.add_argument("--delta-l", type=_float, default=None, help="explicit lower gate bound")
    sim.add_argument("--delta-r", type=_float, default=None, help="explicit upper gate bound")
    sim.add_argument("--out", required=True, help="output CSV path")

    est = sub.add_parser("estimate", help="estimate model parameters from price CSVs")
    est.add_argument("--p-csv", required=True, help="exchange price CSV (timestamp,price)")
    est.add_argument("--z-csv", default=None, help="AMM price CSV (timestamp,price)")
    est.add_argument("--mode", choices=["independent", "joined"], default="independent",
                     help="independent: mu/sigma from the whole P file; joined: from the joined window only")
    est.add_argument("--gaps", choices=["error", "ffill"], default="error")
    _add_manifest_flags(est, "estimate")

    si = sub.add_parser("safe-interval", help="deviation band on which the liquidity drift is positive")
    si.add_argument("--theta", type=_positive, default=DEFAULT_THETA)
    si.add_argument("--gamma", type=_nonnegative, default=DEFAULT_GAMMA)
    si.add_argument("--price", type=_positive, default=2000.0, help="exchange price for the AMM price band")
    _add_manifest_flags(si, "safe-interval")

    fig = sub.add_parser("reproduce-fig1", help="chasing vs SDE vs gated vs closed-form comparison")
    _add_model_flags(fig)
    fig.add_argument("--rounds", type=_positive_int, default=None)
    fig.add_argument("--steps", type=_positive_int, default=FIG1_STEPS)
    fig.add_argument("--full-scale", action="store_true", help=f"{FIG1_ROUNDS_FULL} rounds of {FIG1_STEPS} steps")
    fig.add_argument("--out-dir", required=True)
    return parser


def _config_from_args(args, model, strategy, rounds, steps, gate="exact"):
    return ExperimentConfig(
        model=model,
        strategy=strategy,
        gbm=GbmParams(args.mu, args.sigma),
        mr=MeanRevParams(args.theta, args.gamma) if model == "mean-reverting" else None,
        grid=SimGrid.from_minutes(args.dt_minutes, steps),
        rounds=rounds,
        z0=args.z0,
        p0=args.p0,
        l0=args.l0,
        alpha=args.alpha,
        base_seed=args.seed,
        gate=gate,
    )


def _plot(curves, path, l0):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(8, 4.5))
    for label, stats in curves.items():
        ax.plot(stats.t * MINUTES_PER_YEAR, stats.mean, label=label, lw=1.2)
    ax.axhline(l0, color="grey", lw=0.6, ls=":")
    ax.set_xlabel("minutes")
    ax.set_ylabel("mean liquidity")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def cmd_simulate(args, argv):
    started = time.time()
    if (args.delta_l is None) != (args.delta_r is None):
        raise _UsageError("--delta-l and --delta-r must be given together")
    gate = args.gate if args.delta_l is None else (args.delta_l, args.delta_r)
    try:
        cfg = _config_from_args(args, args.model, args.strategy, args.rounds, args.steps, gate)
    except ValueError as exc:
        raise _UsageError(str(exc)) from None
    workers = args.workers or default_workers()
    stats = run_experiment(cfg, workers=workers)
    export_stats(stats, args.out)
    artifacts = [args.out]
    if args.plot:
        _plot({f"{cfg.strategy} ({cfg.model})": stats}, args.plot, cfg.l0)
        artifacts.append(args.plot)
    write_manifest(args.out + ".manifest.json", "simulate", argv, cfg.to_dict(), artifacts, started, cfg.base_seed)
    print(f"L_0 = {stats.mean[0]:.6g}  mean L_T = {stats.mean[-1]:.6g}  "
          f"p10/p50/p90 L_T = {stats.p10[-1]:.6g}/{stats.p50[-1]:.6g}/{stats.p90[-1]:.6g}  "
          f"aborted = {int(stats.aborted[-1])}  band violations = {int(stats.band_violations.sum())}")
    print(f"wrote {args.out}")
    return 0


def cmd_estimate(args, argv):
    started = time.time()
    p_prices, dt = load_price_series(args.p_csv, gaps=args.gaps)
    result = {}
    if args.z_csv is None:
        mu, sigma = estimate_gbm(p_prices, dt)
    else:
        paired = load_paired_csv(args.p_csv, args.z_csv, gaps=args.gaps)
        source = paired.p if args.mode == "joined" else p_prices
        mu, sigma = estimate_gbm(source, dt)
        theta, gamma = estimate_mr(paired)
        result.update(theta_hat=theta, gamma_hat=gamma, joined_rows=len(paired),
                      dropped_p=paired.dropped_p, dropped_z=paired.dropped_z)
    result = {"mu_hat": mu, "sigma_hat": sigma, **result}
    print(f"mu_hat    = {mu:.6g} per year")
    print(f"sigma_hat = {sigma:.6g} per sqrt(year)")
    if "theta_hat" in result:
        params = MeanRevParams(result["theta_hat"], result["gamma_hat"])
        exact = safe_interval_exact(params)
        approx = safe_interval_approx(params)
        result.update(safe_interval_exact=list(exact), safe_interval_approx=list(approx))
        print(f"theta_hat = {params.theta:.6g} per year")
        print(f"gamma_hat = {params.gamma:.6g} per sqrt(year)")
        print(f"joined rows = {result['joined_rows']} (dropped {result['dropped_p']} P, {result['dropped_z']} Z)")
        print(f"safe interval exact  = ({exact[0]:.6g}, {exact[1]:.6g})")
        print(f"safe interval approx = ({approx[0]:.6g}, {approx[1]:.6g})")
    if args.manifest:
        write_manifest(args.manifest, "estimate", argv, {**vars(args), "result": result}, [], started)
    return 0


def cmd_safe_interval(args, argv):
    started = time.time()
    params = MeanRevParams(args.theta, args.gamma)
    exact = safe_interval_exact(params)
    approx = safe_interval_approx(params)
    print(f"exact  delta_l = {exact[0]:.6g}  delta_r = {exact[1]:.6g}")
    print(f"approx delta_l = {approx[0]:.6g}  delta_r = {approx[1]:.6g}")
    if exact[0] < exact[1]:
        band = price_band(args.price, *exact)
        band_approx = price_band(args.price, *approx)
        print(f"AMM price band at P = {args.price:g}: {band[0]:.8g} < Z < {band[1]:.8g} "
              f"(approx {band_approx[0]:.8g} < Z < {band_approx[1]:.8g})")
    else:
        print(f"AMM price band at P = {args.price:g}: empty")
    if args.manifest:
        result = {"exact": list(exact), "approx": list(approx)}
        write_manifest(args.manifest, "safe-interval", argv, {**vars(args), "result": result}, [], started)
    return 0


def cmd_reproduce_fig1(args, argv):
    started = time.time()
    rounds = args.rounds or (FIG1_ROUNDS_FULL if args.full_scale else FIG1_ROUNDS_DESK)
    os.makedirs(args.out_dir, exist_ok=True)
    workers = args.workers or default_workers()
    configs = {
        "chasing": _config_from_args(args, "mean-reverting", "chasing", rounds, args.steps),
        "theorem2-sde": _config_from_args(args, "mean-reverting", "theorem2-sde", rounds, args.steps),
        "gated": _config_from_args(args, "mean-reverting", "gated", rounds, args.steps),
        "closed-form": _config_from_args(args, "exogenous", "closed-form", 1, args.steps),
    }
    curves, artifacts = {}, []
    for name, cfg in configs.items():
        stats = run_experiment(cfg, workers=workers)
        path = os.path.join(args.out_dir, f"{name}.csv")
        export_stats(stats, path)
        curves[name] = stats
        artifacts.append(path)
    deviation = pathwise_compare(configs["chasing"], workers=workers)
    l0 = args.l0
    checks = {
        "gated_end_above_initial": bool(curves["gated"].mean[-1] > l0),
        "chasing_end_below_initial": bool(curves["chasing"].mean[-1] < l0),
        "closed_form_end_below_initial": bool(curves["closed-form"].mean[-1] < l0),
        "pathwise_deviation_below_1pct": bool(deviation < 0.01),
    }
    summary = {
        "rounds": rounds,
        "steps": args.steps,
        "l0": l0,
        "end_mean": {k: float(v.mean[-1]) for k, v in curves.items()},
        "aborted": {k: int(v.aborted[-1]) for k, v in curves.items()},
        "band_violations": {k: int(v.band_violations.sum()) for k, v in curves.items()},
        "pathwise_max_relative_deviation": deviation,
        "checks": checks,
        "passed": all(checks.values()),
    }
    summary_path = os.path.join(args.out_dir, "summary.json")
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    artifacts.append(summary_path)
    if args.plot:
        _plot(curves, args.plot, l0)
        artifacts.append(args.plot)
    write_manifest(os.path.join(args.out_dir, "manifest.json"), "reproduce-fig1", argv,
                   {k: c.to_dict() for k, c in configs.items()}, artifacts, started, args.seed)
    for name, stats in curves.items():
        print(f"{name:>13}: mean L_T = {stats.mean[-1]:.6g}")
    print(f"pathwise max relative deviation (chasing vs SDE) = {deviation:.3g}")
    for name, ok in checks.items():
        print(f"[{'PASS' if ok else 'FAIL'}] {name}")
    return 0 if summary["passed"] else 1


class _UsageError(Exception):
    pass


COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "safe-interval": cmd_safe_interval,
    "reproduce-fig1": cmd_reproduce_fig1,
}


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args, argv)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"rangelp: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, RuntimeError, ImportError) as exc:
        print(f"rangelp: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
