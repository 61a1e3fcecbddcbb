"""Command-line entry point.

Exit codes: 0 success, 1 usage, 2 domain error, 3 I/O error. File outputs are
written to a temporary sibling and renamed into place, each with a
``<out>.manifest.json`` sidecar recording everything needed to rebuild it.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import secrets
import sys
import tempfile
import time
from pathlib import Path

from . import __version__
from .ellipsoids import FunctionSpace, solve_extremal, u_asymptotic
from .errors import DimensionError, DomainError
from .risk_lab import (
    ExperimentSpec,
    SelectorKind,
    bayes_lower_bound,
    mc_risk,
    phase_sweep,
    sweep_seed,
    tail_check,
)
from .selectors import (
    SelectorConfig,
    almost_full_target,
    almost_full_threshold,
    build_grid,
    default_config,
    default_schedules,
    exact_target,
    exact_threshold,
    r_star_almost_full,
    r_star_exact,
)
from .signal_model import SignMode

EXIT_USAGE, EXIT_DOMAIN, EXIT_IO = 1, 2, 3

SWEEP_COLUMNS = ["rho", "selector", "d", "s", "eps", "sigma", "reps", "mean_norm_risk", "std_err", "seed"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def fmt_real(x: float) -> str:
    return format(float(x), ".17g")


def to_json(obj) -> str:
    """JSON with 17 significant digits for reals; non-finite reals become null."""

    def enc(o):
        if isinstance(o, bool) or o is None:
            return json.dumps(o)
        if isinstance(o, int):
            return str(o)
        if isinstance(o, float):
            return fmt_real(o) if math.isfinite(o) else "null"
        if isinstance(o, str):
            return json.dumps(o, ensure_ascii=False)
        if isinstance(o, dict):
            return "{" + ", ".join(f"{json.dumps(str(k))}: {enc(v)}" for k, v in o.items()) + "}"
        if isinstance(o, (list, tuple)):
            return "[" + ", ".join(enc(v) for v in o) + "]"
        if hasattr(o, "tolist"):
            return enc(o.tolist())
        raise TypeError(f"cannot encode {type(o).__name__}")

    return enc(obj) + "\n"


def atomic_write(path: Path, text: str) -> str:
    """Write-then-rename; returns the sha256 of the bytes written."""
    data = text.encode("utf-8")
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent if str(path.parent) else ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return hashlib.sha256(data).hexdigest()


def write_manifest(out: Path, command: str, params: dict, seed, digests: dict, started: float) -> None:
    manifest = {
        "command": command,
        "parameters": params,
        "seed": seed,
        "version": __version__,
        "wall_clock_seconds": time.perf_counter() - started,
        "outputs": digests,
    }
    atomic_write(Path(f"{out}.manifest.json"), to_json(manifest))


def _reals(text: str) -> list[float]:
    try:
        values = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of reals, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return value


def _space(args) -> FunctionSpace:
    return FunctionSpace(args.space, args.sigma)


def _add_space(p, with_r=False):
    p.add_argument("--space", choices=["sobolev", "analytic"], required=True)
    p.add_argument("--sigma", type=float, required=True)
    if with_r:
        p.add_argument("--r", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)


def _add_experiment(p):
    _add_space(p)
    p.add_argument("--selector", choices=[k.value for k in SelectorKind], required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--seed", type=_seed)
    p.add_argument("--sign-mode", choices=[m.value for m in SignMode], default=SignMode.RADEMACHER.value)
    p.add_argument("--delta", type=float, help="threshold slack (default (log d)^-1/2)")
    p.add_argument("--tau", type=float, help="Lepski tolerance divisor (default (log d)^1/2)")
    p.add_argument("--grid-step", type=float, help="grid step Delta (default (log d)^-3/2)")
    p.add_argument("--c-low", type=float, default=0.25)
    p.add_argument("--c-high", type=float, default=0.75)


def _config(args) -> SelectorConfig:
    delta, step, tau = default_schedules(args.d)
    delta = args.delta if args.delta is not None else delta
    tau = args.tau if args.tau is not None else tau
    step = args.grid_step if args.grid_step is not None else step
    return SelectorConfig(delta, tau, build_grid(args.d, args.c_low, args.c_high, step))


def _spec(args, rho: float, seed: int) -> ExperimentSpec:
    return ExperimentSpec(
        _space(args), args.d, args.s, args.eps, rho, SelectorKind(args.selector),
        _config(args), SignMode(args.sign_mode), args.reps, seed,
    )


def _params(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("handler", "out")}


def _emit(args, command: str, doc: dict, seed, started: float) -> None:
    text = to_json(doc)
    if args.out is None:
        sys.stdout.write(text)
        return
    out = Path(args.out)
    digest = atomic_write(out, text)
    write_manifest(out, command, _params(args), seed, {out.name: digest}, started)


def cmd_extremal(args, started):
    space = _space(args)
    profile = solve_extremal(space, args.r, args.eps)
    doc = {
        "space": space.kind.value,
        "sigma": space.sigma,
        "r": args.r,
        "eps": args.eps,
        "K": profile.K,
        "theta_star": profile.theta_star,
        "u_exact": profile.u,
        "u_asymptotic": u_asymptotic(space, args.r, args.eps),
        "omega": profile.omega,
        "constraint_residuals": {
            "l2_relative": profile.l2_sq() / args.r**2 - 1.0,
            "ellipsoid": profile.ellipsoid_sq() - 1.0,
            "omega_sq_sum": profile.omega_sq_sum() - 0.5,
        },
    }
    _emit(args, "extremal", doc, None, started)


def cmd_boundary(args, started):
    space = _space(args)
    d, s = args.d, args.s
    if not 1 <= s < d:
        raise DomainError(f"need 1 <= s < d, got s={s}, d={d}")
    delta = args.delta if args.delta is not None else default_schedules(d)[0]
    if args.mode == "almost-full":
        target = almost_full_target(d, s)
        r_star = r_star_almost_full(space, args.eps, d, s)
        threshold = almost_full_threshold(d, s, delta)
    else:
        target = exact_target(d, s)
        r_star = r_star_exact(space, args.eps, d, s)
        threshold = exact_threshold(d, delta)
    doc = {"mode": args.mode, "d": d, "s": s, "delta": delta, "target_u": target, "r_star": r_star, "threshold": threshold}
    _emit(args, "boundary", doc, None, started)


def _report_doc(report) -> dict:
    spec = report.spec
    return {
        "selector": spec.selector.value,
        "space": spec.space.kind.value,
        "sigma": spec.space.sigma,
        "d": spec.d,
        "s": spec.s,
        "eps": spec.eps,
        "rho": spec.rho,
        "reps": spec.reps,
        "seed": spec.seed,
        "delta": spec.config.delta,
        "tau": spec.config.tau,
        "grid": list(spec.config.grid.points),
        "mean_norm_risk": report.mean_normalized_risk,
        "std_err": report.std_error,
        "ci95": list(report.ci95),
        "hamming_counts": report.counts,
    }


def cmd_simulate(args, started):
    seed = args.seed if args.seed is not None else secrets.randbits(64)
    report = mc_risk(_spec(args, args.rho, seed))
    _emit(args, "simulate", _report_doc(report), seed, started)


def cmd_sweep(args, started):
    seed = args.seed if args.seed is not None else secrets.randbits(64)
    results = phase_sweep(_spec(args, args.rhos[0], seed), args.rhos)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for i, (rho, rep) in enumerate(results):
        writer.writerow([
            fmt_real(rho), args.selector, args.d, args.s, fmt_real(args.eps), fmt_real(args.sigma),
            args.reps, fmt_real(rep.mean_normalized_risk), fmt_real(rep.std_error), sweep_seed(seed, i),
        ])
    out = Path(args.out)
    digest = atomic_write(out, buf.getvalue())
    write_manifest(out, "sweep", _params(args), seed, {out.name: digest}, started)


def cmd_lower_bound(args, started):
    seed = args.seed if args.seed is not None else secrets.randbits(64)
    A, B, total = bayes_lower_bound(_space(args), args.d, args.s, args.eps, args.rho, args.reps, seed)
    doc = {"d": args.d, "s": args.s, "eps": args.eps, "rho": args.rho, "reps": args.reps, "seed": seed,
           "A_hat": A, "B_hat": B, "risk_lb_hat": total}
    _emit(args, "lower-bound", doc, seed, started)


def cmd_tails(args, started):
    seed = args.seed if args.seed is not None else secrets.randbits(64)
    profile = solve_extremal(_space(args), args.r, args.eps)
    rows = tail_check(profile, args.T, args.reps, seed)
    doc = {"K": profile.K, "reps": args.reps, "seed": seed,
           "rows": [{"T": r.T, "mc_tail": r.mc_tail, "bound": r.bound, "ratio": r.ratio} for r in rows]}
    _emit(args, "tails", doc, seed, started)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sparse-select", description="Adaptive variable selection laboratory.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("extremal", help="solve the extremal profile at radius r")
    _add_space(p, with_r=True)
    p.add_argument("--out")
    p.set_defaults(handler=cmd_extremal)

    p = sub.add_parser("boundary", help="detection boundary and threshold")
    _add_space(p)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--mode", choices=["almost-full", "exact"], required=True)
    p.add_argument("--delta", type=float)
    p.add_argument("--out")
    p.set_defaults(handler=cmd_boundary)

    p = sub.add_parser("simulate", help="Monte Carlo Hamming risk at one rho")
    _add_experiment(p)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--out")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("sweep", help="Monte Carlo Hamming risk over a list of rho, as CSV")
    _add_experiment(p)
    p.add_argument("--rhos", type=_reals, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("lower-bound", help="simulated Bayes lower bound on the risk")
    _add_space(p)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--reps", type=int, default=10_000)
    p.add_argument("--seed", type=_seed)
    p.add_argument("--out")
    p.set_defaults(handler=cmd_lower_bound)

    p = sub.add_parser("tails", help="null lower-tail probabilities against exp(-T^2/2)")
    _add_space(p, with_r=True)
    p.add_argument("--T", type=_reals, required=True, help="comma-separated nonpositive levels")
    p.add_argument("--reps", type=int, default=1_000_000)
    p.add_argument("--seed", type=_seed)
    p.add_argument("--out")
    p.set_defaults(handler=cmd_tails)
    return parser


def main(argv=None) -> int:
    started = time.perf_counter()
    try:
        args = build_parser().parse_args(argv)
        args.handler(args, started)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, DimensionError) as exc:
        print(f"sparse-select: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as exc:
        print(f"sparse-select: {exc}", file=sys.stderr)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    sys.exit(main())
