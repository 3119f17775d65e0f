"""Command-line front end.

Every command writes a table (CSV by default, or JSON) whose preamble records
the resolved parameters, seed and argv, so any artifact can be regenerated
with ``resetsearch replay FILE``.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import re
import sys
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__
from .eigen1d import (
    Params1D,
    eigenvalue_bounds_1d,
    mean_time_to_locate_1d,
    solve_lambda0,
    survival_asymptote_1d,
)
from .eigen_radial import ParamsRadial, eigenvalue_asymptote_radial, solve_lambda0_radial, survival_asymptote_radial
from .errors import ResetSearchError
from .mc import SimConfig, set_threads, simulate_survival_1d, simulate_survival_radial
from .speed import FrontModel, FrontSchedule, classify_schedule, default_log_t_grid, mc_survival_at
from .target import (
    SearchModel,
    TargetDistribution,
    laplace_bound_check,
    laplace_minimize,
    log_failure_probability,
    scaling_limit,
)

EXIT_USAGE = 2
EXIT_CODES = {"domain": 3, "convergence": 4, "pre-asymptotic": 5, "insufficient-samples": 6, "io": 7, "error": 1}

_GRID_RE = re.compile(r"^\s*([^:]+):([^:]+):(\d+)\s*\(?\s*(geom|lin)?\s*\)?\s*$")


class UsageError(Exception):
    pass


def parse_time_grid(text: str) -> list[float]:
    """Parse ``1,2,5`` or ``t0:t1:n`` / ``t0:t1:ngeom`` / ``t0:t1:n(geom)`` / ``t0:t1:nlin``."""
    m = _GRID_RE.match(text)
    try:
        if m:
            t0, t1, n = float(m.group(1)), float(m.group(2)), int(m.group(3))
            kind = m.group(4) or "geom"
            if n < 1 or t1 < t0:
                raise UsageError(f"bad grid {text!r}")
            if n == 1:
                return [t0]
            if kind == "geom":
                if t0 <= 0:
                    raise UsageError("geometric grids need t0 > 0")
                return [float(v) for v in np.geomspace(t0, t1, n)]
            return [float(v) for v in np.linspace(t0, t1, n)]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"bad time grid {text!r}: {exc}") from exc


def _fmt(v: Any) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    if v is None:
        return ""
    return str(v)


def _json_value(v: Any) -> Any:
    if isinstance(v, (np.floating, float)):
        f = float(v)
        return f if math.isfinite(f) else repr(f)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    return v


def render(meta: dict, columns: list[tuple[str, str]], rows: list[dict], fmt: str) -> str:
    """Serialise a result table. ``columns`` holds (name, unit) pairs."""
    names = [c for c, _ in columns]
    if fmt == "json":
        doc = {
            "meta": {**meta, "columns": [{"name": n, "unit": u} for n, u in columns]},
            "rows": [{k: _json_value(r[k]) for k in names} for r in rows],
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    buf = io.StringIO()
    for key in sorted(meta):
        buf.write(f"# {key}: {json.dumps(meta[key], sort_keys=True)}\n")
    buf.write(",".join(f"{n} [{u}]" for n, u in columns) + "\n")
    for r in rows:
        buf.write(",".join(_fmt(r[n]) for n in names) + "\n")
    return buf.getvalue()


# --------------------------------------------------------------------------- commands


def _cmd_eig1d(a):
    p = Params1D(a.D, a.r, a.a)
    sol = solve_lambda0(p, a.tol)
    lower, _ = eigenvalue_bounds_1d(p)
    try:
        met = mean_time_to_locate_1d(p)
    except OverflowError:
        met = math.inf
    cols = [("lambda0", "1/time"), ("q", "1/length"), ("M", "1"), ("residual", "1/time"),
            ("lambda0_lower_bound", "1/time"), ("log_lambda0", "log(1/time)"), ("mean_time_to_locate", "time")]
    row = dict(lambda0=sol.lambda0, q=sol.q, M=sol.prefactor_M, residual=sol.residual,
               lambda0_lower_bound=lower, log_lambda0=sol.log_lambda0, mean_time_to_locate=met)
    return cols, [row], {}


def _cmd_eig_radial(a):
    p = ParamsRadial(a.D, a.r, a.d, a.eps0, a.A)
    sol = solve_lambda0_radial(p, a.tol)
    cols = [("lambda0", "1/time"), ("q", "1/length"), ("M", "1"), ("residual", "1/time"),
            ("log_lambda0", "log(1/time)"), ("large_A_asymptote", "1/time")]
    row = dict(lambda0=sol.lambda0, q=sol.q, M=sol.prefactor_M, residual=sol.residual,
               log_lambda0=sol.log_lambda0, large_A_asymptote=eigenvalue_asymptote_radial(p))
    return cols, [row], {}


def _model_and_solution(a):
    if a.d == 1:
        p = Params1D(a.D, a.r, a.a)
        return p, solve_lambda0(p), survival_asymptote_1d
    p = ParamsRadial(a.D, a.r, a.d, a.eps0, a.a)
    return p, solve_lambda0_radial(p), survival_asymptote_radial


def _cmd_survival(a):
    p, sol, asym = _model_and_solution(a)
    cols = [("t", "time"), ("analytic_p", "1"), ("lambda0", "1/time"), ("M", "1")]
    rows = [dict(t=t, analytic_p=asym(p, sol, t), lambda0=sol.lambda0, M=sol.prefactor_M) for t in a.t]
    return cols, rows, {}


def _sim_config(a, ts):
    return SimConfig(n_trajectories=a.n, t_max=max(ts), dt=a.dt, seed=a.seed, antithetic=a.antithetic)


def _simulate(a, ts):
    cfg = _sim_config(a, ts)
    if a.d == 1:
        return simulate_survival_1d(Params1D(a.D, a.r, a.a), cfg, ts)
    return simulate_survival_radial(ParamsRadial(a.D, a.r, a.d, a.eps0, a.a), cfg, ts, scheme=a.scheme)


def _cmd_simulate(a):
    est = _simulate(a, a.t)
    cols = [("t", "time"), ("p_hat", "1"), ("half_width_95", "1"), ("n", "count")]
    rows = [dict(t=e.t, p_hat=e.p_hat, half_width_95=e.half_width_95, n=e.n) for e in est]
    return cols, rows, {}


def _cmd_compare(a):
    p, sol, asym = _model_and_solution(a)
    est = _simulate(a, a.t)
    cols = [("t", "time"), ("mc_p", "1"), ("mc_ci", "1"), ("analytic_p", "1"), ("ratio", "1")]
    rows = []
    for e in est:
        ap = asym(p, sol, e.t)
        rows.append(dict(t=e.t, mc_p=e.p_hat, mc_ci=e.half_width_95, analytic_p=ap, ratio=e.p_hat / ap))
    return cols, rows, {"lambda0": sol.lambda0, "M": sol.prefactor_M}


def _distribution(a):
    if a.dist == "gaussian":
        if a.sigma is None:
            raise UsageError("--dist gaussian needs --sigma")
        if a.l is not None and a.l != 2:
            raise UsageError("a Gaussian target has l = 2")
        return TargetDistribution.gaussian(a.sigma, a.d)
    if a.dist == "exponential":
        if a.B is None:
            raise UsageError("--dist exponential needs --B")
        if a.d != 1 or (a.l is not None and a.l != 1):
            raise UsageError("the two-sided exponential target is 1-d with l = 1")
        return TargetDistribution.two_sided_exponential(a.B)
    if a.B is None or a.l is None:
        raise UsageError("--dist stretched needs --B and --l")
    return TargetDistribution(a.B, a.l, a.d)


def _cmd_target_fail(a):
    dist = _distribution(a)
    model = SearchModel(a.D, a.r, a.d, a.eps0 if a.d >= 2 else None)
    limit = scaling_limit(dist, model)
    cols = [("t", "time"), ("log_failure", "log(1)"), ("failure", "1"), ("scaling_functional", "1"),
            ("scaling_limit", "1")]
    rows = []
    for t in a.t:
        lf = log_failure_probability(dist, model, t, a.quad_tol)
        rows.append(dict(t=t, log_failure=lf, failure=math.exp(lf),
                         scaling_functional=lf / math.log(t) ** dist.l, scaling_limit=limit))
    return cols, rows, {"B": dist.B, "l": dist.l}


def _cmd_laplace(a):
    cols = [("t", "1"), ("a_star", "length"), ("gamma_star", "1"), ("scaled_location", "1"),
            ("residual", "1"), ("lower_log", "1"), ("integral_log", "1"), ("upper_log", "1"),
            ("bracket_holds", "bool"), ("functional", "1"), ("functional_limit", "1")]
    rows = []
    for t in a.t:
        lp = laplace_minimize(a.B, a.l, a.kappa, a.R, t)
        bc = laplace_bound_check(a.B, a.l, a.kappa, a.R, t, a.eps, a.alpha)
        rows.append(dict(t=t, a_star=lp.a_star, gamma_star=lp.gamma_at_star, scaled_location=lp.scaled_location,
                         residual=lp.residual, lower_log=bc.lower_log, integral_log=bc.integral_log,
                         upper_log=bc.upper_log, bracket_holds=bc.holds,
                         functional=bc.integral_log / math.log(t) ** a.l, functional_limit=-a.B / a.kappa ** a.l))
    return cols, rows, {}


def _cmd_speed(a):
    model = FrontModel(a.D, a.r, a.d, a.eps0 if a.d >= 2 else None)
    c = model.front_speed
    if a.loglog is not None and a.loglog_front is not None:
        raise UsageError("give at most one of --loglog and --loglog-front")
    beta = a.loglog if a.loglog is not None else (a.loglog_front or 0.0) * c
    sched = FrontSchedule.log_combination(a.front_mult * c, beta, a.const)
    res = classify_schedule(sched, model, default_log_t_grid(a.log_t_max, a.n_grid))
    extra = {"regime": res.regime, "expected_limit": res.expected_limit}
    if a.mc_t is not None:
        est = mc_survival_at(sched, model, a.mc_t, n=a.n, seed=a.seed)
        extra.update(mc_t=a.mc_t, mc_p=est.p_hat, mc_ci=est.half_width_95)
    cols = [("log_t", "log(time)"), ("a_t", "length"), ("delta", "length"), ("delta_c", "length"),
            ("log_lambda_t", "log(1)"), ("regime", "label")]
    rows = [dict(log_t=L, a_t=x, delta=dl, delta_c=dc, log_lambda_t=g, regime=res.regime)
            for L, x, dl, dc, g in zip(res.log_t, res.a_t, res.delta, res.delta_c, res.log_lambda_t)]
    return cols, rows, extra


# --------------------------------------------------------------------------- parser


def _time_grid(text):
    try:
        return parse_time_grid(text)
    except UsageError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _add_common(sp):
    sp.add_argument("--format", choices=["csv", "json"], default="csv")
    sp.add_argument("--output", "-o", default="-", help="output file, '-' for stdout")


def _add_physics(sp, target="a"):
    sp.add_argument("--D", type=float, required=True, help="diffusion coefficient [length^2/time]")
    sp.add_argument("--r", type=float, required=True, help="resetting rate [1/time]")
    if target == "a":
        sp.add_argument("--a", type=float, required=True,
                        help="target position (d=1) or start/reset distance A (d>=2) [length]")
    sp.add_argument("--d", type=int, default=1, help="dimension")
    sp.add_argument("--eps0", type=float, default=None, help="target radius for d >= 2 [length]")


def _add_mc(sp):
    sp.add_argument("--n", type=int, default=100000, help="number of trajectories")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--dt", type=float, default=1e-3, help="radial time step [time]")
    sp.add_argument("--scheme", choices=["euler", "exact"], default="euler", help="radial scheme")
    sp.add_argument("--antithetic", action="store_true")


COMMANDS: dict[str, Callable] = {
    "eig1d": _cmd_eig1d,
    "eig-radial": _cmd_eig_radial,
    "survival": _cmd_survival,
    "simulate": _cmd_simulate,
    "compare": _cmd_compare,
    "target-fail": _cmd_target_fail,
    "laplace": _cmd_laplace,
    "speed-classify": _cmd_speed,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="resetsearch", description="Diffusive search with stochastic resetting.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("--threads", type=int, default=None, help="worker threads (default: RESETSEARCH_THREADS)")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("eig1d", help="1-d principal eigenvalue, prefactor and mean time to locate")
    sp.add_argument("--D", type=float, required=True)
    sp.add_argument("--r", type=float, required=True)
    sp.add_argument("--a", type=float, required=True)
    sp.add_argument("--tol", type=float, default=1e-14)
    _add_common(sp)

    sp = sub.add_parser("eig-radial", help="radial principal eigenvalue and prefactor, d >= 2")
    sp.add_argument("--D", type=float, required=True)
    sp.add_argument("--r", type=float, required=True)
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--eps0", type=float, required=True)
    sp.add_argument("--A", type=float, required=True)
    sp.add_argument("--tol", type=float, default=1e-14)
    _add_common(sp)

    sp = sub.add_parser("survival", help="large-t survival asymptote (1/M) exp(-lambda0 t)")
    _add_physics(sp)
    sp.add_argument("--t", type=_time_grid, required=True)
    _add_common(sp)

    for name, hlp in (("simulate", "Monte Carlo survival estimates"),
                      ("compare", "Monte Carlo against the analytic asymptote")):
        sp = sub.add_parser(name, help=hlp)
        _add_physics(sp)
        sp.add_argument("--t", type=_time_grid, required=True)
        _add_mc(sp)
        _add_common(sp)

    sp = sub.add_parser("target-fail", help="failure probability for a random target")
    sp.add_argument("--dist", choices=["gaussian", "exponential", "stretched"], required=True)
    sp.add_argument("--sigma", type=float, default=None)
    sp.add_argument("--B", type=float, default=None)
    sp.add_argument("--l", type=float, default=None)
    _add_physics(sp, target=None)
    sp.add_argument("--t", type=_time_grid, required=True)
    sp.add_argument("--quad-tol", type=float, default=1e-8)
    _add_common(sp)

    sp = sub.add_parser("laplace", help="minimiser of gamma_t and the integral bounds")
    for k in ("B", "l", "kappa", "R"):
        sp.add_argument(f"--{k}", type=float, required=True)
    sp.add_argument("--t", type=_time_grid, required=True)
    sp.add_argument("--eps", type=float, default=0.1)
    sp.add_argument("--alpha", type=float, default=1.0)
    _add_common(sp)

    sp = sub.add_parser("speed-classify", help="classify a_t = m c log t + beta log log t + k")
    _add_physics(sp, target=None)
    sp.add_argument("--front-mult", type=float, default=1.0, help="m, in units of the front speed c")
    sp.add_argument("--loglog", type=float, default=None, help="beta in length units")
    sp.add_argument("--loglog-front", type=float, default=None, help="beta in units of c")
    sp.add_argument("--const", type=float, default=0.0, help="k [length]")
    sp.add_argument("--log-t-max", type=float, default=1e8)
    sp.add_argument("--n-grid", type=int, default=80)
    sp.add_argument("--mc-t", type=float, default=None, help="also run 1-d Monte Carlo at this t")
    sp.add_argument("--n", type=int, default=10000)
    sp.add_argument("--seed", type=int, default=0)
    _add_common(sp)

    sp = sub.add_parser("replay", help="re-run the computation recorded in an artifact")
    sp.add_argument("artifact")
    sp.add_argument("--check", action="store_true", help="exit 1 unless the output is byte-identical")
    sp.add_argument("--output", "-o", default="-")
    return ap


def _resolved(args) -> dict:
    skip = {"command", "output", "format", "threads"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _emit(text: str, path: str):
    if path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def read_meta(path: str) -> dict:
    """Recover the metadata block of a CSV or JSON artifact."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        return json.loads(text)["meta"]
    meta = {}
    for line in text.splitlines():
        if not line.startswith("# "):
            break
        key, _, val = line[2:].partition(": ")
        meta[key] = json.loads(val)
    return meta


def run(argv: Sequence[str]) -> tuple[int, str]:
    """Execute one command; returns (exit status, rendered artifact)."""
    args = build_parser().parse_args(list(argv))
    set_threads(args.threads)
    if args.command == "replay":
        meta = read_meta(args.artifact)
        status, text = run(meta["argv"])
        if args.check:
            with open(args.artifact, encoding="utf-8") as fh:
                same = fh.read() == text
            return (0 if same and status == 0 else 1), text
        return status, text
    if getattr(args, "d", 1) >= 2 and getattr(args, "eps0", 0) is None:
        raise UsageError("--eps0 is required for d >= 2")
    cols, rows, extra = COMMANDS[args.command](args)
    replay_argv = [a for a in argv]
    out_idx = [i for i, a in enumerate(replay_argv) if a in ("--output", "-o")]
    for i in reversed(out_idx):
        del replay_argv[i:i + 2]
    meta = {
        "command": args.command,
        "params": _resolved(args),
        "seed": getattr(args, "seed", None),
        "argv": replay_argv,
        "version": __version__,
        **({"results": {k: _json_value(v) for k, v in extra.items()}} if extra else {}),
    }
    return 0, render(meta, cols, rows, args.format)


def main(argv: Sequence[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        status, text = run(argv)
        out = "-"
        if "--output" in argv or "-o" in argv:
            idx = max(i for i, a in enumerate(argv) if a in ("--output", "-o"))
            out = argv[idx + 1]
        _emit(text, out)
        return status
    except SystemExit as exc:  # argparse usage errors and --help
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    except UsageError as exc:
        sys.stderr.write(json.dumps({"error": "usage", "message": str(exc)}) + "\n")
        return EXIT_USAGE
    except ResetSearchError as exc:
        sys.stderr.write(json.dumps({"error": exc.category, "message": str(exc)}) + "\n")
        return EXIT_CODES.get(exc.category, 1)
    except OSError as exc:
        sys.stderr.write(json.dumps({"error": "io", "message": str(exc)}) + "\n")
        return EXIT_CODES["io"]


if __name__ == "__main__":
    sys.exit(main())
