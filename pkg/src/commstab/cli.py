"""Command-line front end.

Exit codes: 0 success, 1 bad input (config, range, not an equilibrium),
2 numerical failure (early collapse in ``simulate``, failed check in ``verify``).
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from concurrent.futures import ProcessPoolExecutor

from . import verify as verify_mod
from .config import ConfigError, RunConfig, load_config
from .dynamics import STATE_INVALID, InitialConditionError, integrate, linear_coefficients
from .equilibrium import FULL, GAPPED, best_response_audit, equilibrium_ld, is_equilibrium
from .model import InvalidParamsError
from .stability import NotEquilibriumError, classify, envelope_constant
from .svg import line_chart

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NUMERIC = 2

SWEEP_PARAMS = ("big_l", "n_comm", "c", "a", "f0", "g0", "ep", "eq")
SWEEP_HEADER = ("param_value", "verdict", "k", "m", "b0", "lambda_plus", "limit_utility")


class _Parser(argparse.ArgumentParser):
    # usage errors are input errors, keep exit code 2 for numerical failures
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _fail(message, code=EXIT_INPUT):
    print(f"error: {message}", file=sys.stderr)
    return code


def _config(args) -> RunConfig:
    if not getattr(args, "config", None):
        raise ConfigError("this command needs --config <path>")
    return load_config(args.config)


def cmd_check_eq(args) -> int:
    cfg = _config(args)
    spec = cfg.spec()
    lstar = equilibrium_ld(spec.params)
    ne = is_equilibrium(spec)
    print(f"structure: {spec.kind}, L_C={spec.lc!r}, l_d={spec.ld!r}, N={spec.params.n_comm}")
    print(f"l*_d: {lstar!r}")
    if ne:
        print(f"NE: yes ({spec.kind}), l*_d={lstar:.12g}")
    else:
        if spec.kind == GAPPED:
            why = f"l_d = {spec.ld!r} differs from l*_d"
        else:
            why = f"L_C = {spec.lc!r} exceeds l*_d"
        print(f"NE: no ({spec.kind}, {why}), l*_d={lstar:.12g}")
    audit = best_response_audit(spec, n_samples=args.samples)
    print(f"audit: is_ne={'true' if audit.is_ne else 'false'} worst_violation={audit.worst_violation!r} "
          f"consumers={audit.n_consumers} producers={audit.n_producers}")
    for coord, move, gain in audit.witnesses:
        print(f"witness: agent at {coord!r}: {move}, gain {gain!r}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _config(args)
    spec = cfg.spec()
    try:
        traj = integrate(cfg.initial(), spec, dt=cfg.dt, t_max=cfg.t_max, eps_converged=cfg.eps_converged,
                         sample_stride=cfg.sample_stride, enforce_initial=not args.no_enforce_initial)
    except InitialConditionError as exc:
        return _fail(f"{exc} (pass --no-enforce-initial to run anyway)")
    text = traj.to_csv()
    if args.out and args.out != "-":
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.svg:
        series = {name: traj.column(name) for name in ("delta_dl", "delta_dr", "delta_sl", "delta_sr")}
        title = f"{spec.kind} structure, L_C={spec.lc:.4g}, l_d={spec.ld:.4g}"
        with open(args.svg, "w", encoding="utf-8") as fh:
            fh.write(line_chart(traj.t, series, title=title, y_label="perturbation"))
    summary = f"termination: {traj.termination} at t={float(traj.t[-1])!r} after {len(traj)} samples"
    print(summary, file=sys.stderr)
    if traj.termination == STATE_INVALID:
        print(f"diagnostic: {traj.message}", file=sys.stderr)
        if float(traj.t[-1]) < 1.0:
            return _fail("a community collapsed before t=1", EXIT_NUMERIC)
    return EXIT_OK


def cmd_classify(args) -> int:
    cfg = _config(args)
    spec = cfg.spec()
    try:
        verdict = classify(spec, cfg.probe_delta, cfg.integrator(), workers=args.workers)
    except NotEquilibriumError as exc:
        return _fail(str(exc))
    except ValueError as exc:
        return _fail(f"invalid probe: {exc}")
    sys.stdout.write(verdict.to_report())
    return EXIT_OK


def sweep_values(param, lo, hi, steps):
    """Grid of ``steps`` points from ``lo`` to ``hi``; integer parameters are rounded and deduplicated."""
    if param not in SWEEP_PARAMS:
        raise ValueError(f"--param must be one of {', '.join(SWEEP_PARAMS)}")
    if steps < 2:
        raise ValueError("--steps must be >= 2")
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo == hi:
        raise ValueError("--from and --to must be finite and distinct")
    values = [lo + (hi - lo) * i / (steps - 1) for i in range(steps)]
    values[-1] = hi
    if param == "n_comm":
        seen = []
        for v in values:
            n = int(round(v))
            if n not in seen:
                seen.append(n)
        if any(n < 2 for n in seen):
            raise ValueError("n_comm must stay >= 2 over the sweep")
        return seen
    return values


def _sweep_point(job):
    cfg, workers = job
    try:
        spec = cfg.spec()
    except (InvalidParamsError, ValueError) as exc:
        return ("invalid", None, None, None, None, None, str(exc))
    if not is_equilibrium(spec):
        return ("not-equilibrium", None, None, None, None, None, "")
    k = m = b0 = lam = limit = None
    if spec.kind == FULL:
        system = linear_coefficients(spec)
        k, m, lam = system.k_const, system.m_const, system.eigenvalues[0]
    else:
        b0 = envelope_constant(spec)
    probe = cfg.probe_delta
    try:
        verdict = classify(spec, probe, cfg.integrator(), workers=workers)
    except ValueError:
        # configured probe not admissible at this grid point
        verdict = classify(spec, None, cfg.integrator(), workers=workers)
    if verdict.limit_utilities is not None:
        limit = verdict.limit_utilities[0]
    return (verdict.verdict, k, m, b0, lam, limit, "")


def cmd_sweep(args) -> int:
    cfg = _config(args)
    try:
        values = sweep_values(args.param, args.lo, args.hi, args.steps)
    except ValueError as exc:
        return _fail(f"invalid range: {exc}")
    jobs = [(cfg.replace(**{args.param: v}), 1) for v in values]
    if args.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            rows = list(pool.map(_sweep_point, jobs))
    else:
        rows = [_sweep_point(job) for job in jobs]

    def fmt(v):
        if v is None:
            return ""
        return str(v) if isinstance(v, (int, str)) else repr(float(v))

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_HEADER)
    for value, row in zip(values, rows):
        writer.writerow([fmt(value)] + [fmt(x) for x in row[:6]])
        if row[6]:
            print(f"diagnostic: {args.param}={value!r}: {row[6]}", file=sys.stderr)
    if args.out and args.out != "-":
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = load_config(args.config) if getattr(args, "config", None) else None
    results = verify_mod.run_verification(cfg, dt=args.dt)
    failed = 0
    for set_name, checks in results:
        for r in checks:
            print(f"[{set_name}] {r.line()}")
            failed += r.status == verify_mod.FAIL
    print(f"{failed} check(s) failed" if failed else "all checks passed")
    return EXIT_NUMERIC if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="commstab", description="Stability of community structures on a content torus.")
    parser.add_argument("--config", help="run configuration (key = value lines)")
    # the same flag after the subcommand; SUPPRESS keeps it from hiding the global one
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="run configuration (key = value lines)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("check-eq", parents=[common], help="check the Nash-equilibrium conditions")
    p.add_argument("--samples", type=int, default=2000, help="agents sampled by the best-response audit")
    p.set_defaults(func=cmd_check_eq)

    p = sub.add_parser("simulate", parents=[common], help="integrate the boundary dynamics")
    p.add_argument("--out", default="-", help="trajectory CSV path (default stdout)")
    p.add_argument("--svg", help="also write a line chart of the four perturbations")
    p.add_argument("--no-enforce-initial", action="store_true",
                   help="allow initial perturbations outside the model's constraints")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("classify", parents=[common], help="classify the equilibrium's stability")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("sweep", parents=[common], help="classify over a parameter grid")
    p.add_argument("--param", required=True, help=f"one of {', '.join(SWEEP_PARAMS)}")
    p.add_argument("--from", dest="lo", type=float, required=True)
    p.add_argument("--to", dest="hi", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--out", default="-", help="CSV path (default stdout)")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", parents=[common], help="run the oracle and invariant checks")
    p.add_argument("--dt", type=float, default=None, help="integrator step (default 1e-3 or the config's)")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
