"""Command line interface.

Subcommands mirror the library: closed-form bounds, scheme simulation,
greedy and history-aware optimization, the one-step adaptive scheme,
asymptotic cross-checks, and figure-data export. Exit codes: 0 success,
2 usage error, 3 numerical non-convergence.
"""
from __future__ import annotations

import argparse
import sys
from typing import List, Optional, Tuple

from . import __version__
from .asymptotics import (
    average_trace_h_over_i_tomography,
    cramer_rao_fidelity,
    finite_diff_hessian_check,
    fisher_2d_von_neumann,
    fisher_random_3d,
    hessian_fidelity,
)
from .core import Mode
from .harness import (
    FIGURES,
    SCHEMES,
    ExperimentSpec,
    UsageError,
    emit_figure_data,
    rows_to_csv,
    rows_to_json,
    run_experiment,
)
from .local_adaptive import greedy_run, locc_optimize

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NO_CONVERGENCE = 3


def parse_n_list(text: str) -> Tuple[int, ...]:
    """Copy counts: '12', '1,2,5', '10..60' or '10..60:10'."""
    out: List[int] = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            span, _, step = part.partition(":")
            lo, _, hi = span.partition("..")
            out.extend(range(int(lo), int(hi) + 1, int(step) if step else 1))
        else:
            out.append(int(part))
    if not out or min(out) < 1:
        raise ValueError(f"invalid copy-count list: {text!r}")
    return tuple(out)


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=0, help="reproducibility seed")
    p.add_argument("--workers", type=int, default=None, help="parallel workers (default: env or 1)")
    p.add_argument("--out", type=str, default=None, help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--timing", action="store_true",
                   help="include wall time in CSV (breaks byte-level reproducibility)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qest", description=__doc__)
    ap.add_argument("--version", action="version", version=f"qest {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bounds", help="closed-form collective bounds")
    p.add_argument("--mode", choices=("2d", "3d", "both"), default="both")
    p.add_argument("--n", type=parse_n_list, default=parse_n_list("1..20"))
    _add_common(p)

    p = sub.add_parser("simulate", help="fixed and adaptive scheme fidelities")
    p.add_argument("--scheme", choices=SCHEMES, required=True)
    p.add_argument("--rule", choices=("clg", "og"), default=None)
    p.add_argument("--n", type=parse_n_list, required=True)
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--method", choices=("auto", "exact", "mc"), default="auto")
    _add_common(p)

    p = sub.add_parser("greedy", help="exact greedy policy and fidelity")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--mode", choices=("2d", "3d"), default="3d")
    p.add_argument("--trials", type=int, default=0,
                   help="0: exact enumeration; otherwise Monte Carlo trials")
    p.add_argument("--export-policy", type=str, default=None,
                   help="write the outcome-indexed axes as JSON")
    _add_common(p)

    p = sub.add_parser("locc-opt", help="optimize all history-dependent axes")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--mode", choices=("2d", "3d"), default="3d")
    p.add_argument("--restarts", type=int, default=8)
    _add_common(p)

    p = sub.add_parser("osa", help="one-step adaptive scheme")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--a", type=float, default=0.5)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--trials", type=int, default=100_000)
    _add_common(p)

    p = sub.add_parser("asymptotics", help="closed-form vs numeric asymptotic checks")
    p.add_argument("--check", choices=("traceHI", "random-fisher", "hessians", "cr-bounds", "all"),
                   default="all")
    _add_common(p)

    p = sub.add_parser("figure", help="figure data export")
    p.add_argument("--which", choices=FIGURES, required=True)
    p.add_argument("--trials", type=int, default=20_000)
    _add_common(p)
    return ap


def _emit(args, rows, spec=None) -> None:
    if args.format == "json":
        text = rows_to_json(rows, spec)
    else:
        text = rows_to_csv(rows, include_timing=getattr(args, "timing", False))
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_bounds(args) -> int:
    rows = []
    if args.mode in ("2d", "both"):
        rows += run_experiment(ExperimentSpec("collective2d", args.n, seed=args.seed))
    if args.mode in ("3d", "both"):
        rows += run_experiment(ExperimentSpec("collective3d", args.n, seed=args.seed))
    _emit(args, rows)
    return EXIT_OK


def _cmd_simulate(args) -> int:
    spec = ExperimentSpec(
        scheme=args.scheme, Ns=args.n, rule=args.rule, trials=args.trials,
        seed=args.seed, workers=args.workers, method=args.method,
    )
    _emit(args, run_experiment(spec), spec)
    return EXIT_OK


def _cmd_greedy(args) -> int:
    mode = Mode.PLANAR_2D if args.mode == "2d" else Mode.FULL_3D
    scheme = "greedy2d" if args.mode == "2d" else "greedy3d"
    if args.trials:
        spec = ExperimentSpec(scheme, (args.n,), trials=args.trials, seed=args.seed,
                              workers=args.workers, method="mc")
        _emit(args, run_experiment(spec), spec)
        return EXIT_OK
    policy, _ = greedy_run(args.n, mode)
    if args.export_policy:
        with open(args.export_policy, "w") as fh:
            fh.write(policy.to_json())
    spec = ExperimentSpec(scheme, (args.n,), seed=args.seed, method="exact")
    _emit(args, run_experiment(spec), spec)
    return EXIT_OK


def _cmd_locc(args) -> int:
    mode = Mode.PLANAR_2D if args.mode == "2d" else Mode.FULL_3D
    sol = locc_optimize(args.n, mode, restarts=args.restarts, seed=args.seed)
    lines = [f"N={args.n} mode={args.mode} F={sol.F:.10f} converged={sol.converged}"]
    if sol.angle_params:
        ang = sol.angle_params
        lines.append(
            "angle fit: alpha=%.4f beta=%.4f gamma=%.4f (family F=%.6f)"
            % (ang["alpha"], ang["beta"], ang["gamma"], ang["F"])
        )
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if sol.converged else EXIT_NO_CONVERGENCE


def _cmd_osa(args) -> int:
    spec = ExperimentSpec("osa3d", (args.n,), trials=args.trials, seed=args.seed,
                          workers=args.workers, params={"a": args.a, "lam": args.lam})
    _emit(args, run_experiment(spec), spec)
    return EXIT_OK


def _cmd_asymptotics(args) -> int:
    checks = []
    which = args.check
    if which in ("traceHI", "all"):
        val = average_trace_h_over_i_tomography()
        checks.append(("traceHI", val, -13.0 / 18.0))
    if which in ("random-fisher", "all"):
        I = fisher_random_3d().matrix
        checks.append(("random-fisher-vv", I[0, 0], 0.5))
        checks.append(("random-fisher-phph", I[1, 1], 0.5))
        checks.append(("random-fisher-offdiag", I[0, 1], 0.0))
    if which in ("hessians", "all"):
        checks.append(("hessian-2d", finite_diff_hessian_check(Mode.PLANAR_2D, 0.7), 0.0))
        checks.append(("hessian-3d", finite_diff_hessian_check(Mode.FULL_3D, (1.0, 0.4)), 0.0))
    if which in ("cr-bounds", "all"):
        from .asymptotics import FisherMatrix

        f2 = fisher_2d_von_neumann(0.3, 1.1)
        cr2 = cramer_rao_fidelity(
            FisherMatrix(matrix=[[f2]], parameterization="theta"),
            hessian_fidelity(Mode.PLANAR_2D, 0.0), n_repeats=100,
        )
        checks.append(("cr-2d-N100", cr2, 1.0 - 1.0 / 400.0))
        crr = cramer_rao_fidelity(
            fisher_random_3d(), hessian_fidelity(Mode.FULL_3D, (0.0,), "v_phi"),
            n_repeats=100,
        )
        checks.append(("cr-random-N100", crr, 1.0 - 1.0 / 100.0))
    lines = ["check,numeric,closed_form,abs_diff"]
    for name, num, closed in checks:
        lines.append("%s,%.12g,%.12g,%.3g" % (name, num, closed, abs(num - closed)))
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_figure(args) -> int:
    rows = emit_figure_data(args.which, trials=args.trials, seed=args.seed, workers=args.workers)
    _emit(args, rows)
    return EXIT_OK


_COMMANDS = {
    "bounds": _cmd_bounds,
    "simulate": _cmd_simulate,
    "greedy": _cmd_greedy,
    "locc-opt": _cmd_locc,
    "osa": _cmd_osa,
    "asymptotics": _cmd_asymptotics,
    "figure": _cmd_figure,
}


def main(argv: Optional[List[str]] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except ValueError as exc:  # bad --n parse
        ap.exit(EXIT_USAGE, f"error: {exc}\n")
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
