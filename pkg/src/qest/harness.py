"""Experiment runner: scheme dispatch, reproducible reductions, file output.

A run is fully determined by (spec, seed): Monte Carlo trials draw from
counter-based per-block streams, and block results merge in index order, so
the worker count never changes the numbers. Timing is therefore excluded
from the default CSV (it would break byte-for-byte reproducibility) and is
available in the JSON output instead.
"""
from __future__ import annotations

import io
import json
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from . import __version__, mc
from .collective import collective_fidelity
from .core import FidelityResult, Method, Mode
from .local_adaptive import (
    greedy_fidelity_mc,
    greedy_run,
    locc_optimize,
    one_step_adaptive,
)
from .local_fixed import (
    FixedScheme,
    Rule,
    SchemeKind,
    fixed_scheme_fidelity,
    isotropic_2d_fidelity,
    random_scheme_fidelity,
)

GREEDY_EXACT_MAX = 16

SCHEMES = (
    "collective2d",
    "collective3d",
    "tomo2d",
    "tomo3d",
    "iso2d",
    "rand3d",
    "greedy2d",
    "greedy3d",
    "locc2d",
    "locc3d",
    "osa3d",
)


class UsageError(ValueError):
    """Bad experiment description (unknown scheme, invalid parameters)."""


@dataclass(frozen=True)
class ExperimentSpec:
    scheme: str
    Ns: Tuple[int, ...]
    rule: Optional[str] = None
    trials: int = 100_000
    seed: int = 0
    workers: Optional[int] = None
    method: str = "auto"  # auto | exact | mc
    params: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise UsageError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if self.method not in ("auto", "exact", "mc"):
            raise UsageError(f"unknown method {self.method!r}")
        if not self.Ns:
            raise UsageError("no copy counts given")


@dataclass(frozen=True)
class ResultRow:
    scheme: str
    N: int
    rule: str
    F: float
    delta: float
    epsilon_n: float
    stderr: float
    method: str
    trials: int
    seed: int
    wall_ms: float


CSV_COLUMNS = (
    "scheme", "N", "rule", "F", "delta", "epsilonN", "stderr", "method", "trials", "seed",
)


def _row(spec: ExperimentSpec, N: int, res: FidelityResult, wall_ms: float) -> ResultRow:
    return ResultRow(
        scheme=spec.scheme,
        N=N,
        rule=spec.rule or "og",
        F=res.F,
        delta=res.delta,
        epsilon_n=res.epsilon_n,
        stderr=res.stderr,
        method=res.method.value,
        trials=res.trials,
        seed=spec.seed,
        wall_ms=wall_ms,
    )


def _compute(spec: ExperimentSpec, N: int) -> FidelityResult:
    scheme = spec.scheme
    force_mc = spec.method == "mc"
    if scheme == "collective2d":
        return FidelityResult(F=collective_fidelity(Mode.PLANAR_2D, N), N=N, method=Method.CLOSED_FORM)
    if scheme == "collective3d":
        return FidelityResult(F=collective_fidelity(Mode.FULL_3D, N), N=N, method=Method.CLOSED_FORM)
    if scheme in ("tomo2d", "tomo3d"):
        kind = SchemeKind.TOMOGRAPHY_2D if scheme == "tomo2d" else SchemeKind.TOMOGRAPHY_3D
        rule = Rule(spec.rule or "og")
        return fixed_scheme_fidelity(
            FixedScheme(kind, N), rule, trials=spec.trials, seed=spec.seed,
            workers=spec.workers, force_mc=force_mc,
        )
    if scheme == "iso2d":
        return isotropic_2d_fidelity(
            N, trials=spec.trials, seed=spec.seed, workers=spec.workers, force_mc=force_mc
        )
    if scheme == "rand3d":
        return random_scheme_fidelity(N, spec.trials, spec.seed, spec.workers)
    if scheme in ("greedy2d", "greedy3d"):
        mode = Mode.PLANAR_2D if scheme == "greedy2d" else Mode.FULL_3D
        if not force_mc and N <= GREEDY_EXACT_MAX:
            _, res = greedy_run(N, mode, policy_depth=0)
            return res
        return greedy_fidelity_mc(N, mode, trials=spec.trials, seed=spec.seed, workers=spec.workers)
    if scheme in ("locc2d", "locc3d"):
        mode = Mode.PLANAR_2D if scheme == "locc2d" else Mode.FULL_3D
        restarts = int(spec.params.get("restarts", 8))
        sol = locc_optimize(N, mode, restarts=restarts, seed=spec.seed)
        return FidelityResult(F=sol.F, N=N, method=Method.QUADRATURE, seed=spec.seed)
    if scheme == "osa3d":
        return one_step_adaptive(
            N, a=float(spec.params.get("a", 0.5)), lam=float(spec.params.get("lam", 1.0)),
            trials=spec.trials, seed=spec.seed, workers=spec.workers,
        )
    raise UsageError(f"unknown scheme {scheme!r}")


def run_experiment(spec: ExperimentSpec) -> List[ResultRow]:
    rows = []
    for N in spec.Ns:
        t0 = time.perf_counter()
        res = _compute(spec, N)
        rows.append(_row(spec, N, res, wall_ms=1000.0 * (time.perf_counter() - t0)))
    return rows


def mc_reduce(partials: Sequence[mc.Partial], N: int, method: Method = Method.MONTE_CARLO) -> FidelityResult:
    """Merge per-stream accumulators into one result; order independent."""
    count, mean, stderr = mc.pool_partials(partials)
    seed = partials[0].seed
    return FidelityResult(F=mean, N=N, method=method, stderr=stderr, trials=count, seed=seed)


# ---------------------------------------------------------------------------
# output formats


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".12g")
    return str(value)


def rows_to_csv(rows: Sequence[ResultRow], include_timing: bool = False) -> str:
    cols = CSV_COLUMNS + (("wallTimeMs",) if include_timing else ())
    buf = io.StringIO()
    buf.write(",".join(cols) + "\n")
    for r in rows:
        vals = [r.scheme, r.N, r.rule, r.F, r.delta, r.epsilon_n, r.stderr,
                r.method, r.trials, r.seed]
        if include_timing:
            vals.append(r.wall_ms)
        buf.write(",".join(_fmt(v) for v in vals) + "\n")
    return buf.getvalue()


def rows_to_json(rows: Sequence[ResultRow], spec: Optional[ExperimentSpec] = None) -> str:
    payload = {
        "library_version": __version__,
        "spec": None
        if spec is None
        else {
            "scheme": spec.scheme,
            "Ns": list(spec.Ns),
            "rule": spec.rule,
            "trials": spec.trials,
            "seed": spec.seed,
            "method": spec.method,
            "params": dict(spec.params),
        },
        "results": [
            {
                "scheme": r.scheme,
                "N": r.N,
                "rule": r.rule,
                "F": r.F,
                "delta": r.delta,
                "epsilonN": r.epsilon_n,
                "stderr": r.stderr,
                "method": r.method,
                "trials": r.trials,
                "seed": r.seed,
                "wallTimeMs": r.wall_ms,
            }
            for r in rows
        ],
    }
    return json.dumps(payload, indent=2)


# ---------------------------------------------------------------------------
# figure data

FIGURES = ("fig1", "fig2", "fig3", "fig4")

_FIG_LAYOUT = {
    "fig1": (tuple(range(10, 61, 10)), ("collective2d", "tomo2d:og", "tomo2d:clg", "greedy2d")),
    "fig2": (tuple(range(10, 61, 10)), ("collective2d", "tomo2d:og", "tomo2d:clg", "greedy2d")),
    "fig3": (tuple(range(12, 61, 12)), ("collective3d", "tomo3d:og", "tomo3d:clg", "greedy3d")),
    "fig4": ((30, 60, 120, 240), ("collective3d", "tomo3d:og", "rand3d")),
}

FIG4_EXACT_TOMO_MAX = 135


def emit_figure_data(
    figure: str, trials: int = 20_000, seed: int = 0, workers: Optional[int] = None
) -> List[ResultRow]:
    """Rows for one figure: one row per (N, curve)."""
    if figure not in FIGURES:
        raise UsageError(f"unknown figure {figure!r}; choose from {FIGURES}")
    Ns, curves = _FIG_LAYOUT[figure]
    rows: List[ResultRow] = []
    for curve in curves:
        scheme, _, rule = curve.partition(":")
        for N in Ns:
            if scheme.startswith("tomo"):
                axes = 2 if scheme == "tomo2d" else 3
                if N % axes:
                    continue
            method = "auto"
            if figure == "fig4" and scheme == "tomo3d" and N > FIG4_EXACT_TOMO_MAX:
                method = "mc"
            spec = ExperimentSpec(
                scheme=scheme, Ns=(N,), rule=rule or None, trials=trials, seed=seed,
                workers=workers, method=method,
            )
            rows.extend(run_experiment(spec))
    return rows
