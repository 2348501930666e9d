"""Fixed (non-adaptive) local von Neumann schemes.

Tomography measures along 2 (equatorial) or 3 (full sphere) orthogonal
axes and estimates either directly from outcome frequencies (CLG) or from
the posterior moment (OG). The isotropic equatorial scheme spreads axes at
angles k*pi/N; the random scheme draws fresh isotropic axes every run.
Outcome spaces small enough to enumerate are summed exactly with the
shared quadrature grids; everything else falls back to Monte Carlo.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from . import mc
from ._kernels import random_scheme_run
from .core import (
    FidelityResult,
    Guess,
    Method,
    Mode,
    quadrature_grid,
    sample_prior,
    tie_break_axis,
    unit_vector,
)

ENUM_LIMIT = 2_000_000
DEFAULT_MC_TRIALS = 100_000

_AXIS_VECS = {
    "x": np.array([1.0, 0.0, 0.0]),
    "y": np.array([0.0, 1.0, 0.0]),
    "z": np.array([0.0, 0.0, 1.0]),
}


class Rule(enum.Enum):
    CLG = "clg"
    OG = "og"


class SchemeKind(enum.Enum):
    TOMOGRAPHY_2D = "tomo2d"
    TOMOGRAPHY_3D = "tomo3d"
    ISOTROPIC_2D = "iso2d"
    RANDOM_3D = "rand3d"


@dataclass(frozen=True)
class FixedScheme:
    kind: SchemeKind
    N: int

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.kind is SchemeKind.TOMOGRAPHY_2D and self.N % 2:
            raise ValueError("2D tomography needs N divisible by 2")
        if self.kind is SchemeKind.TOMOGRAPHY_3D and self.N % 3:
            raise ValueError("3D tomography needs N divisible by 3")

    @property
    def mode(self) -> Mode:
        if self.kind in (SchemeKind.TOMOGRAPHY_2D, SchemeKind.ISOTROPIC_2D):
            return Mode.PLANAR_2D
        return Mode.FULL_3D

    @property
    def axis_labels(self) -> Tuple[str, ...]:
        if self.kind is SchemeKind.TOMOGRAPHY_2D:
            return ("x", "y")
        if self.kind is SchemeKind.TOMOGRAPHY_3D:
            return ("x", "y", "z")
        raise ValueError(f"{self.kind} has no fixed axis set")

    @property
    def reps(self) -> int:
        return self.N // len(self.axis_labels)


@dataclass(frozen=True)
class OutcomeCounts:
    """Plus-outcome fractions per axis for a repeated fixed measurement."""

    labels: Tuple[str, ...]
    alphas: Tuple[float, ...]
    reps: Tuple[int, ...]

    def __post_init__(self):
        if not (len(self.labels) == len(self.alphas) == len(self.reps)):
            raise ValueError("per-axis fields must have equal length")
        for a, r in zip(self.alphas, self.reps):
            if not 0.0 <= a <= 1.0:
                raise ValueError(f"alpha out of range: {a}")
            if abs(a * r - round(a * r)) > 1e-9:
                raise ValueError(f"alpha*reps must be an integer, got {a} * {r}")

    @property
    def plus_counts(self) -> Tuple[int, ...]:
        return tuple(int(round(a * r)) for a, r in zip(self.alphas, self.reps))


def tomography_outcome_prob(scheme: FixedScheme, counts: OutcomeCounts, n) -> float:
    """Probability of observing the given per-axis frequencies for state n."""
    if counts.labels != scheme.axis_labels:
        raise ValueError(f"counts axes {counts.labels} do not match scheme {scheme.axis_labels}")
    n = unit_vector(n, scheme.mode)
    p = 1.0
    for lab, k, r in zip(counts.labels, counts.plus_counts, counts.reps):
        ni = float(n @ _AXIS_VECS[lab])
        p *= math.comb(r, k) * ((1.0 + ni) / 2.0) ** k * ((1.0 - ni) / 2.0) ** (r - k)
    return p


def clg_guess(counts: OutcomeCounts) -> Guess:
    """Frequency estimator: components proportional to 2*alpha - 1, unit normalized."""
    vec = np.zeros(3)
    for lab, a in zip(counts.labels, counts.alphas):
        vec += (2.0 * a - 1.0) * _AXIS_VECS[lab]
    nrm = float(np.linalg.norm(vec))
    mode = Mode.PLANAR_2D if "z" not in counts.labels else Mode.FULL_3D
    if nrm < 1e-12:
        return Guess(tie_break_axis(mode), True)
    return Guess(vec / nrm, False)


# ---------------------------------------------------------------------------
# exact enumeration


def _power_tables(scheme: FixedScheme, nodes: np.ndarray):
    """Binomial outcome weights per axis and count at every quadrature node."""
    reps = scheme.reps
    tables = []
    for lab in scheme.axis_labels:
        x = nodes @ _AXIS_VECS[lab]
        p, q = (1.0 + x) / 2.0, (1.0 - x) / 2.0
        t = np.empty((reps + 1, len(x)))
        for k in range(reps + 1):
            t[k] = math.comb(reps, k) * p**k * q ** (reps - k)
        tables.append(t)
    return tables


def _tomography_moment_tensor(scheme: FixedScheme):
    """V[counts..., 3]: posterior first moment for every count vector."""
    nodes, w = quadrature_grid(scheme.mode, scheme.N + 1)
    tables = _power_tables(scheme, nodes)
    wn = w[:, None] * nodes
    reps = scheme.reps
    if len(tables) == 2:
        return np.einsum("as,bs,sj->abj", tables[0], tables[1], wn)
    V = np.empty((reps + 1, reps + 1, reps + 1, 3))
    for a in range(reps + 1):
        blk = tables[0][a][None, None, :] * tables[1][:, None, :] * tables[2][None, :, :]
        V[a] = blk @ wn
    return V


def _clg_grid(scheme: FixedScheme):
    """Unit CLG guess for every count vector (tie-break axis where degenerate)."""
    reps = scheme.reps
    r = 2.0 * np.arange(reps + 1) / reps - 1.0
    axes = len(scheme.axis_labels)
    grids = list(np.meshgrid(*([r] * axes), indexing="ij"))
    vec = np.stack(grids + [np.zeros_like(grids[0])] * (3 - axes), axis=-1)
    nrm = np.linalg.norm(vec, axis=-1)
    out = vec / np.where(nrm > 1e-12, nrm, 1.0)[..., None]
    out[nrm <= 1e-12] = tie_break_axis(scheme.mode)
    return out


def _tomography_exact(scheme: FixedScheme, rule: Rule) -> FidelityResult:
    V = _tomography_moment_tensor(scheme)
    if rule is Rule.OG:
        delta = float(np.linalg.norm(V, axis=-1).sum())
    else:
        delta = float((V * _clg_grid(scheme)).sum())
    return FidelityResult(F=0.5 * (1.0 + delta), N=scheme.N, method=Method.EXACT_ENUMERATION)


def _isotropic_axes(N: int) -> np.ndarray:
    theta = np.arange(1, N + 1) * math.pi / N
    return np.stack([np.cos(theta), np.sin(theta), np.zeros(N)], axis=1)


def _isotropic_exact(N: int) -> FidelityResult:
    nodes, w = quadrature_grid(Mode.PLANAR_2D, N + 1)
    axes = _isotropic_axes(N)
    wn = w[:, None] * nodes
    prod = np.ones((1, len(w)))
    for k in range(N):
        dots = (nodes @ axes[k])[None, :]
        prod = np.concatenate([prod * (1.0 + dots), prod * (1.0 - dots)], axis=0)
    V = prod @ wn / 2.0**N
    delta = float(np.linalg.norm(V, axis=1).sum())
    return FidelityResult(F=0.5 * (1.0 + delta), N=N, method=Method.EXACT_ENUMERATION)


# ---------------------------------------------------------------------------
# Monte Carlo trial functions (block-level; rng comes from a counter stream)


def _sample_counts(rng, reps, n_proj):
    return rng.binomial(reps, (1.0 + n_proj) / 2.0)


def tomography_clg_trials(rng: np.random.Generator, size: int, params: dict) -> np.ndarray:
    scheme = FixedScheme(SchemeKind(params["kind"]), params["N"])
    reps = scheme.reps
    states = sample_prior(scheme.mode, rng, size)
    vec = np.zeros((size, 3))
    for lab in scheme.axis_labels:
        proj = states @ _AXIS_VECS[lab]
        alpha = _sample_counts(rng, reps, proj) / reps
        vec += np.outer(2.0 * alpha - 1.0, _AXIS_VECS[lab])
    nrm = np.linalg.norm(vec, axis=1)
    guess = vec / np.where(nrm > 1e-12, nrm, 1.0)[:, None]
    guess[nrm <= 1e-12] = tie_break_axis(scheme.mode)
    return 0.5 * (1.0 + np.einsum("tj,tj->t", states, guess))


def tomography_og_trials(rng: np.random.Generator, size: int, params: dict) -> np.ndarray:
    """Sampled counts, exact per-outcome posterior moment from the power tables."""
    scheme = FixedScheme(SchemeKind(params["kind"]), params["N"])
    reps = scheme.reps
    nodes, w = quadrature_grid(scheme.mode, scheme.N + 1)
    tables = _power_tables(scheme, nodes)
    wn = w[:, None] * nodes
    states = sample_prior(scheme.mode, rng, size)
    posterior = np.ones((size, len(w)))
    for lab, t in zip(scheme.axis_labels, tables):
        proj = states @ _AXIS_VECS[lab]
        ks = _sample_counts(rng, reps, proj)
        posterior *= t[ks]
    V = posterior @ wn
    nrm = np.linalg.norm(V, axis=1)
    guess = V / np.where(nrm > 1e-300, nrm, 1.0)[:, None]
    guess[nrm <= 1e-300] = tie_break_axis(scheme.mode)
    return 0.5 * (1.0 + np.einsum("tj,tj->t", states, guess))


def isotropic_og_trials(rng: np.random.Generator, size: int, params: dict) -> np.ndarray:
    N = params["N"]
    nodes, w = quadrature_grid(Mode.PLANAR_2D, N + 2)
    axes = _isotropic_axes(N)
    wn = w[:, None] * nodes
    states = sample_prior(Mode.PLANAR_2D, rng, size)
    posterior = np.ones((size, len(w)))
    for k in range(N):
        proj = states @ axes[k]
        signs = np.where(rng.uniform(size=size) < (1.0 + proj) / 2.0, 1.0, -1.0)
        posterior *= 1.0 + (nodes @ axes[k])[None, :] * signs[:, None]
    V = posterior @ wn
    nrm = np.linalg.norm(V, axis=1)
    guess = V / np.where(nrm > 1e-300, nrm, 1.0)[:, None]
    guess[nrm <= 1e-300] = tie_break_axis(Mode.PLANAR_2D)
    return 0.5 * (1.0 + np.einsum("tj,tj->t", states, guess))


def random_scheme_trials(rng: np.random.Generator, size: int, params: dict) -> np.ndarray:
    N = params["N"]
    nodes, w = quadrature_grid(Mode.FULL_3D, N + 2)
    wn = w[:, None] * nodes
    states = sample_prior(Mode.FULL_3D, rng, size)
    axes = sample_prior(Mode.FULL_3D, rng, size * N).reshape(size, N, 3)
    unif = rng.uniform(size=(size, N))
    return random_scheme_run(
        np.ascontiguousarray(nodes), np.ascontiguousarray(wn), states, axes, unif
    )


_TRIAL_FNS = {
    (SchemeKind.TOMOGRAPHY_2D, Rule.CLG): tomography_clg_trials,
    (SchemeKind.TOMOGRAPHY_3D, Rule.CLG): tomography_clg_trials,
    (SchemeKind.TOMOGRAPHY_2D, Rule.OG): tomography_og_trials,
    (SchemeKind.TOMOGRAPHY_3D, Rule.OG): tomography_og_trials,
}


# ---------------------------------------------------------------------------
# public entry points


def _mc_result(trial_fn, tag, N, trials, seed, workers, params) -> FidelityResult:
    parts = mc.mc_run(trial_fn, trials, seed, tag, params=params, workers=workers)
    count, mean, stderr = mc.pool_partials(parts)
    return FidelityResult(
        F=mean, N=N, method=Method.MONTE_CARLO, stderr=stderr, trials=count, seed=seed
    )


def fixed_scheme_fidelity(
    scheme: FixedScheme,
    rule: Rule,
    trials: Optional[int] = None,
    seed: int = 0,
    workers: Optional[int] = None,
    force_mc: bool = False,
) -> FidelityResult:
    """Average fidelity of a tomography scheme under the CLG or OG estimator."""
    if scheme.kind is SchemeKind.ISOTROPIC_2D:
        if rule is not Rule.OG:
            raise ValueError("the isotropic scheme is defined with the optimal guess")
        return isotropic_2d_fidelity(scheme.N, trials=trials, seed=seed, workers=workers)
    if scheme.kind is SchemeKind.RANDOM_3D:
        return random_scheme_fidelity(scheme.N, trials or DEFAULT_MC_TRIALS, seed, workers)
    n_states = (scheme.reps + 1) ** len(scheme.axis_labels)
    if not force_mc and n_states <= ENUM_LIMIT:
        return _tomography_exact(scheme, rule)
    if not force_mc:
        warnings.warn(
            f"outcome space of {scheme.kind.value} at N={scheme.N} too large to "
            "enumerate; falling back to Monte Carlo"
        )
    trial_fn = _TRIAL_FNS[(scheme.kind, rule)]
    tag = f"{scheme.kind.value}-{rule.value}-{scheme.N}"
    return _mc_result(
        trial_fn, tag, scheme.N, trials or DEFAULT_MC_TRIALS, seed, workers,
        {"kind": scheme.kind.value, "N": scheme.N},
    )


def isotropic_2d_fidelity(
    N: int,
    trials: Optional[int] = None,
    seed: int = 0,
    workers: Optional[int] = None,
    force_mc: bool = False,
) -> FidelityResult:
    """Equatorial scheme with axes fanned at angles k*pi/N, optimal guess."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if not force_mc and 2**N <= ENUM_LIMIT:
        return _isotropic_exact(N)
    if not force_mc:
        warnings.warn(f"isotropic outcome tree at N={N} too large; using Monte Carlo")
    return _mc_result(
        isotropic_og_trials, f"iso2d-{N}", N, trials or DEFAULT_MC_TRIALS, seed, workers,
        {"N": N},
    )


def random_scheme_fidelity(
    N: int, trials: int, seed: int = 0, workers: Optional[int] = None
) -> FidelityResult:
    """Fresh random axes each trial, optimal guess from the exact posterior moment."""
    if trials < 1000:
        raise ValueError("random scheme needs at least 1000 trials")
    return _mc_result(
        random_scheme_trials, f"rand3d-{N}", N, trials, seed, workers, {"N": N}
    )
