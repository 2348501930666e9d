"""Bloch-sphere substrate shared by every measurement scheme.

Provides the state-space modes (equatorial and full sphere), unit-vector
validation, isotropic prior sampling, exact monomial integrals over the
prior, product quadrature grids that are exact for the polynomial
integrands arising from von Neumann outcome probabilities, and posterior
summaries (normalization, first moment, second moment).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np

UNIT_TOL = 1e-9
DEGENERATE_TOL = 1e-14


class Mode(enum.Enum):
    """State space of the unknown state: Bloch equator or full sphere."""

    PLANAR_2D = "2d"
    FULL_3D = "3d"

    @property
    def dim(self) -> int:
        return 2 if self is Mode.PLANAR_2D else 3


class Method(enum.Enum):
    """How a fidelity value was obtained."""

    CLOSED_FORM = "closed-form"
    EXACT_ENUMERATION = "exact-enumeration"
    QUADRATURE = "quadrature"
    MONTE_CARLO = "monte-carlo"


@dataclass(frozen=True)
class FidelityResult:
    """Average fidelity of a scheme at a given number of copies.

    ``stderr`` is zero unless the value came from Monte Carlo sampling.
    """

    F: float
    N: int
    method: Method
    stderr: float = 0.0
    trials: int = 0
    seed: Optional[int] = None

    @property
    def delta(self) -> float:
        return 2.0 * self.F - 1.0

    @property
    def epsilon_n(self) -> float:
        return self.N * (1.0 - self.F)

    def __post_init__(self):
        if self.method is not Method.MONTE_CARLO and self.stderr != 0.0:
            raise ValueError("stderr must be 0 for non Monte Carlo methods")
        if not (0.0 <= self.F <= 1.0 + 1e-12):
            raise ValueError(f"fidelity out of range: {self.F}")


class Guess(NamedTuple):
    """Estimator output. ``degenerate`` marks a tie broken by convention."""

    vector: np.ndarray
    degenerate: bool


def tie_break_axis(mode: Mode) -> np.ndarray:
    """Conventional axis reported when an estimator has no preferred direction."""
    if mode is Mode.PLANAR_2D:
        return np.array([1.0, 0.0, 0.0])
    return np.array([0.0, 0.0, 1.0])


def unit_vector(v, mode: Mode = Mode.FULL_3D, tol: float = UNIT_TOL) -> np.ndarray:
    """Validate and renormalize a Bloch vector.

    Raises ValueError if the norm deviates from 1 beyond ``tol`` or, in the
    planar mode, if the out-of-plane component exceeds ``tol``.
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {v.shape}")
    nrm = float(np.linalg.norm(v))
    if abs(nrm - 1.0) > tol:
        raise ValueError(f"not a unit vector: |v| = {nrm}")
    if mode is Mode.PLANAR_2D:
        if abs(v[2]) > tol:
            raise ValueError(f"planar mode requires z = 0, got z = {v[2]}")
        v = np.array([v[0], v[1], 0.0])
    return v / np.linalg.norm(v)


def fidelity(n, m) -> float:
    """Overlap score (1 + n.m)/2 between the true state and a guess."""
    n = unit_vector(n)
    m = unit_vector(m)
    return 0.5 * (1.0 + float(n @ m))


def optimal_guess(V, mode: Mode = Mode.FULL_3D) -> Guess:
    """Bayes-optimal estimator: the direction of the posterior first moment.

    A vanishing moment carries no directional information; the conventional
    tie-break axis is returned with the degenerate flag set.
    """
    V = np.asarray(V, dtype=float)
    nrm = float(np.linalg.norm(V))
    if nrm <= DEGENERATE_TOL:
        return Guess(tie_break_axis(mode), True)
    return Guess(V / nrm, False)


# ---------------------------------------------------------------------------
# exact monomial integrals of the isotropic priors


def _double_factorial(n: int) -> int:
    if n <= 0:
        return 1
    return math.prod(range(n, 0, -2))


def sphere_monomial_integral(mode: Mode, exponents: Sequence[int]) -> Fraction:
    """Exact prior average of n_x^a n_y^b n_z^c as a rational number.

    Vanishes whenever an exponent is odd; otherwise each coordinate pairs up
    internally and the result is a ratio of double factorials.
    """
    a, b, c = (int(e) for e in exponents)
    if min(a, b, c) < 0:
        raise ValueError("exponents must be non-negative")
    if mode is Mode.PLANAR_2D and c != 0:
        raise ValueError("planar mode requires zero z exponent")
    if a % 2 or b % 2 or c % 2:
        return Fraction(0)
    q = a + b + c
    num = _double_factorial(a - 1) * _double_factorial(b - 1) * _double_factorial(c - 1)
    if mode is Mode.PLANAR_2D:
        return Fraction(num, _double_factorial(q))
    return Fraction(num, _double_factorial(q + 1))


def sample_prior(mode: Mode, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
    """Draw isotropic states: uniform angle on the equator or uniform on the sphere."""
    n = 1 if size is None else int(size)
    if mode is Mode.PLANAR_2D:
        theta = rng.uniform(0.0, 2.0 * np.pi, n)
        out = np.stack([np.cos(theta), np.sin(theta), np.zeros(n)], axis=1)
    else:
        u = rng.uniform(-1.0, 1.0, n)
        phi = rng.uniform(0.0, 2.0 * np.pi, n)
        su = np.sqrt(1.0 - u * u)
        out = np.stack([su * np.cos(phi), su * np.sin(phi), u], axis=1)
    return out[0] if size is None else out


# ---------------------------------------------------------------------------
# quadrature grids

# Product rules exact for all Bloch-polynomial integrands of the given total
# degree: Gauss-Legendre in cos(theta) x uniform azimuthal rule in 3D, and a
# uniform angular rule in 2D (exact for trigonometric polynomials).


@lru_cache(maxsize=None)
def quadrature_grid(mode: Mode, degree: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes (S, 3) and weights (S,) integrating degree-``degree`` polynomials exactly."""
    degree = max(int(degree), 1)
    if mode is Mode.PLANAR_2D:
        m = degree + 1
        theta = 2.0 * np.pi * np.arange(m) / m
        nodes = np.stack([np.cos(theta), np.sin(theta), np.zeros(m)], axis=1)
        weights = np.full(m, 1.0 / m)
    else:
        L = (degree + 2) // 2
        if 2 * L - 1 < degree:
            L += 1
        m = degree + 1
        u, wu = np.polynomial.legendre.leggauss(L)
        phi = 2.0 * np.pi * np.arange(m) / m
        su = np.sqrt(1.0 - u * u)
        nodes = np.empty((L * m, 3))
        nodes[:, 0] = np.outer(su, np.cos(phi)).ravel()
        nodes[:, 1] = np.outer(su, np.sin(phi)).ravel()
        nodes[:, 2] = np.repeat(u, m)
        weights = np.repeat(wu, m) / (2.0 * m)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


# ---------------------------------------------------------------------------
# posterior summaries


@dataclass(frozen=True)
class PosteriorSummary:
    """Moments of the unnormalized posterior after a list of outcomes.

    p is the total probability of the outcome string, V the unnormalized
    first moment of the state vector and A the 3x3 matrix of unnormalized
    second moments. trace(A) = p because the state is a unit vector.
    """

    p: float
    V: np.ndarray
    A: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "V", np.asarray(self.V, dtype=float))
        object.__setattr__(self, "A", np.asarray(self.A, dtype=float))


def signed_axes_array(axes: Sequence[Tuple[np.ndarray, int]], mode: Mode) -> np.ndarray:
    """Fold outcome signs into the measurement directions, validating each axis."""
    out = np.empty((len(axes), 3))
    for i, (m, s) in enumerate(axes):
        if s not in (1, -1):
            raise ValueError(f"outcome sign must be +1 or -1, got {s}")
        out[i] = s * unit_vector(m, mode)
    return out


def posterior_summary(axes: Sequence[Tuple[np.ndarray, int]], mode: Mode) -> PosteriorSummary:
    """Exact posterior moments for a sequence of (axis, sign) outcomes.

    The outcome probability is a polynomial of degree len(axes) in the state
    vector, so the second moments have degree len(axes) + 2 and the grid is
    chosen exact for that degree.
    """
    k = len(axes)
    nodes, weights = quadrature_grid(mode, k + 2)
    if k == 0:
        prod = np.ones(len(weights))
    else:
        signed = signed_axes_array(axes, mode)
        prod = np.prod(1.0 + nodes @ signed.T, axis=1)
    scale = 0.5**k
    pw = prod * weights
    p = float(pw.sum()) * scale
    V = (pw @ nodes) * scale
    A = (nodes.T * pw) @ nodes * scale
    return PosteriorSummary(p=p, V=V, A=A)
