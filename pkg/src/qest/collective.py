"""Optimal collective-measurement bounds and verifiers for their POVMs.

The equatorial bound comes from a binomial sum over the total-spin basis;
the full-sphere bound is the exact rational (N+1)/(N+2). Verifier routines
rebuild the optimal POVMs in the d_J-dimensional symmetric subspace and
check completeness and the achieved fidelity numerically.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

import numpy as np

from .core import Mode, unit_vector

_EXACT_BINOM_LIMIT = 60


@dataclass(frozen=True)
class CollectiveBound:
    N: int
    J: float
    d: int
    delta_max: float
    F: float


@dataclass(frozen=True)
class CovariantPovmSpec2D:
    """Optimal equatorial POVM: continuous, or K elements at phases 2*pi*k/d_J."""

    N: int
    outcomes: Union[str, int] = "continuous"  # "continuous" or an element count K

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.outcomes != "continuous":
            k = int(self.outcomes)
            if k < 1:
                raise ValueError("finite POVM needs at least one element")


@dataclass(frozen=True)
class PovmReport:
    completeness_defect: float
    achieved_delta: float


def _log_comb(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def delta_2d_max(N: int) -> float:
    """Largest mean-direction length achievable on equatorial states.

    Sum over neighbouring magnetic numbers of the geometric mean of binomial
    weights; exact integer arithmetic below 60 copies, log-gamma above.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if N <= _EXACT_BINOM_LIMIT:
        total = sum(
            math.sqrt(math.comb(N, k) * math.comb(N, k + 1)) for k in range(N)
        )
        return total / 2.0**N
    ln2 = math.log(2.0)
    return sum(
        math.exp(0.5 * (_log_comb(N, k) + _log_comb(N, k + 1)) - N * ln2)
        for k in range(N)
    )


def collective_bound_2d(N: int) -> CollectiveBound:
    d = delta_2d_max(N)
    return CollectiveBound(N=N, J=N / 2.0, d=N + 1, delta_max=d, F=0.5 * (1.0 + d))


def fidelity_3d_collective(N: int) -> Fraction:
    """Ultimate average fidelity for a completely unknown state, exactly rational."""
    if N < 1:
        raise ValueError("N must be >= 1")
    return Fraction(N + 1, N + 2)


def collective_bound_3d(N: int) -> CollectiveBound:
    F = fidelity_3d_collective(N)
    return CollectiveBound(
        N=N, J=N / 2.0, d=N + 1, delta_max=float(2 * F - 1), F=float(F)
    )


def phase_fidelity_general_fiducial(d: int) -> float:
    """Optimal covariant phase-estimation fidelity with a free d-dimensional input.

    Equals (1 + lambda_max)/2 where lambda_max is the top eigenvalue of the
    half-strength nearest-neighbour coupling matrix, cos(pi/(d+1)).
    """
    if d < 1:
        raise ValueError("dimension must be >= 1")
    return 0.5 * (1.0 + math.cos(math.pi / (d + 1)))


def rotation_amplitude_sq(J: float, m: float, n) -> float:
    """|<J m| rotation to n |J J>|^2 for the top-weight column.

    Closed form: binomial weight times powers of cos^2 and sin^2 of half the
    polar angle of n.
    """
    twoJ = round(2 * J)
    if abs(2 * J - twoJ) > 1e-12 or twoJ < 1:
        raise ValueError("J must be a positive half-integer")
    k = m + J
    ki = round(k)
    if abs(k - ki) > 1e-12 or not (0 <= ki <= twoJ):
        raise ValueError(f"m must lie in -J..J in integer steps, got {m}")
    n = unit_vector(n)
    c2 = (1.0 + n[2]) / 2.0  # cos^2(theta/2)
    s2 = (1.0 - n[2]) / 2.0
    return math.comb(twoJ, ki) * c2**ki * s2 ** (twoJ - ki)


# ---------------------------------------------------------------------------
# POVM verifiers


def _rho0_equatorial(N: int) -> np.ndarray:
    """N copies pointing along x, written in the |J m> basis (k = J + m)."""
    amps = np.array([math.sqrt(math.comb(N, k)) for k in range(N + 1)])
    amps /= 2.0 ** (N / 2.0)
    return np.outer(amps, amps)


def verify_povm_2d(spec: CovariantPovmSpec2D) -> PovmReport:
    """Resolution-of-identity defect and achieved Delta of the equatorial POVM.

    Elements are rank one with constant-magnitude matrix entries; the finite
    variant keeps K of the d_J phase angles 2*pi*k/d_J at weight 1/d_J each,
    which resolves the identity exactly only at K = d_J.
    """
    N = spec.N
    d = N + 1
    rho = _rho0_equatorial(N)
    upper = np.diag(rho, 1)  # couples neighbouring m values
    mm = np.arange(d)
    diff = mm[:, None] - mm[None, :]
    acc = np.zeros((d, d), dtype=complex)
    achieved = 0.0
    if spec.outcomes == "continuous":
        n_phi = 4 * d + 9  # uniform rule, exact for the trigonometric entries
        for j in range(n_phi):
            phi = 2.0 * math.pi * j / n_phi
            O = np.exp(1j * diff * phi)
            acc += O / n_phi
            achieved += abs(np.sum(upper * np.diag(O, -1))) / n_phi
    else:
        K = int(spec.outcomes)
        for k in range(1, K + 1):
            O = np.exp(1j * diff * (2.0 * math.pi * k / d)) / d
            acc += O
            achieved += abs(np.sum(upper * np.diag(O, -1)))
    defect = float(np.abs(acc - np.eye(d)).max())
    return PovmReport(completeness_defect=defect, achieved_delta=float(achieved))


def verify_povm_3d(N: int, n_polar: int = 0, n_azimuth: int = 0) -> PovmReport:
    """Check the continuous full-sphere POVM built from rotated top-weight states.

    Works entirely in the d_J-dimensional magnetic basis: only the top-weight
    column of the rotation matrices enters, with azimuthal phases e^{-i m phi}.
    The achieved Delta is the moment length at a reference outcome, which by
    covariance equals the average over all outcomes.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if N > 20:
        raise ValueError("matrix dimension grows with N; verifier supports N <= 20")
    d = N + 1
    L = n_polar or (N + 2)
    M = n_azimuth or (2 * N + 3)
    u, wu = np.polynomial.legendre.leggauss(L)
    k = np.arange(d)
    c = np.sqrt((1.0 + u) / 2.0)
    s = np.sqrt((1.0 - u) / 2.0)
    binom = np.sqrt([math.comb(N, int(kk)) for kk in k])
    amp = binom[None, :] * c[:, None] ** k[None, :] * s[:, None] ** (N - k[None, :])
    phis = 2.0 * math.pi * np.arange(M) / M
    phase = np.exp(-1j * np.outer(phis, k))  # (M, d)
    acc = np.zeros((d, d), dtype=complex)
    for iu in range(L):
        cols = amp[iu][None, :] * phase  # (M, d) rotation columns at this polar node
        acc += (wu[iu] / (2.0 * M)) * d * (cols.conj().T @ cols).T
    defect = float(np.abs(acc - np.eye(d)).max())
    # achieved Delta: moment of the reference outcome along +z
    uu, ww = np.polynomial.legendre.leggauss(N + 3)
    vz = d * float(np.sum(ww / 2.0 * uu * ((1.0 + uu) / 2.0) ** N))
    return PovmReport(completeness_defect=defect, achieved_delta=vz)


def collective_fidelity(mode: Mode, N: int) -> float:
    if mode is Mode.PLANAR_2D:
        return 0.5 * (1.0 + delta_2d_max(N))
    return float(fidelity_3d_collective(N))
