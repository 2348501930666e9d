"""Fisher-information machinery and asymptotic fidelity coefficients.

Pointwise Fisher matrices are built from the outcome probabilities of the
elementary measurements, the fidelity Hessians come in closed form, and
their combination through the Cramer-Rao bound yields the large-N limits
of the fixed local schemes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from scipy import integrate

from .core import Mode, unit_vector

_P_FLOOR = 1e-14
_POLE_TOL = 1e-12


@dataclass(frozen=True)
class FisherMatrix:
    matrix: np.ndarray
    parameterization: str  # "theta" (2D), "theta_phi" or "v_phi" (3D)

    def __post_init__(self):
        m = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        if np.abs(m - m.T).max() > 1e-12:
            raise ValueError("Fisher matrix must be symmetric")
        object.__setattr__(self, "matrix", m)


@dataclass(frozen=True)
class FidelityHessian:
    matrix: np.ndarray
    parameterization: str

    def __post_init__(self):
        object.__setattr__(self, "matrix", np.atleast_2d(np.asarray(self.matrix, dtype=float)))


# ---------------------------------------------------------------------------
# pointwise Fisher information


def fisher_2d_von_neumann(theta: float, theta_m: float) -> float:
    """Fisher information of one equatorial two-outcome measurement.

    Evaluated from the defining sum with half-angle-stable probabilities;
    the deterministic-outcome point is covered by the continuous limit.
    """
    delta = theta - theta_m
    half = 0.5 * delta
    p_plus = math.cos(half) ** 2
    p_minus = math.sin(half) ** 2
    dp = -0.5 * math.sin(delta)  # derivative of p_plus wrt theta
    info = 0.0
    for p, other in ((p_plus, p_minus), (p_minus, p_plus)):
        if p > _P_FLOOR:
            info += dp * dp / p
        else:
            info += other  # continuous limit of the vanishing-probability score term
    return info


def _angles_to_state(theta: float, phi: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    st, ct = math.sin(theta), math.cos(theta)
    cp, sp = math.cos(phi), math.sin(phi)
    n = np.array([st * cp, st * sp, ct])
    dn_dtheta = np.array([ct * cp, ct * sp, -st])
    dn_dphi = np.array([-st * sp, st * cp, 0.0])
    return n, dn_dtheta, dn_dphi


def fisher_axes_3d(axes: Sequence, theta: float, phi: float) -> FisherMatrix:
    """Joint Fisher matrix of one von Neumann measurement per listed axis.

    The 2^k outcomes of the combined measurement are enumerated explicitly,
    so additivity over independent axes is a checkable property rather than
    an assumption of the construction.
    """
    if abs(math.sin(theta)) < _POLE_TOL:
        raise ValueError("coordinate singularity: sin(theta) = 0")
    axes = np.stack([unit_vector(m) for m in axes])
    k = len(axes)
    n, dth, dph = _angles_to_state(theta, phi)
    proj = axes @ n
    dproj = np.stack([axes @ dth, axes @ dph], axis=1)  # (k, 2)
    info = np.zeros((2, 2))
    for code in range(2**k):
        signs = np.array([1.0 if (code >> j) & 1 == 0 else -1.0 for j in range(k)])
        factors = 0.5 * (1.0 + signs * proj)
        p = float(np.prod(factors))
        grad = np.zeros(2)
        for j in range(k):
            rest = np.prod(np.delete(factors, j))
            grad += 0.5 * signs[j] * dproj[j] * rest
        if p > _P_FLOOR:
            info += np.outer(grad, grad) / p
    return FisherMatrix(matrix=info, parameterization="theta_phi")


_TOMO_AXES = (np.array([1.0, 0, 0]), np.array([0, 1.0, 0]), np.array([0, 0, 1.0]))


def fisher_tomography_3d(theta: float, phi: float) -> FisherMatrix:
    """Fisher matrix of the 8-outcome x/y/z elementary tomography measurement."""
    return fisher_axes_3d(_TOMO_AXES, theta, phi)


def _random_scheme_integrand(kind: str):
    # outcome-summed integrands at the equatorial reference point
    if kind == "vv":
        return lambda u, ph: (u * u) / (1.0 - (1.0 - u * u) * math.cos(ph) ** 2)
    if kind == "phph":
        return lambda u, ph: ((1.0 - u * u) * math.sin(ph) ** 2) / (
            1.0 - (1.0 - u * u) * math.cos(ph) ** 2
        )
    return lambda u, ph: (u * math.sqrt(max(1.0 - u * u, 0.0)) * math.sin(ph)) / (
        1.0 - (1.0 - u * u) * math.cos(ph) ** 2
    )


def _random_entry(kind: str) -> float:
    f = _random_scheme_integrand(kind)

    def inner(u):
        val, _ = integrate.quad(
            lambda ph: f(u, ph), 0.0, 2.0 * math.pi,
            points=[0.0, math.pi, 2.0 * math.pi], limit=200, epsabs=1e-13, epsrel=1e-13,
        )
        return val / (4.0 * math.pi)

    lo, hi = (0.0, 1.0) if kind in ("vv", "phph") else (-1.0, 1.0)
    val, _ = integrate.quad(inner, lo, hi, limit=200, epsabs=1e-13, epsrel=1e-13)
    return 2.0 * val if kind in ("vv", "phph") else val


def fisher_random_3d() -> FisherMatrix:
    """Per-copy Fisher matrix of the random-direction scheme at the reference point.

    Computed by numerical integration over measurement directions in the
    (v = cos(theta), phi) parameterization at the equator.
    """
    vv = _random_entry("vv")
    phph = _random_entry("phph")
    vph = _random_entry("vph")
    return FisherMatrix(matrix=np.array([[vv, vph], [vph, phph]]), parameterization="v_phi")


# ---------------------------------------------------------------------------
# fidelity Hessians and the Cramer-Rao combination


def hessian_fidelity(mode: Mode, eta, parameterization: str = "theta_phi") -> FidelityHessian:
    """Closed-form Hessian of the overlap score at a matching estimate."""
    if mode is Mode.PLANAR_2D:
        return FidelityHessian(matrix=np.array([[-0.5]]), parameterization="theta")
    if parameterization == "theta_phi":
        theta = float(np.atleast_1d(eta)[0])
        return FidelityHessian(
            matrix=np.diag([-0.5, -(1.0 - math.cos(2.0 * theta)) / 4.0]),
            parameterization="theta_phi",
        )
    if parameterization == "v_phi":
        v = float(np.atleast_1d(eta)[0])
        if abs(v) >= 1.0:
            raise ValueError("v = cos(theta) must lie strictly inside (-1, 1)")
        return FidelityHessian(
            matrix=np.diag([-0.5 / (1.0 - v * v), -(1.0 - v * v) / 2.0]),
            parameterization="v_phi",
        )
    raise ValueError(f"unknown parameterization {parameterization!r}")


def cramer_rao_fidelity(
    fisher: FisherMatrix, hessian: FidelityHessian, n_repeats: int
) -> float:
    """Leading-order fidelity 1 + tr(H I^-1) / (2 n) of an efficient estimator.

    ``n_repeats`` counts repetitions of the elementary measurement that
    ``fisher`` describes (which may consume several copies each).
    """
    if fisher.parameterization != hessian.parameterization:
        raise ValueError("fisher and hessian use different parameterizations")
    if n_repeats < 1:
        raise ValueError("need at least one repetition")
    I = fisher.matrix
    cond = np.linalg.cond(I)
    if not np.isfinite(cond) or cond > 1e12:
        raise ValueError("Fisher matrix is singular: parameter not identifiable")
    return 1.0 + float(np.trace(np.linalg.solve(I, hessian.matrix))) / (2.0 * n_repeats)


def _fidelity_of_estimate(mode: Mode, eta, eta_hat) -> float:
    if mode is Mode.PLANAR_2D:
        return 0.5 * (1.0 + math.cos(eta_hat - eta))
    th, ph = eta
    th2, ph2 = eta_hat
    n1, _, _ = _angles_to_state(th, ph)
    n2, _, _ = _angles_to_state(th2, ph2)
    return 0.5 * (1.0 + float(n1 @ n2))


def finite_diff_hessian_check(mode: Mode, eta, h: float = 1e-4) -> float:
    """Max entry deviation between the numeric and closed-form Hessians."""
    if not 1e-6 <= h <= 1e-2:
        raise ValueError("step size outside the supported range")
    if mode is Mode.PLANAR_2D:
        theta = float(np.atleast_1d(eta)[0])
        f = lambda x: _fidelity_of_estimate(mode, theta, x)
        num = (f(theta + h) - 2.0 * f(theta) + f(theta - h)) / h**2
        closed = hessian_fidelity(mode, theta).matrix[0, 0]
        return abs(num - closed)
    theta, phi = (float(v) for v in eta)
    f = lambda x, y: _fidelity_of_estimate(mode, (theta, phi), (x, y))
    num = np.empty((2, 2))
    num[0, 0] = (f(theta + h, phi) - 2.0 * f(theta, phi) + f(theta - h, phi)) / h**2
    num[1, 1] = (f(theta, phi + h) - 2.0 * f(theta, phi) + f(theta, phi - h)) / h**2
    cross = (
        f(theta + h, phi + h)
        - f(theta + h, phi - h)
        - f(theta - h, phi + h)
        + f(theta - h, phi - h)
    ) / (4.0 * h**2)
    num[0, 1] = num[1, 0] = cross
    closed = hessian_fidelity(mode, (theta, phi)).matrix
    return float(np.abs(num - closed).max())


# ---------------------------------------------------------------------------
# averaged trace and the scheme-level asymptotes


def average_trace_h_over_i_tomography(n_polar: int = 200, n_azimuth: int = 200) -> float:
    """Isotropic prior average of tr(H I^-1) for the elementary tomography triple."""
    u, wu = np.polynomial.legendre.leggauss(n_polar)
    p, wp = np.polynomial.legendre.leggauss(n_azimuth)
    phi = (p + 1.0) * math.pi
    total = 0.0
    for ui, wui in zip(u, wu):
        theta = math.acos(ui)
        row = 0.0
        for pj, wpj in zip(phi, wp):
            I = fisher_tomography_3d(theta, pj).matrix
            H = hessian_fidelity(Mode.FULL_3D, (theta, pj)).matrix
            row += wpj * float(np.trace(np.linalg.solve(I, H)))
        total += wui * row
    return total * math.pi / (4.0 * math.pi)


def asymptotic_epsilon(scheme: str) -> float:
    """Large-N limit of N (1 - F) for the schemes with closed asymptotics.

    Derived through the Cramer-Rao combination: the per-measurement trace is
    rescaled by the copies consumed per elementary measurement.
    """
    if scheme in ("collective2d", "tomo2d-og", "iso2d-og"):
        return 0.25
    if scheme in ("collective3d", "rand3d-og"):
        return 1.0
    if scheme == "tomo3d-og":
        return 13.0 / 12.0
    raise ValueError(f"no closed asymptote for scheme {scheme!r}")
