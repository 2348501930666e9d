"""Adaptive measurement schemes.

Contains the greedy step-optimal scheme (next axis from the tangency of the
posterior-moment ellipsoid with the unit sphere), the general history-aware
optimization of all measurement axes for a known copy count, the two-stage
one-step adaptive scheme, and the last-step POVM optimizer that checks the
optimality of two-outcome measurements.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import minimize

from . import mc
from ._kernels import greedy_mc_run, tangency_batch
from .core import (
    FidelityResult,
    Method,
    Mode,
    PosteriorSummary,
    quadrature_grid,
    sample_prior,
    tie_break_axis,
)

GREEDY_EXACT_LIMIT = 20
LOCC_LIMIT = 6
_CHUNK_ELEMS = 8_000_000
_TRIU = np.triu_indices(3)


class NonConvergenceError(RuntimeError):
    """Raised by callers that require a converged optimizer result."""


# ---------------------------------------------------------------------------
# policies


@dataclass(frozen=True)
class AdaptivePolicy:
    """Outcome-indexed measurement axes.

    ``axes`` maps an outcome prefix (measurement order, first outcome first)
    to the axis used for the next copy when the next outcome is 0; outcome 1
    measures along the opposite direction, which keeps the two projectors of
    each step orthogonal by construction.
    """

    mode: Mode
    axes: Dict[Tuple[int, ...], np.ndarray]

    def axis_for(self, prefix: Tuple[int, ...]) -> np.ndarray:
        return self.axes[tuple(prefix)]

    def signed_axis(self, outcomes: Tuple[int, ...]) -> np.ndarray:
        """Direction associated with the last outcome of the string."""
        *prefix, last = outcomes
        return (-1.0) ** last * self.axis_for(tuple(prefix))

    @property
    def depth(self) -> int:
        return 1 + max((len(k) for k in self.axes), default=-1)

    def to_json(self) -> str:
        payload = {
            "mode": self.mode.value,
            "axes": {
                "".join(map(str, k)): [float(x) for x in v]
                for k, v in sorted(self.axes.items(), key=lambda kv: (len(kv[0]), kv[0]))
            },
        }
        return json.dumps(payload, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "AdaptivePolicy":
        payload = json.loads(text)
        axes = {
            tuple(int(c) for c in key): np.asarray(vec, dtype=float)
            for key, vec in payload["axes"].items()
        }
        return cls(mode=Mode(payload["mode"]), axes=axes)


# ---------------------------------------------------------------------------
# greedy scheme


def _is_isotropic(post: PosteriorSummary, mode: Mode) -> bool:
    d = mode.dim
    proj = np.diag([1.0, 1.0, 0.0]) if mode is Mode.PLANAR_2D else np.eye(3)
    scale = max(post.p, 1e-300)
    return (
        np.linalg.norm(post.V) < 1e-12 * scale
        and np.abs(post.A - np.trace(post.A) / d * proj).max() < 1e-11 * scale
    )


def greedy_next_axis(post: PosteriorSummary, mode: Mode) -> np.ndarray:
    """Axis maximizing |V + A m| + |V - A m| over the unit sphere (circle in 2D).

    A fully isotropic posterior leaves every direction equivalent; the
    conventional first axis +x is returned in that case.
    """
    if post.p <= 0.0:
        raise ValueError("posterior has no probability mass")
    if _is_isotropic(post, mode):
        return np.array([1.0, 0.0, 0.0])
    planar = mode is Mode.PLANAR_2D
    m = tangency_batch(post.V[None, :], post.A[None, :, :], planar=planar,
                       tol=1e-13, maxit=2000)[0]
    return m


def _greedy_exact(N: int, mode: Mode, policy_depth: int):
    nodes, weights = quadrature_grid(mode, N + 2)
    S = len(weights)
    wn = weights[:, None] * nodes
    wnn = (nodes[:, _TRIU[0]] * nodes[:, _TRIU[1]]) * weights[:, None]
    planar = mode is Mode.PLANAR_2D
    policy: Dict[Tuple[int, ...], np.ndarray] = {}

    def level_axes(prod, depth):
        B = prod.shape[0]
        V = prod @ wn
        if depth == 0:
            # isotropic prior: every direction equivalent, use the convention
            return np.tile([1.0, 0.0, 0.0], (B, 1))
        A6 = prod @ wnn
        A = np.empty((B, 3, 3))
        A[:, _TRIU[0], _TRIU[1]] = A6
        A[:, _TRIU[1], _TRIU[0]] = A6
        return tangency_batch(V, A, planar=planar, tol=1e-13, maxit=2000)

    def recurse(prod, prefixes, depth) -> float:
        if depth == N:
            V = prod @ wn
            return float(np.linalg.norm(V, axis=1).sum())
        m = level_axes(prod, depth)
        if prefixes is not None:
            for pref, ax in zip(prefixes, m):
                policy[pref] = ax
        dots = np.einsum("bj,sj->bs", m, nodes)
        child0 = prod * (1.0 + dots)
        child1 = prod * (1.0 - dots)
        if depth + 1 < policy_depth and prefixes is not None:
            pref0 = [p + (0,) for p in prefixes]
            pref1 = [p + (1,) for p in prefixes]
        else:
            pref0 = pref1 = None
        if 2 * child0.shape[0] * S <= _CHUNK_ELEMS:
            both = np.concatenate([child0, child1], axis=0)
            prefs = None if pref0 is None else pref0 + pref1
            return recurse(both, prefs, depth + 1)
        return recurse(child0, pref0, depth + 1) + recurse(child1, pref1, depth + 1)

    root_pref = [()] if policy_depth > 0 else None
    delta = recurse(np.ones((1, S)), root_pref, 0) * 0.5**N
    return policy, delta


def greedy_run(
    N: int, mode: Mode = Mode.FULL_3D, policy_depth: Optional[int] = None
) -> Tuple[AdaptivePolicy, FidelityResult]:
    """Exact greedy policy and fidelity by full outcome-tree enumeration."""
    if not 1 <= N <= GREEDY_EXACT_LIMIT:
        raise ValueError(f"exact greedy enumeration supports 1 <= N <= {GREEDY_EXACT_LIMIT}")
    if policy_depth is None:
        policy_depth = min(N, 14)
    policy, delta = _greedy_exact(N, mode, policy_depth)
    result = FidelityResult(F=0.5 * (1.0 + delta), N=N, method=Method.EXACT_ENUMERATION)
    return AdaptivePolicy(mode=mode, axes=policy), result


def greedy_trials(rng: np.random.Generator, size: int, params: dict) -> np.ndarray:
    mode = Mode(params["mode"])
    N = params["N"]
    nodes, weights = quadrature_grid(mode, N + 2)
    states = sample_prior(mode, rng, size)
    unif = rng.uniform(size=(size, N))
    return greedy_mc_run(
        np.ascontiguousarray(nodes),
        np.ascontiguousarray(weights),
        states,
        unif,
        planar=mode is Mode.PLANAR_2D,
    )


def greedy_fidelity_mc(
    N: int,
    mode: Mode = Mode.FULL_3D,
    trials: int = 20_000,
    seed: int = 0,
    workers: Optional[int] = None,
) -> FidelityResult:
    """Monte Carlo greedy fidelity; trajectories replay the step-optimal policy."""
    parts = mc.mc_run(
        greedy_trials, trials, seed, f"greedy-{mode.value}-{N}",
        params={"mode": mode.value, "N": N}, workers=workers,
    )
    count, mean, stderr = mc.pool_partials(parts)
    return FidelityResult(
        F=mean, N=N, method=Method.MONTE_CARLO, stderr=stderr, trials=count, seed=seed
    )


# ---------------------------------------------------------------------------
# general history-aware optimization (known N)


def _axes_from_angles(levels_2d: bool, angle_levels: List[np.ndarray]) -> List[np.ndarray]:
    """Level 0 is pinned to +x; later levels are parametrized by angles."""
    out = [np.array([[1.0, 0.0, 0.0]])]
    for ang in angle_levels:
        if levels_2d:
            psi = ang[:, 0]
            out.append(np.stack([np.cos(psi), np.sin(psi), np.zeros_like(psi)], axis=1))
        else:
            th, ph = ang[:, 0], ang[:, 1]
            st = np.sin(th)
            out.append(np.stack([st * np.cos(ph), st * np.sin(ph), np.cos(th)], axis=1))
    return out


def _tree_delta_and_axis_grads(axes_levels, nodes, weights, want_grad=True):
    """Mean-direction length of the full outcome tree and its axis gradients.

    Forward pass accumulates per-branch posterior values on the grid; the
    backward pass folds the leaf guess directions into per-level suffix
    sums, which yields the exact gradient without differentiating through
    the (envelope-stationary) guesses.
    """
    N = len(axes_levels)
    S = len(weights)
    wn = weights[:, None] * nodes
    prods = [np.ones((1, S))]
    dots_levels = []
    for k in range(N):
        dots = axes_levels[k] @ nodes.T
        dots_levels.append(dots)
        p = prods[-1]
        prods.append(np.concatenate([p * (1.0 + dots), p * (1.0 - dots)], axis=0))
    Vl = prods[-1] @ wn
    nv = np.linalg.norm(Vl, axis=1)
    delta = float(nv.sum()) * 0.5**N
    if not want_grad:
        return delta, None
    G = Vl / np.where(nv > 1e-300, nv, 1.0)[:, None]
    U = (G @ nodes.T) * weights[None, :]
    grads = [None] * N
    for k in range(N - 1, -1, -1):
        B = 1 << k
        U0, U1 = U[:B], U[B:]
        grads[k] = ((prods[k] * (U0 - U1)) @ nodes) * 0.5**N
        U = U0 * (1.0 + dots_levels[k]) + U1 * (1.0 - dots_levels[k])
    return delta, grads


def _pack(angle_levels):
    if not angle_levels:
        return np.zeros(0)
    return np.concatenate([a.ravel() for a in angle_levels])


def _unpack(x, N, planar):
    width = 1 if planar else 2
    levels, off = [], 0
    for k in range(1, N):
        n = 1 << k
        levels.append(x[off : off + width * n].reshape(n, width))
        off += width * n
    return levels


def _angles_of_axes(axes: np.ndarray, planar: bool) -> np.ndarray:
    if planar:
        return np.arctan2(axes[:, 1], axes[:, 0])[:, None]
    th = np.arccos(np.clip(axes[:, 2], -1.0, 1.0))
    ph = np.arctan2(axes[:, 1], axes[:, 0])
    return np.stack([th, ph], axis=1)


def _objective_factory(N, mode):
    planar = mode is Mode.PLANAR_2D
    nodes, weights = quadrature_grid(mode, N + 2)

    def fun(x):
        levels = _unpack(x, N, planar)
        axes = _axes_from_angles(planar, levels)
        delta, grads = _tree_delta_and_axis_grads(axes, nodes, weights)
        gparts = []
        for k in range(1, N):
            ga = grads[k]
            ang = levels[k - 1]
            if planar:
                psi = ang[:, 0]
                dax = np.stack([-np.sin(psi), np.cos(psi), np.zeros_like(psi)], axis=1)
                gparts.append((ga * dax).sum(axis=1))
            else:
                th, ph = ang[:, 0], ang[:, 1]
                st, ct = np.sin(th), np.cos(th)
                cp, sp = np.cos(ph), np.sin(ph)
                dth = np.stack([ct * cp, ct * sp, -st], axis=1)
                dph = np.stack([-st * sp, st * cp, np.zeros_like(th)], axis=1)
                gparts.append(
                    np.stack([(ga * dth).sum(1), (ga * dph).sum(1)], axis=1).ravel()
                )
        grad = np.concatenate(gparts) if gparts else np.zeros(0)
        return -delta, -grad

    return fun


@dataclass(frozen=True)
class LoccSolution:
    policy: AdaptivePolicy
    F: float
    N: int
    angle_params: Optional[Dict[str, float]]
    trace: Dict[str, float]
    converged: bool


def _policy_from_levels(axes_levels, mode) -> AdaptivePolicy:
    axes = {}
    for k, lvl in enumerate(axes_levels):
        for b in range(lvl.shape[0]):
            prefix = tuple((b >> j) & 1 for j in range(k))
            axes[prefix] = lvl[b]
    return AdaptivePolicy(mode=mode, axes=axes)


def _greedy_warm_angles(N, mode):
    policy, _ = greedy_run(N, mode, policy_depth=N)
    planar = mode is Mode.PLANAR_2D
    levels = []
    for k in range(1, N):
        lvl = np.stack(
            [policy.axes[tuple((b >> j) & 1 for j in range(k))] for b in range(1 << k)]
        )
        levels.append(_angles_of_axes(lvl, planar))
    return levels


def locc_optimize(
    N: int,
    mode: Mode = Mode.FULL_3D,
    restarts: int = 8,
    seed: int = 0,
) -> LoccSolution:
    """Maximize the fidelity over every outcome-conditioned axis at known N.

    Quasi-Newton ascent with the exact analytic gradient of the tree
    objective, warm-started from the greedy policy plus seeded random
    perturbations. For N = 4 the known three-angle family is fitted as well
    and its angles are reported alongside the free optimum.
    """
    if not 1 <= N <= LOCC_LIMIT:
        raise ValueError(f"history-aware optimization supports 1 <= N <= {LOCC_LIMIT}")
    planar = mode is Mode.PLANAR_2D
    fun = _objective_factory(N, mode)
    warm = _pack(_greedy_warm_angles(N, mode))
    best = None
    evals = 0
    for r in range(max(1, restarts)):
        rng = mc.stream(seed, f"locc-{mode.value}-{N}", r)
        x0 = warm if r == 0 else warm + rng.normal(scale=0.4, size=warm.shape)
        if warm.size == 0:
            res_fun, _ = fun(x0)
            best = (res_fun, x0, True)
            break
        res = minimize(
            fun, x0, jac=True, method="L-BFGS-B",
            options=dict(maxiter=4000, ftol=1e-16, gtol=1e-12),
        )
        evals += res.nfev
        grad_ok = np.linalg.norm(res.jac) < 1e-6
        if best is None or res.fun < best[0]:
            best = (res.fun, res.x, grad_ok)
    neg_delta, x, grad_ok = best
    F = 0.5 * (1.0 - neg_delta)
    axes_levels = _axes_from_angles(planar, _unpack(x, N, planar))
    policy = _policy_from_levels(axes_levels, mode)
    angle_params = None
    if N == 4 and mode is Mode.FULL_3D:
        angle_params = fit_angle_family_n4()
    trace = {"restarts": float(max(1, restarts)), "best_objective": 2.0 * F - 1.0,
             "evaluations": float(evals)}
    return LoccSolution(
        policy=policy, F=F, N=N, angle_params=angle_params, trace=trace, converged=grad_ok
    )


# --- the compact three-angle family at N = 4 ------------------------------


def _family_axes_n4(alpha: float, beta: float, gamma: float) -> List[np.ndarray]:
    ex = np.array([1.0, 0.0, 0.0])
    ey = np.array([0.0, 1.0, 0.0])
    lvl0 = ex[None, :]
    lvl1 = np.stack([ey, ey])
    lvl2 = np.empty((4, 3))
    svecs = np.empty((4, 3))
    for b in range(4):
        i1, i2 = b & 1, (b >> 1) & 1
        m1 = (-1.0) ** i1 * ex
        m2 = (-1.0) ** i2 * ey
        u1 = np.cross(m1, m2)
        s = (m1 + m2) / math.sqrt(2.0)
        v1 = np.cross(u1, s)
        lvl2[b] = math.cos(alpha) * u1 + math.sin(alpha) * v1
        svecs[b] = s
    lvl3 = np.empty((8, 3))
    for b in range(8):
        i3 = (b >> 2) & 1
        m3 = (-1.0) ** i3 * lvl2[b & 3]
        s = svecs[b & 3]
        u2 = np.cross(s, m3)
        v2 = math.cos(beta) * m3 - math.sin(beta) * s
        lvl3[b] = math.cos(gamma) * u2 + math.sin(gamma) * v2
    return [lvl0, lvl1, lvl2, lvl3]


def fit_angle_family_n4() -> Dict[str, float]:
    """Best (alpha, beta, gamma) of the structured four-copy axis family."""
    nodes, weights = quadrature_grid(Mode.FULL_3D, 6)

    def neg_f(p):
        delta, _ = _tree_delta_and_axis_grads(
            _family_axes_n4(*p), nodes, weights, want_grad=False
        )
        return -(1.0 + delta) / 2.0

    best = None
    for start in ((0.5, 0.6, 0.5), (0.3, 0.3, 0.3), (0.8, 0.8, 0.6), (0.2, 0.9, 0.4)):
        res = minimize(neg_f, start, method="Nelder-Mead",
                       options=dict(xatol=1e-12, fatol=1e-14, maxiter=4000))
        if best is None or res.fun < best.fun:
            best = res
    alpha, beta, gamma = (abs(float(v)) for v in best.x)
    return {"alpha": alpha, "beta": beta, "gamma": gamma, "F": -float(best.fun)}


# ---------------------------------------------------------------------------
# one-step adaptive scheme


def _orthonormal_frame(M0: np.ndarray):
    """Deterministic (u, v) completing M0 to an orthonormal basis."""
    ref = np.zeros_like(M0)
    ref[np.arange(len(M0)), np.argmin(np.abs(M0), axis=1)] = 1.0
    u = np.cross(M0, ref)
    u /= np.linalg.norm(u, axis=1)[:, None]
    v = np.cross(M0, u)
    return u, v


def _split_counts(total: int, parts: int) -> List[int]:
    base = total // parts
    out = [base] * parts
    for i in range(total - base * parts):
        out[i] += 1
    return out


def one_step_adaptive_trials(rng: np.random.Generator, size: int, params: dict) -> np.ndarray:
    N, a, lam = params["N"], params["a"], params["lam"]
    mode = Mode(params.get("mode", Mode.FULL_3D.value))
    N0 = int(math.floor(N**a))
    axes = 2 if mode is Mode.PLANAR_2D else 3
    reps = _split_counts(N0, axes)
    states = sample_prior(mode, rng, size)
    vec = np.zeros((size, 3))
    frame = np.eye(3)
    for i, r in enumerate(reps):
        proj = states @ frame[i]
        alpha = rng.binomial(r, (1.0 + proj) / 2.0) / r
        vec += np.outer(2.0 * alpha - 1.0, frame[i])
    nrm = np.linalg.norm(vec, axis=1)
    M0 = vec / np.where(nrm > 1e-12, nrm, 1.0)[:, None]
    M0[nrm <= 1e-12] = tie_break_axis(mode)
    nbar = N - N0
    if mode is Mode.PLANAR_2D:
        u = np.stack([-M0[:, 1], M0[:, 0], np.zeros(size)], axis=1)
        au = rng.binomial(nbar, (1.0 + np.einsum("tj,tj->t", states, u)) / 2.0) / nbar
        ru = 2.0 * au - 1.0
        omega = lam * ru
        M = M0 * np.cos(omega)[:, None] + u * np.sin(omega)[:, None]
    else:
        nu, nv = (nbar + 1) // 2, nbar // 2
        u, v = _orthonormal_frame(M0)
        au = rng.binomial(nu, (1.0 + np.einsum("tj,tj->t", states, u)) / 2.0) / nu
        av = rng.binomial(nv, (1.0 + np.einsum("tj,tj->t", states, v)) / 2.0) / nv
        ru, rv = 2.0 * au - 1.0, 2.0 * av - 1.0
        omega = lam * np.hypot(ru, rv)
        tau = np.arctan2(rv, ru)
        M = (
            M0 * np.cos(omega)[:, None]
            + (u * np.cos(tau)[:, None] + v * np.sin(tau)[:, None]) * np.sin(omega)[:, None]
        )
    return 0.5 * (1.0 + np.einsum("tj,tj->t", states, M))


def one_step_adaptive(
    N: int,
    a: float = 0.5,
    lam: float = 1.0,
    trials: int = 100_000,
    seed: int = 0,
    mode: Mode = Mode.FULL_3D,
    workers: Optional[int] = None,
) -> FidelityResult:
    """Two-stage scheme: rough estimate, then refinement in its orthogonal plane."""
    if not 0.0 < a < 1.0:
        raise ValueError("stage-split exponent must satisfy 0 < a < 1")
    minimum = 2 if mode is Mode.PLANAR_2D else 3
    if math.floor(N**a) < minimum:
        raise ValueError(f"first stage needs at least {minimum} copies; increase N or a")
    if lam <= 0.0:
        raise ValueError("scale parameter must be positive")
    parts = mc.mc_run(
        one_step_adaptive_trials, trials, seed, f"osa-{mode.value}-{N}-{a}-{lam}",
        params={"N": N, "a": a, "lam": lam, "mode": mode.value}, workers=workers,
    )
    count, mean, stderr = mc.pool_partials(parts)
    return FidelityResult(
        F=mean, N=N, method=Method.MONTE_CARLO, stderr=stderr, trials=count, seed=seed
    )


# ---------------------------------------------------------------------------
# last-step general POVM optimizer


@dataclass(frozen=True)
class GeneralPovmStep:
    """Weighted rank-one elements of a single-copy POVM.

    Constraints: weights sum to one, the weighted directions sum to zero and
    every direction is unit length. ``objective`` is the branch contribution
    sum_r c_r |V + A m_r| evaluated on the posterior it was optimized for.
    """

    weights: np.ndarray
    axes: np.ndarray
    objective: float
    feasibility_defect: float

    def support(self, threshold: float = 1e-6) -> np.ndarray:
        return np.flatnonzero(self.weights > threshold)


def _povm_value(c, m, V, A):
    return float(np.sum(c * np.linalg.norm(V[None, :] + m @ A, axis=1)))


def _povm_al_solve(V, A, c0, m0, outer=14, gtol=1e-13):
    """Augmented-Lagrangian ascent over weights (squared-simplex) and directions."""
    R = len(c0)

    def unpack(x):
        cr = x[:R]
        Mr = x[R:].reshape(R, 3)
        s2 = float(cr @ cr)
        c = cr * cr / s2
        nr = np.linalg.norm(Mr, axis=1)
        m = Mr / nr[:, None]
        return cr, c, Mr, m, nr, s2

    def fg(x, lam, rho):
        cr, c, Mr, m, nr, s2 = unpack(x)
        Am = m @ A
        g = np.linalg.norm(V[None, :] + Am, axis=1)
        b = c @ m
        L = -(c @ g - lam @ b - rho * (b @ b))
        u = (V[None, :] + Am) / g[:, None]
        dL_dc = g - m @ lam - 2.0 * rho * (m @ b)
        dL_dm = c[:, None] * (u @ A) - np.outer(c, lam) - 2.0 * rho * np.outer(c, b)
        dc_dcr = (2.0 / s2) * (np.diag(cr) - np.outer(c, cr))
        gc = dc_dcr.T @ dL_dc
        gm = (dL_dm - (dL_dm * m).sum(axis=1)[:, None] * m) / nr[:, None]
        return L, -np.concatenate([gc, gm.ravel()])

    x = np.concatenate([np.sqrt(np.maximum(c0, 1e-12)), m0.ravel()])
    lam = np.zeros(3)
    rho = 10.0
    for stage in range(outer):
        res = minimize(fg, x, args=(lam, rho), jac=True, method="L-BFGS-B",
                       options=dict(maxiter=600, ftol=1e-16, gtol=gtol))
        x = res.x
        _, c, _, m, _, _ = unpack(x)
        b = c @ m
        if np.linalg.norm(b) < 1e-12:
            break
        lam = lam + 2.0 * rho * b
        if stage % 2 == 1:
            rho *= 5.0
    _, c, _, m, _, _ = unpack(x)
    return c, m


def optimize_last_step_povm(
    post: PosteriorSummary,
    R: int = 4,
    restarts: int = 6,
    seed: int = 0,
) -> GeneralPovmStep:
    """Best R-outcome single-copy POVM for the final measurement of a branch.

    Maximizes the weighted moment lengths subject to the completeness
    constraints, then prunes negligible weights and re-solves on the reduced
    support when that does not cost objective value.
    """
    if not 2 <= R <= 8:
        raise ValueError("element count must lie in 2..8")
    V, A = post.V, post.A
    best = None
    for r in range(max(1, restarts)):
        rng = mc.stream(seed, f"povm-{R}", r)
        m0 = sample_prior(Mode.FULL_3D, rng, R)
        c0 = rng.uniform(0.5, 1.5, R)
        c0 /= c0.sum()
        c, m = _povm_al_solve(V, A, c0, m0)
        val = _povm_value(c, m, V, A)
        if best is None or val > best[0]:
            best = (val, c, m)
    val, c, m = best
    # support pruning: drop the lightest element and re-solve while the
    # objective does not decrease; a genuinely spread optimum would resist
    while (c > 0).sum() > 2:
        active = np.flatnonzero(c > 0)
        drop = active[np.argmin(c[active])]
        keep = active[active != drop]
        c2, m2 = _povm_al_solve(V, A, c[keep] / c[keep].sum(), m[keep])
        val2 = _povm_value(c2, m2, V, A)
        if val2 < val - 1e-10 or np.linalg.norm(c2 @ m2) > 1e-9:
            break
        c = np.zeros(R)
        m_new = np.tile(tie_break_axis(Mode.FULL_3D), (R, 1))
        c[: len(c2)] = c2
        m_new[: len(c2)] = m2
        m = m_new
        val = val2
    defect = float(np.linalg.norm(c @ m))
    return GeneralPovmStep(weights=c, axes=m, objective=val, feasibility_defect=defect)
