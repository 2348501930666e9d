"""NumPy implementations of the hot numerical kernels.

Reference semantics for the compiled backend: cykernels.pyx mirrors these
routines step for step, so both backends can be cross-checked on identical
inputs. Batching here is chunked to keep the node-product arrays in cache.
"""
from __future__ import annotations

import numpy as np

# multistart direction table (3D): coordinate axes plus body diagonals
_LATTICE_3D = np.array(
    [
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [1.0, 1.0, 1.0],
        [1.0, -1.0, 1.0],
        [1.0, 1.0, -1.0],
        [1.0, -1.0, -1.0],
    ]
)
_LATTICE_3D /= np.linalg.norm(_LATTICE_3D, axis=1)[:, None]

_LATTICE_2D = np.array(
    [
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [1.0, 1.0, 0.0],
        [1.0, -1.0, 0.0],
    ]
)
_LATTICE_2D /= np.linalg.norm(_LATTICE_2D, axis=1)[:, None]

_POWER_SEED = np.array([0.530688, 0.621124, 0.576615])
_POWER_SEED_2D = np.array([0.651372, 0.758758, 0.0])


def posterior_products(nodes: np.ndarray, signed_axes: np.ndarray) -> np.ndarray:
    """prod_k (1 + n_s . m_k) at every node; the 2^-k scale is left to callers."""
    if len(signed_axes) == 0:
        return np.ones(len(nodes))
    return np.prod(1.0 + nodes @ signed_axes.T, axis=1)


def _start_directions(V, A, planar):
    """Per-problem multistart block: top eigenvector, moment direction, lattice."""
    B = V.shape[0]
    seed = _POWER_SEED_2D if planar else _POWER_SEED
    ev = np.broadcast_to(seed, (B, 3)).copy()
    for _ in range(30):
        ev = np.einsum("bij,bj->bi", A, ev)
        if planar:
            ev[:, 2] = 0.0
        nrm = np.linalg.norm(ev, axis=1, keepdims=True)
        small = nrm[:, 0] < 1e-300
        if small.any():
            ev[small] = seed
            nrm = np.linalg.norm(ev, axis=1, keepdims=True)
        ev /= nrm
    nv = np.linalg.norm(V, axis=1, keepdims=True)
    vhat = np.where(nv > 1e-300, V / np.maximum(nv, 1e-300), seed)
    if planar:
        vhat = vhat.copy()
        vhat[:, 2] = 0.0
        bad = np.linalg.norm(vhat, axis=1) < 1e-300
        vhat[bad] = [1.0, 0.0, 0.0]
        vhat /= np.linalg.norm(vhat, axis=1, keepdims=True)
    lattice = _LATTICE_2D if planar else _LATTICE_3D
    starts = [ev, vhat] + [np.broadcast_to(s, (B, 3)) for s in lattice]
    return np.stack(starts, axis=1)  # (B, R, 3)


def tangency_batch(V, A, planar=False, tol=1e-9, maxit=200):
    """Maximize |V + A m| + |V - A m| over unit vectors m, one problem per row.

    Iterates m <- normalize(A (u+ - u-)), which is monotone ascent for this
    convex objective on the sphere; multistart guards against local maxima.
    The returned axis has its largest-magnitude component positive.
    """
    V = np.asarray(V, dtype=float)
    A = np.asarray(A, dtype=float)
    B = V.shape[0]
    m = _start_directions(V, A, planar)
    Vb = V[:, None, :]
    for _ in range(maxit):
        Am = np.einsum("bij,brj->bri", A, m)
        up = Vb + Am
        um = Vb - Am
        nu = np.maximum(np.linalg.norm(up, axis=2, keepdims=True), 1e-300)
        nm = np.maximum(np.linalg.norm(um, axis=2, keepdims=True), 1e-300)
        g = np.einsum("bij,brj->bri", A, up / nu - um / nm)
        if planar:
            g[..., 2] = 0.0
        gn = np.linalg.norm(g, axis=2, keepdims=True)
        mn = np.where(gn > 1e-300, g / np.maximum(gn, 1e-300), m)
        delta = np.minimum(
            np.abs(mn - m).max(axis=2), np.abs(mn + m).max(axis=2)
        ).max()
        m = mn
        if delta < tol:
            break
    Am = np.einsum("bij,brj->bri", A, m)
    obj = np.linalg.norm(Vb + Am, axis=2) + np.linalg.norm(Vb - Am, axis=2)
    best = obj.argmax(axis=1)
    out = m[np.arange(B), best]
    # canonical sign: both of +-m are optimal, pick a deterministic one
    lead = np.abs(out).argmax(axis=1)
    flip = out[np.arange(B), lead] < 0.0
    out[flip] *= -1.0
    return out


def _chunk_size(S, requested=None):
    if requested:
        return int(requested)
    return max(8, min(1024, int(6_000_000 / max(S, 1))))


def random_scheme_run(nodes, wnodes, states, axes, unif):
    """Per-trial optimal-guess fidelities for fresh random measurement axes.

    nodes/wnodes define the posterior quadrature, axes holds the (T, N, 3)
    sampled directions and unif the (T, N) outcome draws. The half factors
    of the outcome probabilities are dropped from the node products; only
    the direction of the posterior moment matters here.
    """
    T, N, _ = axes.shape
    S = len(nodes)
    fs = np.empty(T)
    chunk = _chunk_size(S)
    for lo in range(0, T, chunk):
        hi = min(lo + chunk, T)
        n = states[lo:hi]
        B = hi - lo
        prod = np.ones((B, S))
        for k in range(N):
            mk = axes[lo:hi, k]
            pplus = 0.5 * (1.0 + np.einsum("bj,bj->b", n, mk))
            sign = np.where(unif[lo:hi, k] < pplus, 1.0, -1.0)
            prod *= 1.0 + (nodes @ (mk * sign[:, None]).T).T
        V = prod @ wnodes
        nv = np.linalg.norm(V, axis=1)
        guess = np.where(nv[:, None] > 1e-300, V / np.maximum(nv, 1e-300)[:, None], [0.0, 0.0, 1.0])
        fs[lo:hi] = 0.5 * (1.0 + np.einsum("bj,bj->b", n, guess))
    return fs


_TRIU = np.triu_indices(3)


def greedy_mc_run(nodes, weights, states, unif, planar=False, tol=1e-8, maxit=120):
    """Simulate greedy-adaptive trajectories; returns per-trial fidelities.

    Each step computes the branch posterior moments on the shared grid,
    solves the tangency problem for the next axis, and samples the outcome
    from the true state.
    """
    T, N = unif.shape
    S = len(nodes)
    wnodes = weights[:, None] * nodes
    wnn = (nodes[:, _TRIU[0]] * nodes[:, _TRIU[1]]) * weights[:, None]
    tie = np.array([1.0, 0.0, 0.0]) if planar else np.array([0.0, 0.0, 1.0])
    fs = np.empty(T)
    chunk = _chunk_size(S)
    for lo in range(0, T, chunk):
        hi = min(lo + chunk, T)
        n = states[lo:hi]
        B = hi - lo
        prod = np.ones((B, S))
        for k in range(N):
            V = prod @ wnodes
            A6 = prod @ wnn
            A = np.empty((B, 3, 3))
            A[:, _TRIU[0], _TRIU[1]] = A6
            A[:, _TRIU[1], _TRIU[0]] = A6
            m = tangency_batch(V, A, planar=planar, tol=tol, maxit=maxit)
            pplus = 0.5 * (1.0 + np.einsum("bj,bj->b", n, m))
            sign = np.where(unif[lo:hi, k] < pplus, 1.0, -1.0)
            prod *= 1.0 + (nodes @ (m * sign[:, None]).T).T
        V = prod @ wnodes
        nv = np.linalg.norm(V, axis=1)
        guess = np.where(nv[:, None] > 1e-300, V / np.maximum(nv, 1e-300)[:, None], tie)
        fs[lo:hi] = 0.5 * (1.0 + np.einsum("bj,bj->b", n, guess))
    return fs
