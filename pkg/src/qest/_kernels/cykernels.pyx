# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels. Mirrors pykernels.py; see that module for semantics."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs

cnp.import_array()

cdef double[7][3] _LAT3
_LAT3[0][:] = [1.0, 0.0, 0.0]
_LAT3[1][:] = [0.0, 1.0, 0.0]
_LAT3[2][:] = [0.0, 0.0, 1.0]
_LAT3[3][:] = [0.5773502691896258, 0.5773502691896258, 0.5773502691896258]
_LAT3[4][:] = [0.5773502691896258, -0.5773502691896258, 0.5773502691896258]
_LAT3[5][:] = [0.5773502691896258, 0.5773502691896258, -0.5773502691896258]
_LAT3[6][:] = [0.5773502691896258, -0.5773502691896258, -0.5773502691896258]

cdef double[4][3] _LAT2
_LAT2[0][:] = [1.0, 0.0, 0.0]
_LAT2[1][:] = [0.0, 1.0, 0.0]
_LAT2[2][:] = [0.7071067811865476, 0.7071067811865476, 0.0]
_LAT2[3][:] = [0.7071067811865476, -0.7071067811865476, 0.0]

cdef double[3] _PSEED3
_PSEED3[:] = [0.530688, 0.621124, 0.576615]
cdef double[3] _PSEED2
_PSEED2[:] = [0.651372, 0.758758, 0.0]


cdef inline double _norm3(const double* v) nogil:
    return sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])


cdef inline void _matvec(const double* A, const double* x, double* out) nogil:
    out[0] = A[0] * x[0] + A[1] * x[1] + A[2] * x[2]
    out[1] = A[3] * x[0] + A[4] * x[1] + A[5] * x[2]
    out[2] = A[6] * x[0] + A[7] * x[1] + A[8] * x[2]


cdef double _tangency_one(const double* V, const double* A, double* mout,
                          bint planar, double tol, int maxit) nogil:
    """Single tangency solve; returns the best objective value."""
    cdef double[3] m, mn, up, um, g, Am, start
    cdef double best = -1.0
    cdef double nu, nm, gn, d1, d2, obj, nrm
    cdef int r, it, i, nstarts, lead
    nstarts = 6 if planar else 9
    for r in range(nstarts):
        # start r = 0: power-iteration top eigenvector, r = 1: moment direction
        if r == 0:
            for i in range(3):
                start[i] = _PSEED2[i] if planar else _PSEED3[i]
            for it in range(30):
                _matvec(A, start, g)
                if planar:
                    g[2] = 0.0
                nrm = _norm3(g)
                if nrm < 1e-300:
                    for i in range(3):
                        start[i] = _PSEED2[i] if planar else _PSEED3[i]
                    break
                for i in range(3):
                    start[i] = g[i] / nrm
        elif r == 1:
            for i in range(3):
                start[i] = V[i]
            if planar:
                start[2] = 0.0
            nrm = _norm3(start)
            if nrm < 1e-300:
                start[0] = 1.0
                start[1] = 0.0
                start[2] = 0.0
            else:
                for i in range(3):
                    start[i] /= nrm
        else:
            for i in range(3):
                start[i] = _LAT2[r - 2][i] if planar else _LAT3[r - 2][i]
        for i in range(3):
            m[i] = start[i]
        for it in range(maxit):
            _matvec(A, m, Am)
            for i in range(3):
                up[i] = V[i] + Am[i]
                um[i] = V[i] - Am[i]
            nu = _norm3(up)
            nm = _norm3(um)
            if nu < 1e-300:
                nu = 1e-300
            if nm < 1e-300:
                nm = 1e-300
            for i in range(3):
                up[i] = up[i] / nu - um[i] / nm
            _matvec(A, up, g)
            if planar:
                g[2] = 0.0
            gn = _norm3(g)
            if gn < 1e-300:
                break
            d1 = 0.0
            d2 = 0.0
            for i in range(3):
                mn[i] = g[i] / gn
                if fabs(mn[i] - m[i]) > d1:
                    d1 = fabs(mn[i] - m[i])
                if fabs(mn[i] + m[i]) > d2:
                    d2 = fabs(mn[i] + m[i])
            for i in range(3):
                m[i] = mn[i]
            if d1 < tol or d2 < tol:
                break
        _matvec(A, m, Am)
        for i in range(3):
            up[i] = V[i] + Am[i]
            um[i] = V[i] - Am[i]
        obj = _norm3(up) + _norm3(um)
        if obj > best:
            best = obj
            for i in range(3):
                mout[i] = m[i]
    # canonical sign: largest-magnitude component positive
    lead = 0
    if fabs(mout[1]) > fabs(mout[lead]):
        lead = 1
    if fabs(mout[2]) > fabs(mout[lead]):
        lead = 2
    if mout[lead] < 0.0:
        for i in range(3):
            mout[i] = -mout[i]
    return best


def posterior_products(const double[:, ::1] nodes, const double[:, ::1] signed_axes):
    cdef Py_ssize_t S = nodes.shape[0]
    cdef Py_ssize_t k = signed_axes.shape[0]
    out_arr = np.ones(S)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t s, j
    with nogil:
        for s in range(S):
            for j in range(k):
                out[s] *= (1.0 + nodes[s, 0] * signed_axes[j, 0]
                           + nodes[s, 1] * signed_axes[j, 1]
                           + nodes[s, 2] * signed_axes[j, 2])
    return out_arr


def tangency_batch(V_in, A_in, bint planar=False, double tol=1e-9, int maxit=200):
    V_arr = np.ascontiguousarray(V_in, dtype=np.float64)
    A_arr = np.ascontiguousarray(A_in, dtype=np.float64)
    cdef const double[:, ::1] V = V_arr
    cdef const double[:, :, ::1] A = A_arr
    cdef Py_ssize_t B = V.shape[0]
    out_arr = np.empty((B, 3))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t b
    with nogil:
        for b in range(B):
            _tangency_one(&V[b, 0], &A[b, 0, 0], &out[b, 0], planar, tol, maxit)
    return out_arr


def random_scheme_run(const double[:, ::1] nodes, const double[:, ::1] wnodes,
                      const double[:, ::1] states, const double[:, :, ::1] axes,
                      const double[:, ::1] unif):
    cdef Py_ssize_t T = axes.shape[0]
    cdef Py_ssize_t N = axes.shape[1]
    cdef Py_ssize_t S = nodes.shape[0]
    fs_arr = np.empty(T)
    cdef double[::1] fs = fs_arr
    prod_arr = np.empty(S)
    cdef double[::1] prod = prod_arr
    cdef Py_ssize_t t, k, s
    cdef double pplus, sign, mx, my, mz, nv
    cdef double[3] V
    with nogil:
        for t in range(T):
            for s in range(S):
                prod[s] = 1.0
            for k in range(N):
                mx = axes[t, k, 0]
                my = axes[t, k, 1]
                mz = axes[t, k, 2]
                pplus = 0.5 * (1.0 + states[t, 0] * mx + states[t, 1] * my
                               + states[t, 2] * mz)
                sign = 1.0 if unif[t, k] < pplus else -1.0
                mx *= sign
                my *= sign
                mz *= sign
                for s in range(S):
                    prod[s] *= (1.0 + nodes[s, 0] * mx + nodes[s, 1] * my
                                + nodes[s, 2] * mz)
            V[0] = 0.0
            V[1] = 0.0
            V[2] = 0.0
            for s in range(S):
                V[0] += prod[s] * wnodes[s, 0]
                V[1] += prod[s] * wnodes[s, 1]
                V[2] += prod[s] * wnodes[s, 2]
            nv = _norm3(V)
            if nv < 1e-300:
                fs[t] = 0.5 * (1.0 + states[t, 2])
            else:
                fs[t] = 0.5 * (1.0 + (states[t, 0] * V[0] + states[t, 1] * V[1]
                                      + states[t, 2] * V[2]) / nv)
    return fs_arr


def greedy_mc_run(const double[:, ::1] nodes, const double[::1] weights,
                  const double[:, ::1] states, const double[:, ::1] unif,
                  bint planar=False, double tol=1e-8, int maxit=120):
    cdef Py_ssize_t T = states.shape[0]
    cdef Py_ssize_t N = unif.shape[1]
    cdef Py_ssize_t S = nodes.shape[0]
    wn_arr = np.asarray(weights)[:, None] * np.asarray(nodes)
    cdef double[:, ::1] wnodes = np.ascontiguousarray(wn_arr)
    fs_arr = np.empty(T)
    cdef double[::1] fs = fs_arr
    prod_arr = np.empty(S)
    cdef double[::1] prod = prod_arr
    cdef Py_ssize_t t, k, s
    cdef double pplus, sign, nv, w
    cdef double[3] V, m
    cdef double[9] A
    with nogil:
        for t in range(T):
            for s in range(S):
                prod[s] = 1.0
            for k in range(N):
                V[0] = 0.0
                V[1] = 0.0
                V[2] = 0.0
                for s in range(9):
                    A[s] = 0.0
                for s in range(S):
                    w = prod[s]
                    V[0] += w * wnodes[s, 0]
                    V[1] += w * wnodes[s, 1]
                    V[2] += w * wnodes[s, 2]
                    A[0] += wnodes[s, 0] * nodes[s, 0] * w
                    A[1] += wnodes[s, 0] * nodes[s, 1] * w
                    A[2] += wnodes[s, 0] * nodes[s, 2] * w
                    A[4] += wnodes[s, 1] * nodes[s, 1] * w
                    A[5] += wnodes[s, 1] * nodes[s, 2] * w
                    A[8] += wnodes[s, 2] * nodes[s, 2] * w
                A[3] = A[1]
                A[6] = A[2]
                A[7] = A[5]
                _tangency_one(V, A, m, planar, tol, maxit)
                pplus = 0.5 * (1.0 + states[t, 0] * m[0] + states[t, 1] * m[1]
                               + states[t, 2] * m[2])
                sign = 1.0 if unif[t, k] < pplus else -1.0
                m[0] *= sign
                m[1] *= sign
                m[2] *= sign
                for s in range(S):
                    prod[s] *= (1.0 + nodes[s, 0] * m[0] + nodes[s, 1] * m[1]
                                + nodes[s, 2] * m[2])
            V[0] = 0.0
            V[1] = 0.0
            V[2] = 0.0
            for s in range(S):
                V[0] += prod[s] * wnodes[s, 0]
                V[1] += prod[s] * wnodes[s, 1]
                V[2] += prod[s] * wnodes[s, 2]
            nv = _norm3(V)
            if nv < 1e-300:
                fs[t] = 0.5 * (1.0 + (states[t, 0] if planar else states[t, 2]))
            else:
                fs[t] = 0.5 * (1.0 + (states[t, 0] * V[0] + states[t, 1] * V[1]
                                      + states[t, 2] * V[2]) / nv)
    return fs_arr
