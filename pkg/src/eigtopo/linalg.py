"""Symmetric eigenvalue solvers.

``eigvalsh_dense`` reduces the matrix to tridiagonal form with Householder
reflections and then runs implicit Wilkinson-shift QR sweeps on the
tridiagonal; it returns the full spectrum. ``eigvalsh_topk`` is a randomized
block subspace iteration for the leading eigenvalues of a PSD operator that
is only available through matrix products.
"""
from __future__ import annotations

import math

import numba
import numpy as np

from .errors import ConvergenceError

@numba.njit(cache=True)
def _tridiagonalize(a):
    """Overwrites ``a`` (symmetric) and returns its tridiagonal (diag, offdiag)."""
    n = a.shape[0]
    e = np.zeros(max(n - 1, 0))
    v = np.zeros(n)
    p = np.zeros(n)
    for k in range(n - 2):
        norm = 0.0
        for i in range(k + 1, n):
            norm += a[i, k] * a[i, k]
        norm = math.sqrt(norm)
        if norm == 0.0:
            e[k] = 0.0
            continue
        alpha = -norm if a[k + 1, k] >= 0.0 else norm
        vn = 0.0
        for i in range(k + 1, n):
            v[i] = a[i, k]
        v[k + 1] -= alpha
        for i in range(k + 1, n):
            vn += v[i] * v[i]
        vn = math.sqrt(vn)
        if vn == 0.0:
            e[k] = a[k + 1, k]
            continue
        for i in range(k + 1, n):
            v[i] /= vn
        kk = 0.0
        for i in range(k + 1, n):
            s = 0.0
            for j in range(k + 1, n):
                s += a[i, j] * v[j]
            p[i] = 2.0 * s
            kk += v[i] * p[i]
        for i in range(k + 1, n):
            p[i] -= kk * v[i]  # p now holds w
        for i in range(k + 1, n):
            vi = v[i]
            wi = p[i]
            for j in range(k + 1, n):
                a[i, j] -= vi * p[j] + wi * v[j]
        e[k] = alpha
    if n >= 2:
        e[n - 2] = a[n - 1, n - 2]
    d = np.empty(n)
    for i in range(n):
        d[i] = a[i, i]
    return d, e


@numba.njit(cache=True)
def _qr_sweep(d, e, lo, hi):
    """One implicit Wilkinson-shift QR step on the unreduced block d[lo..hi]."""
    a = d[hi - 1]
    b = e[hi - 1]
    c = d[hi]
    delta = 0.5 * (a - c)
    if delta == 0.0:
        mu = c - abs(b)
    else:
        mu = c - b * b / (delta + math.copysign(math.hypot(delta, b), delta))
    x = d[lo] - mu
    z = e[lo]
    for k in range(lo, hi):
        r = math.hypot(x, z)
        if r == 0.0:
            cs, sn = 1.0, 0.0
        else:
            cs, sn = x / r, z / r
        if k > lo:
            e[k - 1] = r
        dk, dk1, ek = d[k], d[k + 1], e[k]
        d[k] = cs * cs * dk + 2.0 * cs * sn * ek + sn * sn * dk1
        d[k + 1] = sn * sn * dk - 2.0 * cs * sn * ek + cs * cs * dk1
        e[k] = cs * sn * (dk1 - dk) + (cs * cs - sn * sn) * ek
        if k < hi - 1:
            x = e[k]
            z = sn * e[k + 1]
            e[k + 1] = cs * e[k + 1]


@numba.njit(cache=True)
def _tridiagonal_eigvals(d, e, max_sweeps):
    """Eigenvalues of the symmetric tridiagonal (d, e), in place. Returns sweeps used or -1."""
    n = d.shape[0]
    sweeps = 0
    hi = n - 1
    while hi > 0:
        for i in range(hi):
            if abs(e[i]) <= 2.2e-16 * (abs(d[i]) + abs(d[i + 1])) or abs(e[i]) < 1e-300:
                e[i] = 0.0
        if e[hi - 1] == 0.0:
            hi -= 1
            continue
        lo = hi - 1
        while lo > 0 and e[lo - 1] != 0.0:
            lo -= 1
        if sweeps >= max_sweeps:
            return -1
        _qr_sweep(d, e, lo, hi)
        sweeps += 1
    return sweeps


def tridiagonalize(a):
    a = np.array(a, dtype=np.float64, copy=True)
    return _tridiagonalize(a)


def tridiagonal_eigvals(d, e, max_sweeps=None):
    d = np.array(d, dtype=np.float64, copy=True)
    e = np.array(e, dtype=np.float64, copy=True)
    n = len(d)
    max_sweeps = 30 * max(n, 1) if max_sweeps is None else max_sweeps
    used = _tridiagonal_eigvals(d, e, max_sweeps)
    if used < 0:
        raise ConvergenceError(f"tridiagonal QR did not converge within {max_sweeps} sweeps", max_sweeps)
    return d


def eigvalsh_dense(a, max_sweeps=None):
    """All eigenvalues of a real symmetric matrix, descending."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    n = a.shape[0]
    if n == 0:
        return np.empty(0)
    scale = np.max(np.abs(a))
    if scale == 0.0 or not np.isfinite(scale):
        if scale == 0.0:
            return np.zeros(n)
        raise ValueError("matrix has non-finite entries")
    sym = 0.5 * (a + a.T) / scale
    d, e = _tridiagonalize(np.ascontiguousarray(sym))
    w = tridiagonal_eigvals(d, e, max_sweeps)
    return np.sort(w)[::-1] * scale


def _as_operator(a):
    if callable(a):
        return a
    a = np.asarray(a, dtype=np.float64)
    return lambda x: a @ x


def eigvalsh_topk(a, k, n=None, oversample=10, min_iter=2, tol=1e-12, max_iter=2000, seed=0):
    """Leading ``k`` eigenvalues of a symmetric PSD operator, descending.

    ``a`` is a matrix or a callable ``X -> A @ X`` (then ``n`` is required).
    Block subspace iteration with re-orthonormalisation and Rayleigh-Ritz;
    stops once at least ``min_iter`` power steps are done and the top-k Ritz
    values move by less than ``tol`` relative to the largest.
    """
    op = _as_operator(a)
    if n is None:
        n = np.asarray(a).shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}]")
    block = min(n, k + oversample)
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(op(rng.standard_normal((n, block))))
    prev = None
    for it in range(1, max_iter + 1):
        z = op(q)
        t = q.T @ z
        ritz = eigvalsh_dense(0.5 * (t + t.T))[:k]
        top = abs(ritz[0])
        if top == 0.0:
            return np.zeros(k)
        if block == n:  # the subspace is the whole space, Ritz values are exact
            return np.maximum(ritz, 0.0)
        if prev is not None and it >= min_iter and np.max(np.abs(ritz - prev)) <= tol * top:
            return np.maximum(ritz, 0.0)
        prev = ritz
        q, _ = np.linalg.qr(z)
    raise ConvergenceError(f"subspace iteration did not converge within {max_iter} iterations", max_iter)
