"""Binary RBF-kernel SVM trained by sequential minimal optimisation.

The dual is solved in the minimisation form

    min_a  1/2 a^T Q a - 1^T a,   0 <= a_i <= C,   y^T a = 0,
    Q_ij = y_i y_j exp(-gamma |x_i - x_j|^2)

by repeatedly optimising a KKT-violating pair analytically: i is the maximal
violator, j the partner with the largest second-order gain.
Kernel rows are computed on first use and cached.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numba
import numpy as np

from ..errors import ConvergenceError
from .scaling import ScalingTransform

TAU = 1e-12
DEFAULT_TOL = 1e-3
DEFAULT_MAX_ITER = 1_000_000


@numba.njit(cache=True, nogil=True)
def _kernel_row(X, i, gamma, out):
    n, p = X.shape
    for j in range(n):
        s = 0.0
        for f in range(p):
            t = X[i, f] - X[j, f]
            s += t * t
        out[j] = math.exp(-gamma * s)


@numba.njit(cache=True, nogil=True)
def _smo(X, y, C, gamma, tol, max_iter, trace):
    n = X.shape[0]
    alpha = np.zeros(n)
    grad = -np.ones(n)  # Q a - 1 at a = 0
    cache = np.empty((n, n))
    have = np.zeros(n, dtype=np.bool_)
    n_trace = trace.shape[0]
    it = 0
    while True:
        # i: maximal violator in I_up; stop when the maximal violating pair gap < tol
        m_val = -np.inf
        M_val = np.inf
        i = -1
        for t in range(n):
            v = -y[t] * grad[t]
            up = (y[t] > 0 and alpha[t] < C) or (y[t] < 0 and alpha[t] > 0)
            low = (y[t] < 0 and alpha[t] < C) or (y[t] > 0 and alpha[t] > 0)
            if up and v > m_val:
                m_val = v
                i = t
            if low and v < M_val:
                M_val = v
        if i < 0 or M_val == np.inf or m_val - M_val < tol:
            return alpha, grad, it, True
        if it >= max_iter:
            return alpha, grad, it, False
        if not have[i]:
            _kernel_row(X, i, gamma, cache[i])
            have[i] = True
        Ki = cache[i]
        # j: second-order choice, largest guaranteed decrease among violators in I_low
        j = -1
        best = np.inf
        for t in range(n):
            low = (y[t] < 0 and alpha[t] < C) or (y[t] > 0 and alpha[t] > 0)
            if not low:
                continue
            b = m_val + y[t] * grad[t]
            if b <= 0.0:
                continue
            a = Ki[i] + 1.0 - 2.0 * Ki[t]  # K_tt = 1 for the RBF kernel
            if a <= 0.0:
                a = TAU
            score = -b * b / a
            if score < best:
                best = score
                j = t
        if not have[j]:
            _kernel_row(X, j, gamma, cache[j])
            have[j] = True
        Kj = cache[j]
        M_sel = -y[j] * grad[j]
        eta = Ki[i] + Kj[j] - 2.0 * Ki[j]
        if eta <= 0.0:
            eta = TAU
        step = (m_val - M_sel) / eta
        # a_i += y_i t, a_j -= y_j t, t > 0
        lim_i = C - alpha[i] if y[i] > 0 else alpha[i]
        lim_j = alpha[j] if y[j] > 0 else C - alpha[j]
        if step > lim_i:
            step = lim_i
        if step > lim_j:
            step = lim_j
        ai = alpha[i] + y[i] * step
        aj = alpha[j] - y[j] * step
        # snap to the box so bound detection is exact
        if step == lim_i:
            ai = C if y[i] > 0 else 0.0
        if step == lim_j:
            aj = 0.0 if y[j] > 0 else C
        alpha[i] = ai
        alpha[j] = aj
        for t in range(n):
            grad[t] += y[t] * step * (Ki[t] - Kj[t])
        if it < n_trace:
            obj = 0.0
            for t in range(n):
                obj += alpha[t] * (1.0 - grad[t])
            trace[it] = 0.5 * obj  # dual objective -1/2 a^T (grad - 1)
        it += 1


def _bias(alpha, grad, y, C):
    r = -y * grad
    free = (alpha > 0) & (alpha < C)
    if free.any():
        return float(r[free].mean())
    up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
    low = ((y < 0) & (alpha < C)) | ((y > 0) & (alpha > 0))
    hi = r[up].max() if up.any() else r.max()
    lo = r[low].min() if low.any() else r.min()
    return float(0.5 * (hi + lo))


@dataclass(frozen=True)
class SvmModel:
    support_vectors: np.ndarray
    dual_coef: np.ndarray  # alpha_i * y_i
    alpha: np.ndarray
    b: float
    C: float
    gamma: float
    iterations: int = 0
    objective_trace: np.ndarray | None = None

    def decision_function(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if len(self.support_vectors) == 0:
            return np.full(len(X), self.b)
        d2 = ((X[:, None, :] - self.support_vectors[None, :, :]) ** 2).sum(-1)
        return np.exp(-self.gamma * d2) @ self.dual_coef + self.b

    def to_dict(self):
        return {
            "kernel": "rbf",
            "C": self.C,
            "gamma": self.gamma,
            "b": self.b,
            "support_vectors": self.support_vectors.tolist(),
            "alpha": self.alpha.tolist(),
            "dual_coef": self.dual_coef.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        sv = np.asarray(d["support_vectors"], dtype=np.float64).reshape(len(d["alpha"]), -1)
        return cls(sv, np.asarray(d["dual_coef"], dtype=np.float64), np.asarray(d["alpha"], dtype=np.float64),
                   float(d["b"]), float(d["C"]), float(d["gamma"]))


def svm_train(X, y, C, gamma, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, debug=False):
    """Fit on labels in {+1, -1}. ``debug`` records the dual objective per iteration."""
    X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=np.float64)))
    y = np.asarray(y, dtype=np.float64)
    if set(np.unique(y)) != {-1.0, 1.0}:
        raise ValueError("SVM training needs both classes, labelled +1 and -1")
    if not (C > 0 and gamma > 0):
        raise ValueError("C and gamma must be positive")
    trace = np.empty(min(max_iter, 200_000) if debug else 0)
    alpha, grad, iters, ok = _smo(X, y, float(C), float(gamma), float(tol), int(max_iter), trace)
    if not ok:
        raise ConvergenceError(f"SMO did not reach KKT tolerance {tol} within {max_iter} iterations", iters)
    sv = alpha > 0
    return SvmModel(
        support_vectors=X[sv],
        dual_coef=alpha[sv] * y[sv],
        alpha=alpha[sv],
        b=_bias(alpha, grad, y, C),
        C=float(C),
        gamma=float(gamma),
        iterations=int(iters),
        objective_trace=trace[: min(iters, len(trace))] if debug else None,
    )


def svm_train_full(X, y, C, gamma, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """Raw solver output ``(alpha, grad, iterations)`` over all training points."""
    X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=np.float64)))
    y = np.asarray(y, dtype=np.float64)
    alpha, grad, iters, ok = _smo(X, y, float(C), float(gamma), float(tol), int(max_iter), np.empty(0))
    if not ok:
        raise ConvergenceError(f"SMO did not reach KKT tolerance {tol} within {max_iter} iterations", iters)
    return alpha, grad, iters


def dual_objective(alpha, X, y, gamma):
    """sum(a) - 1/2 sum_ij a_i a_j y_i y_j K_ij."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    d2 = ((X[:, None, :] - X[None, :, :]) ** 2).sum(-1)
    ay = np.asarray(alpha) * np.asarray(y)
    return float(np.sum(alpha) - 0.5 * ay @ np.exp(-gamma * d2) @ ay)


def svm_decision(model, X):
    return model.decision_function(X)


def svm_predict(model, X):
    """Sign of the decision function; an exact zero maps to -1 (Incorrect)."""
    f = model.decision_function(X)
    out = np.where(f > 0, 1, -1)
    return int(out[0]) if np.asarray(X).ndim == 1 else out


def save_model(path, model, scaler=None):
    doc = {"format": "eigtopo-svm", "version": 1, "model": model.to_dict(),
           "scaler": scaler.to_dict() if scaler is not None else None}
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True)


def load_model(path):
    with open(path) as fh:
        doc = json.load(fh)
    scaler = ScalingTransform.from_dict(doc["scaler"]) if doc.get("scaler") else None
    return SvmModel.from_dict(doc["model"]), scaler
