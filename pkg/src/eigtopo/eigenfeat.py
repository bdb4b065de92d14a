"""Eigenvalue features of a question's topomap stack.

Each colour plane of the n frames is flattened into the columns of a d x n
matrix A. After removing the mean frame (phi = A - m 1^T) the features are
the largest eigenvalues of the scatter matrix phi phi^T. Its nonzero
spectrum equals that of the n x n Gram matrix phi^T phi, so whichever of
the two is smaller gets decomposed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .linalg import eigvalsh_dense, eigvalsh_topk
from .topomap import CHANNELS

MAX_K = 100  # features are the k < 100 largest eigenvalues
DENSE_MAX = 2000
TRACE_RTOL = 1e-9
ZERO_RTOL = 1e-9


@dataclass(frozen=True)
class ChannelStack:
    A: np.ndarray
    color: str = "R"

    @property
    def d(self):
        return self.A.shape[0]

    @property
    def n(self):
        return self.A.shape[1]


@dataclass(frozen=True)
class CenteredStack:
    phi: np.ndarray
    mean: np.ndarray


@dataclass(frozen=True)
class GramSpectrum:
    eigenvalues: np.ndarray  # descending, >= 0
    side_used: str  # "gram_n" or "covariance_d"
    n: int
    complete: bool = True


@dataclass(frozen=True)
class EigenFeatureVector:
    question_id: str
    label: str
    k: int
    features_r: np.ndarray
    features_g: np.ndarray
    features_b: np.ndarray

    def channel(self, color):
        return {"R": self.features_r, "G": self.features_g, "B": self.features_b}[color]

    def rgb(self):
        return np.concatenate([self.features_r, self.features_g, self.features_b])


def stack_channel(stack, color):
    if stack.n < 1:
        raise ValueError("empty stack")
    return ChannelStack(stack.channel(color), color)


def center(cs):
    A = np.asarray(cs.A, dtype=np.float64)
    if A.shape[1] < 1:
        raise ValueError("need at least one column")
    m = A.mean(axis=1)
    return CenteredStack(A - m[:, None], m)


def gram_spectrum(cs, dense_max=DENSE_MAX, k_max=MAX_K, seed=0):
    """Spectrum of the smaller of phi^T phi (n x n) and phi phi^T (d x d).

    Sizes up to ``dense_max`` get the full spectrum from the dense solver;
    larger ones get only the leading ``k_max`` values from subspace iteration
    (``complete=False``). No 1/(n-1) normalisation is applied.
    """
    phi = np.asarray(cs.phi, dtype=np.float64)
    d, n = phi.shape
    side = "gram_n" if n <= d else "covariance_d"
    size = min(n, d)
    frob2 = float(np.sum(phi * phi))
    if size <= dense_max:
        gram = phi.T @ phi if side == "gram_n" else phi @ phi.T
        lam = np.maximum(eigvalsh_dense(gram), 0.0)
        complete = True
    else:
        if side == "gram_n":
            op = lambda x: phi.T @ (phi @ x)  # noqa: E731
        else:
            op = lambda x: phi @ (phi.T @ x)  # noqa: E731
        lam = eigvalsh_topk(op, min(k_max, size), n=size, seed=seed)
        complete = False
    _check_spectrum(lam, frob2, side, n, complete)
    lam.setflags(write=False)
    return GramSpectrum(lam, side, n, complete)


def _check_spectrum(lam, frob2, side, n, complete):
    total = float(lam.sum())
    if complete:
        if abs(total - frob2) > TRACE_RTOL * max(frob2, np.finfo(float).tiny):
            raise NumericalError(f"trace identity violated: sum(lambda)={total!r}, |phi|_F^2={frob2!r}")
        if side == "gram_n" and n >= 2 and lam[0] > 0 and lam[-1] > ZERO_RTOL * lam[0]:
            raise NumericalError("centred Gram matrix lost its structural zero eigenvalue")
    elif total > frob2 * (1 + TRACE_RTOL):
        raise NumericalError("leading eigenvalues exceed the total scatter")


def top_k(spec, k, k_limit=MAX_K):
    """The k largest eigenvalues. Needs 1 <= k < k_limit and k <= n - 1.

    Beyond the decomposed side's length the spectrum is exactly zero (the
    scatter matrix has rank at most min(d, n - 1)), so it is zero-padded.
    """
    if not 1 <= k < k_limit:
        raise ValueError(f"k must satisfy 1 <= k < {k_limit}, got {k}")
    if k > spec.n - 1:
        raise ValueError(f"k={k} needs at least {k + 1} topomaps, question has {spec.n}")
    lam = np.asarray(spec.eigenvalues)
    if k > len(lam):
        if not spec.complete:
            raise ValueError(f"only {len(lam)} leading eigenvalues were computed")
        lam = np.concatenate([lam, np.zeros(k - len(lam))])
    return lam[:k].copy()


def channel_spectra(stack, dense_max=DENSE_MAX, k_max=MAX_K, seed=0):
    """GramSpectrum per colour plane, keyed "R", "G", "B"."""
    return {c: gram_spectrum(center(stack_channel(stack, c)), dense_max, k_max, seed) for c in CHANNELS}


def extract_features(stack, label, k, dense_max=DENSE_MAX, seed=0):
    spectra = channel_spectra(stack, dense_max, max(k, 1), seed)
    f = {c: top_k(s, k) for c, s in spectra.items()}
    return EigenFeatureVector(stack.question_id, str(label), k, f["R"], f["G"], f["B"])
