from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..errors import ConvergenceError
from ..folds import stratified_folds
from .scaling import fit_scaler
from .svm import DEFAULT_TOL, svm_predict, svm_train


def _pow2(lo, hi, step):
    return tuple(float(2.0 ** e) for e in range(lo, hi + 1, step))


@dataclass(frozen=True)
class GridSearchSpec:
    """Exponential (C, gamma) grid; ties go to the smallest C, then the largest gamma."""

    C_grid: tuple = _pow2(-5, 15, 2)
    gamma_grid: tuple = _pow2(-15, 3, 2)
    inner_folds: int = 5
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        if not self.C_grid or not self.gamma_grid:
            raise ValueError("grid must be non-empty")
        object.__setattr__(self, "C_grid", tuple(float(c) for c in self.C_grid))
        object.__setattr__(self, "gamma_grid", tuple(float(g) for g in self.gamma_grid))

    def cells(self):
        """(C, gamma) pairs in tie-break priority order."""
        return [(C, g) for C in sorted(self.C_grid) for g in sorted(self.gamma_grid, reverse=True)]


def cv_accuracy(X, y, C, gamma, folds, tol=DEFAULT_TOL):
    """Mean held-out accuracy, scaler refit on each training split."""
    accs = []
    for test in folds:
        train = np.setdiff1d(np.arange(len(y)), test)
        if len(np.unique(y[train])) < 2:
            accs.append(float(np.mean(y[test] == y[train][0])))
            continue
        sc = fit_scaler(X[train])
        model = svm_train(sc.apply(X[train]), y[train], C, gamma, tol=tol)
        accs.append(float(np.mean(svm_predict(model, sc.apply(X[test])) == y[test])))
    return float(np.mean(accs))


def grid_search(X, y, spec=GridSearchSpec(), seed=0, jobs=1, return_scores=False):
    """Pick (C, gamma) by inner stratified CV on the training data only."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y)
    cells = spec.cells()
    if len(cells) == 1 and not return_scores:
        return cells[0]
    folds = stratified_folds(y, spec.inner_folds, seed)

    def score(cell):
        try:
            return cv_accuracy(X, y, cell[0], cell[1], folds, spec.tol)
        except ConvergenceError:
            return np.nan

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            scores = list(pool.map(score, cells))
    else:
        scores = [score(c) for c in cells]
    failed = [c for c, v in zip(cells, scores) if np.isnan(v)]
    if len(failed) == len(cells):
        raise ConvergenceError("SMO hit its iteration cap in every grid cell")
    if failed:
        warnings.warn(f"grid search: {len(failed)} cell(s) skipped, SMO hit its iteration cap "
                      f"(first: C={failed[0][0]:g}, gamma={failed[0][1]:g})", RuntimeWarning, stacklevel=2)
    best = int(np.nanargmax(scores))  # first maximum = tie-break winner
    return (cells[best], scores) if return_scores else cells[best]
