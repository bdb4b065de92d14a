"""Stratified fold assignment shared by outer CV and inner grid search."""
import numpy as np


def stratified_folds(labels, n_folds, seed):
    """List of test-index arrays partitioning ``range(len(labels))``.

    Each class is shuffled and dealt round-robin; the deal continues where the
    previous class stopped, so both per-class and total fold sizes differ by
    at most one.
    """
    labels = np.asarray(labels)
    if n_folds < 2:
        raise ValueError("need at least 2 folds")
    if len(labels) < n_folds:
        raise ValueError(f"cannot split {len(labels)} samples into {n_folds} folds")
    rng = np.random.default_rng(seed)
    buckets = [[] for _ in range(n_folds)]
    pos = 0
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        for i in rng.permutation(idx):
            buckets[pos % n_folds].append(int(i))
            pos += 1
    return [np.sort(np.array(b, dtype=np.int64)) for b in buckets]
