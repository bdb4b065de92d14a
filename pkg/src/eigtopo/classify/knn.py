from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class KnnModel:
    """Euclidean K-nearest-neighbour vote over labels in {+1, -1}."""

    X: np.ndarray
    y: np.ndarray
    K: int = 5

    def __post_init__(self):
        if len(self.X) == 0:
            raise ValueError("KNN needs training data")
        if not 1 <= self.K <= len(self.X):
            raise ValueError(f"K must lie in [1, {len(self.X)}]")


def knn_fit(X, y, K):
    return KnnModel(np.atleast_2d(np.asarray(X, dtype=np.float64)), np.asarray(y, dtype=np.int64), int(K))


def knn_predict(model, x):
    """Majority label of the K nearest training points.

    Equal distances are ordered by training index. A split vote (only
    possible for even K) goes to the single nearest neighbour.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    Q = np.atleast_2d(x)
    d2 = ((Q[:, None, :] - model.X[None, :, :]) ** 2).sum(-1)
    order = np.argsort(d2, axis=1, kind="stable")[:, : model.K]
    votes = model.y[order].sum(axis=1)
    out = np.where(votes > 0, 1, -1)
    out = np.where(votes == 0, model.y[order[:, 0]], out)
    return int(out[0]) if single else out
