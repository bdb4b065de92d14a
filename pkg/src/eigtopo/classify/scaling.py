from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ScalingTransform:
    """Per-feature affine map of the training range onto [0, 1].

    Constant training features map to 0. Test values outside the training
    range are extrapolated, not clipped.
    """

    mins: np.ndarray
    maxs: np.ndarray

    def apply(self, X):
        X = np.asarray(X, dtype=np.float64)
        span = self.maxs - self.mins
        safe = np.where(span > 0, span, 1.0)
        out = (X - self.mins) / safe
        return np.where(span > 0, out, 0.0)

    def to_dict(self):
        return {"mins": self.mins.tolist(), "maxs": self.maxs.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["mins"], dtype=np.float64), np.asarray(d["maxs"], dtype=np.float64))


def fit_scaler(X):
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    return ScalingTransform(X.min(axis=0), X.max(axis=0))


def apply_scaler(scaler, X):
    return scaler.apply(X)
