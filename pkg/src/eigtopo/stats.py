"""Welch's unequal-variance two-sample t-test."""
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import betainc


@dataclass(frozen=True)
class TTestResult:
    t: float
    df: float
    p: float
    mean_a: float
    mean_b: float
    std_a: float
    std_b: float
    n_a: int
    n_b: int

    def to_dict(self):
        return asdict(self)


def t_two_sided_p(t, df):
    """P(|T| >= |t|) for Student's t with ``df`` degrees of freedom."""
    return float(np.clip(betainc(0.5 * df, 0.5, df / (df + t * t)), 0.0, 1.0))


def independent_t_test(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if len(a) < 2 or len(b) < 2:
        raise ValueError("each group needs at least two values")
    va = a.var(ddof=1) / len(a)
    vb = b.var(ddof=1) / len(b)
    se2 = va + vb
    if se2 == 0:
        raise ValueError("both groups have zero variance")
    diff = a.mean() - b.mean()
    t = diff / np.sqrt(se2)
    df = se2 ** 2 / (va ** 2 / (len(a) - 1) + vb ** 2 / (len(b) - 1))
    return TTestResult(
        t=float(t), df=float(df), p=t_two_sided_p(float(t), float(df)),
        mean_a=float(a.mean()), mean_b=float(b.mean()),
        std_a=float(a.std(ddof=1)), std_b=float(b.std(ddof=1)),
        n_a=len(a), n_b=len(b),
    )
