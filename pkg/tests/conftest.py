import functools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

import eigtopo.classify.svm as _svm
import eigtopo.eigenfeat as _eigenfeat

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}

# Session-wide audits. Every spectrum extraction and every SMO solve made by any
# test is re-checked here, independently of the checks inside the package.
AUDIT = {"spectra": 0, "trace_worst": 0.0, "zero_worst": 0.0, "smo": 0, "smo_worst": 0.0}


def record(criterion, passed, detail):
    ACCEPTANCE[criterion] = (bool(passed), detail)


def _audit_spectrum(cs, spec):
    phi = np.asarray(cs.phi, dtype=np.float64)
    lam = np.asarray(spec.eigenvalues)
    AUDIT["spectra"] += 1
    if not spec.complete:
        return
    frob = float(np.sum(phi * phi))
    if frob > 0:
        AUDIT["trace_worst"] = max(AUDIT["trace_worst"], abs(lam.sum() - frob) / frob)
    # a covariance-side spectrum (n > d) implies an exactly singular n x n Gram matrix
    if spec.side_used == "gram_n" and spec.n >= 2 and lam[0] > 0:
        AUDIT["zero_worst"] = max(AUDIT["zero_worst"], lam[-1] / lam[0])


def _wrap_gram(fn):
    @functools.wraps(fn)
    def inner(cs, *a, **kw):
        spec = fn(cs, *a, **kw)
        _audit_spectrum(cs, spec)
        return spec
    return inner


def _wrap_smo(fn):
    @functools.wraps(fn)
    def inner(X, y, C, gamma, tol, max_iter, trace):
        out = fn(X, y, C, gamma, tol, max_iter, trace)
        alpha = out[0]
        viol = max(float(-alpha.min()), float(alpha.max() - C), abs(float(alpha @ y)), 0.0) / C
        AUDIT["smo"] += 1
        AUDIT["smo_worst"] = max(AUDIT["smo_worst"], viol)
        return out
    return inner


_eigenfeat.gram_spectrum = _wrap_gram(_eigenfeat.gram_spectrum)
_svm._smo = _wrap_smo(_svm._smo)


def pytest_collection_modifyitems(items):
    # acceptance runs last so the audits cover every other test's extractions and solves
    items.sort(key=lambda it: "test_acceptance.py::" in it.nodeid)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for c in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[c]
        terminalreporter.write_line(f"criterion {c:>2}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
