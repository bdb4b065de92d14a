import numpy as np
import pytest
from hypothesis import given, strategies as st

from eigtopo.eigenfeat import (ChannelStack, GramSpectrum, center, channel_spectra, extract_features, gram_spectrum,
                               top_k)
from eigtopo.errors import NumericalError
from eigtopo.eigenfeat import _check_spectrum
from eigtopo.topomap import TopomapStack


def _stack(d, n, seed):
    return ChannelStack(np.random.default_rng(seed).random((d, n)))


def test_center_removes_mean_frame():
    cs = center(ChannelStack(np.array([[1.0, 3.0], [2.0, 2.0]])))
    np.testing.assert_array_equal(cs.mean, [2.0, 2.0])
    np.testing.assert_array_equal(cs.phi, [[-1.0, 1.0], [0.0, 0.0]])


def test_two_frame_spectrum_by_hand():
    # phi = [[-1, 1], [0, 0]] -> phi^T phi = [[1, -1], [-1, 1]], eigenvalues 2 and 0
    spec = gram_spectrum(center(ChannelStack(np.array([[1.0, 3.0], [2.0, 2.0]]))))
    assert spec.side_used == "gram_n"
    np.testing.assert_allclose(spec.eigenvalues, [2.0, 0.0], atol=1e-15)


def test_unnormalised_scatter():
    # n identical-offset frames: no 1/(n-1) factor on the eigenvalues
    A = np.array([[0.0, 1.0, 2.0, 3.0]])
    spec = gram_spectrum(center(ChannelStack(A)))
    assert spec.side_used == "covariance_d"
    np.testing.assert_allclose(spec.eigenvalues, [5.0])  # sum of (x - 1.5)^2


@given(st.integers(1, 40), st.integers(1, 30), st.integers(0, 2**32 - 1))
def test_gram_and_covariance_sides_agree(d, n, seed):
    cs = center(_stack(d, n, seed))
    spec = gram_spectrum(cs)
    other = np.linalg.eigvalsh(cs.phi @ cs.phi.T if spec.side_used == "gram_n" else cs.phi.T @ cs.phi)[::-1]
    r = min(d, n)
    lam1 = max(spec.eigenvalues[0], 1e-300)
    np.testing.assert_allclose(spec.eigenvalues[:r], np.maximum(other[:r], 0), atol=1e-9 * lam1)


@given(st.integers(1, 50), st.integers(1, 30), st.integers(0, 2**32 - 1))
def test_trace_identity_and_structural_zero(d, n, seed):
    cs = center(_stack(d, n, seed))
    spec = gram_spectrum(cs)
    frob = float(np.sum(cs.phi ** 2))
    assert abs(spec.eigenvalues.sum() - frob) <= 1e-9 * max(frob, 1e-300)
    if spec.side_used == "gram_n" and n >= 2:
        assert spec.eigenvalues[-1] <= 1e-9 * spec.eigenvalues[0]
    assert np.all(np.diff(spec.eigenvalues) <= 0)
    assert np.all(spec.eigenvalues >= 0)


def test_iterative_path_matches_dense(rng):
    cs = center(ChannelStack(rng.random((400, 150))))
    dense = gram_spectrum(cs)
    it = gram_spectrum(cs, dense_max=100, k_max=20)
    assert not it.complete and len(it.eigenvalues) == 20
    np.testing.assert_allclose(it.eigenvalues, dense.eigenvalues[:20], rtol=1e-6)


def test_check_spectrum_flags_violations():
    with pytest.raises(NumericalError):
        _check_spectrum(np.array([2.0, 0.0]), 3.0, "gram_n", 2, True)
    with pytest.raises(NumericalError):
        _check_spectrum(np.array([2.0, 1.0]), 3.0, "gram_n", 2, True)


def test_top_k_rules():
    spec = GramSpectrum(np.array([5.0, 3.0, 1.0, 0.0]), "gram_n", 4)
    np.testing.assert_array_equal(top_k(spec, 2), [5.0, 3.0])
    np.testing.assert_array_equal(top_k(spec, 3), [5.0, 3.0, 1.0])
    with pytest.raises(ValueError):
        top_k(spec, 4)  # needs n >= k + 1
    with pytest.raises(ValueError):
        top_k(spec, 0)
    big = GramSpectrum(np.ones(200), "gram_n", 200)
    with pytest.raises(ValueError):
        top_k(big, 100)
    assert len(top_k(big, 99)) == 99


def test_top_k_pads_rank_deficient_side():
    # d = 2 pixels, n = 10 frames: scatter rank <= 2, remaining eigenvalues are exactly zero
    spec = GramSpectrum(np.array([4.0, 1.0]), "covariance_d", 10)
    np.testing.assert_array_equal(top_k(spec, 5), [4.0, 1.0, 0.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        top_k(GramSpectrum(np.array([4.0, 1.0]), "gram_n", 10, complete=False), 5)


def test_extract_features_rgb_order(rng):
    stack = TopomapStack("Q01", 16, rng.random((12, 200)), 1.0)
    fv = extract_features(stack, "Correct", 3)
    spectra = channel_spectra(stack)
    for c in "RGB":
        np.testing.assert_array_equal(fv.channel(c), spectra[c].eigenvalues[:3])
    np.testing.assert_array_equal(fv.rgb(), np.concatenate([fv.features_r, fv.features_g, fv.features_b]))


def test_constant_stack_has_zero_spectrum():
    stack = TopomapStack("Q", 16, np.full((5, 200), 0.5), 1.0)
    for spec in channel_spectra(stack).values():
        np.testing.assert_array_equal(spec.eigenvalues, 0.0)


def test_frame_permutation_invariance(rng):
    A = rng.random((30, 12))
    s1 = gram_spectrum(center(ChannelStack(A)))
    s2 = gram_spectrum(center(ChannelStack(A[:, rng.permutation(12)])))
    np.testing.assert_allclose(s1.eigenvalues, s2.eigenvalues, atol=1e-12)
