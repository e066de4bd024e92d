import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fjbounds.chain import dirichlet_chain
from fjbounds.spectral import normalize_eigenvector, perron_eigenpair


def _residual_ok(M, chi, r):
    return np.max(np.abs(M @ r - chi * r)) <= 1e-10 * chi * np.max(np.abs(r))


@pytest.mark.parametrize("k", [1, 2, 7, 64])
def test_stochastic_matrix(k):
    T = dirichlet_chain(k, np.random.default_rng(k)).transition
    chi, r = perron_eigenpair(T)
    assert chi == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(r, np.ones(k), atol=1e-10)


def test_bracketed_by_row_sums():
    M = np.array([[1.9, 0.1], [0.1, 0.9]])
    chi, r = perron_eigenpair(M)
    assert 1.0 <= chi <= 2.0
    assert chi == pytest.approx(max(np.linalg.eigvals(M).real), abs=1e-12)
    assert _residual_ok(M, chi, r) and np.all(r > 0) and r.max() == 1.0


def test_rank_one_identical_rows():
    p, m = np.array([0.3, 0.7]), np.array([1.4, 0.8])
    M = np.tile(p * m, (2, 1))
    chi, r = perron_eigenpair(M)
    assert chi == pytest.approx(0.3 * 1.4 + 0.7 * 0.8, abs=1e-14)


def test_periodic_pattern_uses_shift():
    M = np.array([[0.0, 2.0], [0.5, 0.0]])
    chi, r = perron_eigenpair(M)
    assert chi == pytest.approx(1.0, abs=1e-10)
    assert _residual_ok(M, chi, r)


@settings(max_examples=50, deadline=None)
@given(k=st.integers(2, 30), seed=st.integers(0, 2**32 - 1), scale=st.floats(0.01, 100))
def test_against_dense_eigensolver_and_scale_equivariance(k, seed, scale):
    rng = np.random.default_rng(seed)
    M = dirichlet_chain(k, rng).transition * rng.uniform(0.2, 3.0, k)[None, :]
    chi, r = perron_eigenpair(M)
    assert chi == pytest.approx(max(np.linalg.eigvals(M).real), rel=1e-10)
    assert _residual_ok(M, chi, r) and np.all(r > 0)
    chi2, r2 = perron_eigenpair(scale * M)
    assert chi2 == pytest.approx(scale * chi, rel=1e-10)
    np.testing.assert_allclose(r2, r, rtol=1e-8)


@pytest.mark.parametrize("r, w, expected", [
    ([2, 2], [0.5, 0.5], [1, 1]),
    ([1, 3], [0.25, 0.75], [0.4, 1.2]),
    ([7], [1], [1]),
])
def test_normalize(r, w, expected):
    np.testing.assert_allclose(normalize_eigenvector(r, w), expected, rtol=1e-15)


def test_normalize_rejects_zero():
    with pytest.raises(ValueError):
        normalize_eigenvector([1.0, 1.0], [0.0, 0.0])


def test_rejects_negative():
    with pytest.raises(ValueError):
        perron_eigenpair([[1.0, -0.1], [0.2, 0.5]])
