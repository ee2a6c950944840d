import numpy as np
import pytest
from hypothesis import given, settings, strategies as hst

from state_shadows.errors import NonHermitianError
from state_shadows.linalg import (
    eigvalsh,
    hermitian_eig,
    hermitian_part,
    householder_tridiagonalize,
    is_psd,
    kron,
    operator_norm,
    trace_norm,
)


def random_hermitian(d, rng):
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return (g + g.conj().T) / 2


def power_iteration(m, iters=3000):
    """Largest-magnitude eigenvalue, independent of any eigensolver."""
    v = np.ones(m.shape[0], dtype=complex)
    for _ in range(iters):
        v = m @ v
        v /= np.linalg.norm(v)
    return float(np.vdot(v, m @ v).real)


@pytest.mark.parametrize("method", ["lapack", "ql"])
@pytest.mark.parametrize("d", [1, 2, 3, 8, 17])
def test_eig_reconstructs(method, d, rng):
    m = random_hermitian(d, rng)
    w, v = hermitian_eig(m, method=method)
    assert np.all(np.diff(w) <= 1e-12)
    assert np.allclose(v @ np.diag(w) @ v.conj().T, m, atol=1e-10)
    assert np.allclose(v.conj().T @ v, np.eye(d), atol=1e-10)


def test_ql_matches_power_iteration(rng):
    m = random_hermitian(12, rng)
    # shift so the largest eigenvalue also has the largest magnitude
    shifted = m + 20 * np.eye(12)
    w, _ = hermitian_eig(shifted, method="ql")
    assert w[0] == pytest.approx(power_iteration(shifted), abs=1e-8)


def test_tridiagonal_form_is_real_and_similar(rng):
    m = random_hermitian(6, rng)
    diag, off, q = householder_tridiagonalize(m)
    t = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
    assert np.isrealobj(diag) and np.isrealobj(off)
    assert np.allclose(q @ t @ q.conj().T, m, atol=1e-10)


def test_degenerate_spectrum():
    m = np.diag([1.0, 1.0, -2.0, 1.0]).astype(complex)
    w, v = hermitian_eig(m, method="ql")
    assert np.allclose(w, [1, 1, 1, -2])
    assert np.allclose(v @ np.diag(w) @ v.conj().T, m)


def test_non_hermitian_rejected():
    with pytest.raises(NonHermitianError):
        hermitian_part(np.array([[0, 1], [0, 0]], dtype=complex))


def test_norms_against_svd(rng):
    # singular values of a Hermitian matrix are |eigenvalues|
    g = random_hermitian(5, rng)
    s = np.linalg.svd(g, compute_uv=False)
    assert trace_norm(g) == pytest.approx(s.sum())
    assert operator_norm(g) == pytest.approx(s.max())


def test_kron_and_psd():
    a = np.array([[1, 0], [0, 0]], dtype=complex)
    assert kron(a, a, a).shape == (8, 8)
    assert is_psd(a) and not is_psd(-a)


@settings(max_examples=40, deadline=None)
@given(hst.integers(1, 9), hst.integers(0, 2**32 - 1))
def test_eigenvalues_sum_to_trace(d, seed):
    m = random_hermitian(d, np.random.default_rng(seed))
    assert eigvalsh(m).sum() == pytest.approx(np.trace(m).real, abs=1e-9)
    assert np.allclose(hermitian_eig(m, "ql")[0], hermitian_eig(m, "lapack")[0], atol=1e-9)
