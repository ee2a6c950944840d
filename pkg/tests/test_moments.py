import math
from itertools import permutations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as hst

from state_shadows import states as st
from state_shadows.errors import NotEnumerableError, SizeLimitError, SupportLeakError
from state_shadows.moments import (
    BinaryPhaseEnsemble,
    FiniteEnsemble,
    HaarEnsemble,
    MomentOperator,
    RealHaarEnsemble,
    StabilizerEnsemble,
    additive_epsilon,
    adversarial_mixture,
    conversion_report,
    ensemble_moment,
    haar_moment,
    pauli_twirl,
    real_gaussian_moment,
    relative_epsilon,
    restricted,
    sym_basis,
    sym_dim,
    sym_projector,
)


def naive_sym_projector(d, t):
    """Average of explicit tensor-factor permutation matrices (oracle)."""
    dim = d ** t
    out = np.zeros((dim, dim))
    for perm in permutations(range(t)):
        m = np.zeros((dim, dim))
        for idx in range(dim):
            digits = np.unravel_index(idx, (d,) * t)
            permuted = tuple(digits[p] for p in perm)
            m[np.ravel_multi_index(permuted, (d,) * t), idx] = 1
        out += m
    return out / math.factorial(t)


def psd_relative_oracle(m, h, tol=1e-12):
    """Smallest eps with (1-eps)H <= M <= (1+eps)H, by bisection on PSD tests."""
    def ok(eps):
        lo = np.linalg.eigvalsh(m - (1 - eps) * h).min()
        hi = np.linalg.eigvalsh((1 + eps) * h - m).min()
        return lo > -1e-10 and hi > -1e-10

    a, b = 0.0, 1.0
    while not ok(b):
        b *= 2
    while b - a > tol:
        mid = (a + b) / 2
        a, b = (a, mid) if ok(mid) else (mid, b)
    return b


@pytest.mark.parametrize("n,t", [(1, 1), (1, 2), (1, 3), (2, 2), (2, 3), (3, 2)])
def test_sym_dim_and_projector(n, t):
    d = 1 << n
    assert sym_dim(n, t) == math.comb(d + t - 1, t)
    assert np.allclose(sym_projector(n, t), naive_sym_projector(d, t))
    b = sym_basis(n, t)
    assert np.allclose(b.T @ b, np.eye(sym_dim(n, t)))
    assert np.allclose(b @ b.T, sym_projector(n, t))


def test_size_limit():
    with pytest.raises(SizeLimitError):
        sym_dim(5, 3)


def test_haar_moment_against_monte_carlo(rng):
    exact = haar_moment(1, 2)
    mc = ensemble_moment(HaarEnsemble(1), 2, mode="mc", samples=200_000, rng=rng)
    assert not mc.is_exact
    assert np.max(np.abs(mc.matrix - exact.matrix)) < 5e-3
    assert np.trace(exact.matrix).real == pytest.approx(1)


def test_stabilizers_form_a_3_design_not_a_4_design():
    for n, t in ((1, 3), (2, 3), (2, 2)):
        m = ensemble_moment(StabilizerEnsemble(n), t)
        assert additive_epsilon(m) < 1e-9
        assert relative_epsilon(m) < 1e-9
    assert additive_epsilon(ensemble_moment(StabilizerEnsemble(1), 4)) > 1e-3


def test_real_gaussian_moment_against_monte_carlo(rng):
    mc = ensemble_moment(RealHaarEnsemble(1), 2, mode="mc", samples=200_000, rng=rng)
    assert np.max(np.abs(mc.matrix - real_gaussian_moment(1, 2))) < 5e-3
    assert np.trace(real_gaussian_moment(2, 3)) == pytest.approx(1)


def test_binary_phase_exact_and_sampled(rng):
    ens = BinaryPhaseEnsemble(2)
    vecs, w = ens.support()
    assert len(vecs) == 16 and w.sum() == pytest.approx(1)
    sampled, keys = ens.sample(20, rng)
    assert np.allclose(sampled, vecs[keys])
    assert BinaryPhaseEnsemble(4).support() is None
    with pytest.raises(NotEnumerableError):
        ensemble_moment(BinaryPhaseEnsemble(4), 2)


def test_relative_epsilon_matches_psd_oracle(rng):
    for n, t in ((1, 2), (2, 2), (1, 3)):
        ens = FiniteEnsemble(st.haar_vectors(n, 6, rng), rng.dirichlet(np.ones(6)))
        m = ensemble_moment(ens, t)
        assert relative_epsilon(m) == pytest.approx(psd_relative_oracle(m.matrix, haar_moment(n, t).matrix), abs=1e-8)
        oracle_add = np.abs(np.linalg.eigvalsh(m.matrix - haar_moment(n, t).matrix)).sum()
        assert additive_epsilon(m) == pytest.approx(oracle_add)


@pytest.mark.parametrize("n,t", [(1, 2), (2, 2), (2, 3)])
@pytest.mark.parametrize("eps", [0.02, 0.1, 0.5])
def test_mixture_closed_forms(n, t, eps):
    ds = sym_dim(n, t)
    rep = conversion_report(ensemble_moment(adversarial_mixture(n, t, eps), t))
    assert rep.eps_add == pytest.approx(eps * (1 - 1 / ds), abs=1e-12)
    assert rep.eps_rel == pytest.approx(eps / 2 * (ds - 1), abs=1e-12)
    assert rep.ratio == pytest.approx(ds / 2, abs=1e-9)
    assert rep.bounds_ok


def test_mixture_n2_t2_ratio_is_five():
    rep = conversion_report(ensemble_moment(adversarial_mixture(2, 2, 0.1), 2))
    assert rep.eps_add == pytest.approx(0.09)
    assert rep.eps_rel == pytest.approx(0.45)
    assert rep.ratio == pytest.approx(5)


def test_haar_t1_distances_vanish():
    rep = conversion_report(ensemble_moment(HaarEnsemble(1), 1))
    assert rep.eps_add == pytest.approx(0, abs=1e-15) and rep.eps_rel == pytest.approx(0, abs=1e-15)
    assert rep.to_json()["ratio"] is None


def test_conversion_refuses_monte_carlo(rng):
    mc = ensemble_moment(HaarEnsemble(1), 2, mode="mc", samples=10, rng=rng)
    with pytest.raises(ValueError):
        conversion_report(mc)


def test_support_leak_detected():
    m = MomentOperator(1, 2, np.eye(4, dtype=complex) / 4)  # weight on the antisymmetric singlet
    with pytest.raises(SupportLeakError):
        restricted(m)


def test_pauli_twirl_t1_is_full_depolarization(rng):
    a = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    assert np.allclose(pauli_twirl(a, 2, 1), 4 * np.trace(a) * np.eye(4))


@settings(max_examples=30, deadline=None)
@given(hst.integers(1, 2), hst.integers(1, 3), hst.integers(2, 7), hst.integers(0, 2**32 - 1))
def test_conversion_inequalities(n, t, size, seed):
    rng = np.random.default_rng(seed)
    ens = FiniteEnsemble(st.haar_vectors(n, size, rng), rng.dirichlet(np.ones(size)))
    rep = conversion_report(ensemble_moment(ens, t))
    assert rep.eps_add <= rep.eps_rel + 1e-9
    assert rep.eps_rel <= rep.sym_dim * rep.eps_add + 1e-9


def test_single_state_relative_distance_is_one():
    from state_shadows.moments import PointEnsemble

    rep = conversion_report(ensemble_moment(PointEnsemble(st.PureState.basis(1, 0)), 1))
    assert rep.eps_rel == pytest.approx(1.0)
    assert rep.eps_add == pytest.approx(1.0)
