import numpy as np
import pytest
from hypothesis import given, settings, strategies as hst

from state_shadows import states as st
from state_shadows.errors import ConfigError, DimMismatchError
from state_shadows.observables import (
    Observable,
    Snapshot,
    conjugate_observable,
    gue,
    measure_batch,
    observable_from_json,
    pauli_string,
    pauli_sum,
    random_projector,
    shadow_estimate,
    shadow_estimates,
    traceless_part,
)


def test_spectral_decomposition_groups_degenerate_eigenvalues():
    obs = pauli_string("ZZ")
    assert np.allclose(sorted(obs.eigenvalues), [-1, 1])
    recon = sum(a * p for a, p in zip(obs.eigenvalues, obs.projectors))
    assert np.allclose(recon, obs.matrix)
    assert all(np.isclose(np.trace(p).real, 2) for p in obs.projectors)


def test_summary_quantities(rng):
    obs = gue(2, rng)
    w = np.linalg.eigvalsh(obs.matrix)
    assert obs.op_norm == pytest.approx(np.abs(w).max())
    assert obs.trace == pytest.approx(w.sum())
    assert obs.traceless_sq == pytest.approx(np.sum((w - w.mean()) ** 2))
    assert traceless_part(obs).trace == pytest.approx(0, abs=1e-12)


def test_measurement_frequencies(rng):
    obs = pauli_string("X")
    psi = st.product_state("0")
    out = measure_batch(obs, np.broadcast_to(psi.amplitudes, (40_000, 2)), rng)
    assert set(np.unique(out)) <= {-1.0, 1.0}
    # <0|X|0> = 0 so outcomes are fair coin flips
    assert abs(out.mean()) < 5 / np.sqrt(len(out))


def test_measurement_is_eigenvalue_on_eigenstate(rng):
    obs = pauli_string("Y")
    out = measure_batch(obs, np.broadcast_to(st.product_state("i").amplitudes, (100, 2)), rng)
    assert np.all(out == 1.0)


def test_shadow_estimate_matches_explicit_snapshot_matrix(rng):
    n = 2
    obs = gue(n, rng)
    for _ in range(10):
        zeta = st.haar_sample(n, rng)
        mask = st.PauliMask(n, int(rng.integers(4)), int(rng.integers(4)))
        snap = Snapshot(zeta, mask)
        expected = np.trace(obs.matrix @ snap.matrix()).real
        assert shadow_estimate(obs, snap) == pytest.approx(expected, abs=1e-10)


def test_snapshot_vector_definition(rng):
    zeta = st.haar_sample(2, rng)
    snap = Snapshot(zeta, st.PauliMask(2, 3, 1))
    expected = st.pauli_matrix(2, 3, 1) @ zeta.amplitudes.conj()
    assert np.allclose(snap.shadow_vector(), expected)


def test_identity_estimate_is_exact(rng):
    obs = Observable(np.eye(4))
    vals = shadow_estimates(obs, st.haar_vectors(2, 100, rng), rng.integers(0, 4, 100), rng.integers(0, 4, 100))
    assert np.allclose(vals, 1.0)


def test_constructors_and_json(rng):
    obs = pauli_sum([(0.5, "XI"), (-1.0, "ZZ")])
    assert obs.n == 2
    assert np.allclose(observable_from_json({"n": 2, "kind": "pauli", "payload": "XY"}).matrix,
                       pauli_string("XY").matrix)
    back = observable_from_json(obs.to_json())
    assert np.allclose(back.matrix, obs.matrix)
    seeded = [observable_from_json({"n": 1, "kind": "gue", "payload": {"seed": 5}}) for _ in range(2)]
    assert np.allclose(seeded[0].matrix, seeded[1].matrix)
    with pytest.raises(ConfigError):
        pauli_string("XQ")
    with pytest.raises(DimMismatchError):
        observable_from_json({"n": 3, "kind": "pauli", "payload": "XY"})


def test_random_projector_and_conjugate(rng):
    p = random_projector(3, 2, rng)
    assert np.allclose(p.matrix @ p.matrix, p.matrix)
    assert p.trace == pytest.approx(2)
    assert p.is_positive()
    y = pauli_string("Y")
    assert np.allclose(conjugate_observable(y).matrix, -y.matrix)


def test_expectation_dimension_check(rng):
    with pytest.raises(DimMismatchError):
        pauli_string("Z").expectation(st.random_density(2, rng))


@settings(max_examples=25, deadline=None)
@given(hst.integers(1, 3), hst.integers(0, 2**32 - 1))
def test_outcome_probabilities_sum_to_one(n, seed):
    rng = np.random.default_rng(seed)
    obs = gue(n, rng)
    v = st.haar_vectors(n, 5, rng)
    probs = obs.outcome_probabilities(v)
    assert np.allclose(probs.sum(axis=1), 1)
    assert np.allclose(probs @ obs.eigenvalues, obs.quadratic_form(v))
