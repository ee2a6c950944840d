import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as hst

from state_shadows import states as st
from state_shadows.errors import DimMismatchError, LengthMismatchError, NonPositiveObservableError, SizeLimitError
from state_shadows.moments import (
    BinaryPhaseEnsemble,
    HaarEnsemble,
    PointEnsemble,
    RealHaarEnsemble,
    StabilizerEnsemble,
)
from state_shadows.observables import gue, pauli_string, projector_onto
from state_shadows.rng import make_rng
from state_shadows.shadows import (
    batch_count,
    batch_size,
    bell_measure_batch,
    bell_measure_circuit,
    brute_force_distribution,
    channel_apply,
    depolarizing_inverse,
    estimate_observable,
    exact_estimator_moments,
    exact_shadow_mean,
    generate_snapshot,
    generate_snapshots,
    median_of_means,
    outcome_distribution,
    plan,
    sample_stats,
    snapshot_values,
    theorem_bounds,
)


def test_single_qubit_hand_computed_law():
    # rho = |0><0|, zeta = |0>: v = X^x Z^z |0> = +-|x>, so Pr = 1/2 for x = 0 and 0 otherwise
    table = outcome_distribution(st.product_state("0").density(), st.product_state("0"))
    assert np.allclose(table, [[0.5, 0.5], [0.0, 0.0]])


def test_bell_pair_law():
    # rho = |+><+|, zeta = |+>: v = X^x Z^z |+>; Z flips |+> to |->, X fixes |+> up to sign
    table = outcome_distribution(st.product_state("+").density(), st.product_state("+"))
    assert np.allclose(table, [[0.5, 0.0], [0.5, 0.0]])


@pytest.mark.parametrize("n", [1, 2, 3])
def test_outcome_law_matches_brute_force(n, rng):
    for _ in range(3):
        rho = st.random_density(n, rng)
        zeta = st.haar_sample(n, rng)
        table = outcome_distribution(rho, zeta)
        assert table.sum() == pytest.approx(1)
        assert np.allclose(table, brute_force_distribution(rho, zeta), atol=1e-12)


def test_sampled_outcomes_follow_the_law(rng):
    n = 2
    rho = st.random_density(n, rng)
    zeta = st.haar_sample(n, rng)
    shots = 100_000
    # mixed input: the pure-state decomposition is sampled inside generate_snapshots
    batch = generate_snapshots(rho, PointEnsemble(zeta), shots, rng)
    counts = np.zeros((4, 4))
    np.add.at(counts, (batch.x, batch.z), 1)
    expected = outcome_distribution(rho, zeta) * shots
    mask = expected > 5
    chi2 = float(np.sum((counts[mask] - expected[mask]) ** 2 / expected[mask]))
    dof = int(mask.sum()) - 1
    assert chi2 < dof + 5 * math.sqrt(2 * dof)


def test_circuit_sampler_matches_batched_sampler(rng):
    psi = st.haar_sample(1, rng)
    zeta = st.haar_sample(1, rng)
    table = outcome_distribution(psi.density(), zeta)
    counts = np.zeros((2, 2))
    for _ in range(4000):
        m = bell_measure_circuit(psi, zeta, rng)
        counts[m.x, m.z] += 1
    assert np.max(np.abs(counts / 4000 - table)) < 0.04


def test_dimension_and_size_errors(rng):
    with pytest.raises(DimMismatchError):
        outcome_distribution(st.random_density(2, rng), st.haar_sample(1, rng))
    with pytest.raises(SizeLimitError):
        brute_force_distribution(st.random_density(6, rng), st.haar_sample(6, rng))


@pytest.mark.parametrize("n", [1, 2, 3])
def test_stabilizer_snapshots_are_exactly_unbiased(n, rng):
    rho = st.random_density(n, rng)
    assert np.allclose(exact_shadow_mean(StabilizerEnsemble(n), rho), rho.matrix, atol=1e-10)


def test_haar_channel_from_closed_form_moment(rng):
    rho = st.random_density(2, rng)
    assert np.allclose(exact_shadow_mean(HaarEnsemble(2), rho), rho.matrix, atol=1e-10)


def test_monte_carlo_channel_converges(rng):
    rho = st.random_density(1, rng)
    mc = channel_apply(HaarEnsemble(1), rho, mode="mc", samples=20_000, rng=rng)
    assert np.max(np.abs(depolarizing_inverse(mc, 1) - rho.matrix)) < 0.05


def test_real_states_annihilate_imaginary_part():
    rho = st.product_state("i").density()
    out = channel_apply(RealHaarEnsemble(1), rho)
    assert abs(np.trace(pauli_string("Y").matrix @ out)) < 1e-12
    assert np.allclose(out, np.eye(2) / 2)
    # binary-phase states are real too and fail in the same way
    out = channel_apply(BinaryPhaseEnsemble(1), rho)
    assert abs(np.trace(pauli_string("Y").matrix @ out)) < 1e-12


def test_sampled_mean_matches_exact_moments(rng):
    n = 2
    rho = st.random_density(n, rng)
    obs = gue(n, rng)
    ens = StabilizerEnsemble(n)
    mean, var = exact_estimator_moments(ens, rho, obs)
    assert mean == pytest.approx(obs.expectation(rho), abs=1e-10)
    stats = sample_stats(snapshot_values(rho, ens, obs, 100_000, rng), obs.expectation(rho))
    assert abs(stats.bias) < 5 * stats.se_bias
    assert abs(stats.variance - var) < 5 * stats.se_variance
    assert var <= 3 * obs.traceless_sq


def test_median_of_means():
    assert median_of_means([1, 2, 3, 10, 20, 30], 3, 2) == pytest.approx(6.5)
    assert median_of_means([5.0], 1, 1) == 5.0
    with pytest.raises(LengthMismatchError):
        median_of_means([1, 2, 3], 2, 2)


def test_plan_constants():
    obs = pauli_string("Z")
    cfg = plan(0.1, 0.05, "exact", obs)
    assert cfg.K == math.ceil(2 * math.log(40)) == 8
    assert cfg.L == math.ceil(34 * 6 / 0.01) == 20400
    assert batch_count(0.5) == math.ceil(2 * math.log(4))
    assert batch_size(10.0, 0.0) == 1


def test_theorem_bounds_table(rng):
    obs = projector_onto(st.PureState.basis(2, 0))
    base = 3 * 0.75
    assert theorem_bounds("relative", 0.1, obs) == pytest.approx((0.2, base + 1.0))
    assert theorem_bounds("additive", 0.1, obs) == pytest.approx((0.5, base + 7.5))
    assert theorem_bounds("pseudo", 0.1, obs) == pytest.approx((1.0, base + 15.0))


def test_relative_plan_needs_positive_observable_and_two_qubits():
    with pytest.raises(NonPositiveObservableError):
        plan(0.1, 0.1, "relative", pauli_string("ZZ"), 0.1)
    with pytest.raises(ValueError):
        plan(0.1, 0.1, "relative", projector_onto(st.PureState.basis(1, 0)), 0.1)


def test_estimate_within_gamma(rng):
    rho = st.product_state("0").density()
    obs = pauli_string("Z")
    cfg = plan(0.1, 0.05, "exact", obs)
    rep = estimate_observable(rho, StabilizerEnsemble(1), obs, cfg, rng, seed=1)
    assert abs(rep.estimate - 1.0) <= 0.1
    assert rep.total_shots == cfg.K * cfg.L


def test_results_do_not_depend_on_worker_count():
    rho = st.random_density(2, make_rng(3))
    obs = gue(2, make_rng(4))
    runs = [snapshot_values(rho, HaarEnsemble(2), obs, 30_000, make_rng(9), workers=w) for w in (1, 2, 4)]
    assert all(np.array_equal(runs[0], r) for r in runs[1:])
    batch = generate_snapshots(rho, HaarEnsemble(2), 30_000, make_rng(9), workers=3)
    assert np.array_equal(batch.estimates(obs), runs[0])


def test_single_snapshot_record(rng):
    snap = generate_snapshot(st.random_density(2, rng), StabilizerEnsemble(2), rng)
    assert 0 <= snap.key < 60
    assert np.allclose(StabilizerEnsemble(2).state_for_key(snap.key).amplitudes, snap.zeta.amplitudes)


@settings(max_examples=20, deadline=None)
@given(hst.integers(1, 3), hst.integers(0, 2**32 - 1))
def test_bell_outcomes_in_range(n, seed):
    rng = np.random.default_rng(seed)
    psi = st.haar_vectors(n, 50, rng)
    zetas = st.haar_vectors(n, 50, rng)
    x, z = bell_measure_batch(psi, zetas, n, rng)
    assert x.min() >= 0 and x.max() < 1 << n and z.min() >= 0 and z.max() < 1 << n
