import numpy as np
import pytest

from state_shadows import states as st
from state_shadows.distinguishers import (
    acceptance_by_states,
    acceptance_prob_expectation,
    acceptance_prob_variance,
    advantage_to_bounds,
    distinguisher_report,
    haar_acceptance_expectation,
    haar_acceptance_variance,
    sample_distinguisher,
)
from state_shadows.moments import HaarEnsemble, MixtureEnsemble, StabilizerEnsemble, ensemble_moment
from state_shadows.observables import conjugate_observable, gue, pauli_string, projector_onto
from state_shadows.shadows import exact_estimator_moments, outcome_distribution


def by_hand_expectation(zeta, rho, obs):
    """Sum over Bell outcomes of Pr[x,z] times <O*> on the corrected copy X^x Z^z zeta."""
    n, d = zeta.n, zeta.dim
    table = outcome_distribution(rho, zeta)
    oc = conjugate_observable(obs).matrix
    total = 0.0
    for x in range(d):
        for z in range(d):
            w = st.pauli_matrix(n, x, z) @ zeta.amplitudes
            total += table[x, z] * np.vdot(w, oc @ w).real
    return 0.5 + total / (2 * obs.op_norm)


def test_expectation_acceptance_by_hand(rng):
    for n in (1, 2):
        zeta = st.haar_sample(n, rng)
        rho = st.random_density(n, rng)
        obs = gue(n, rng)
        assert acceptance_prob_expectation(zeta, rho, obs) == pytest.approx(by_hand_expectation(zeta, rho, obs))


def test_haar_value_three_quarters():
    obs = projector_onto(st.PureState.basis(1, 0))
    rho = st.DensityMatrix.maximally_mixed(1)
    assert haar_acceptance_expectation(rho, obs) == pytest.approx(0.75, abs=1e-12)
    assert acceptance_prob_expectation(HaarEnsemble(1), rho, obs) == pytest.approx(0.75, abs=1e-12)
    assert acceptance_prob_expectation(StabilizerEnsemble(1), rho, obs) == pytest.approx(0.75, abs=1e-12)


def test_certain_acceptance():
    zero = st.PureState.basis(1, 0)
    assert acceptance_prob_expectation(zero, zero.density(), pauli_string("Z")) == pytest.approx(1.0)


def test_moment_and_state_routes_agree(rng):
    n = 2
    rho = st.random_density(n, rng)
    obs = gue(n, rng)
    ens = MixtureEnsemble(StabilizerEnsemble(n), st.haar_sample(n, rng), 0.2)
    for t, fn in ((2, acceptance_prob_expectation), (3, acceptance_prob_variance)):
        assert fn(ensemble_moment(ens, t), rho, obs) == pytest.approx(acceptance_by_states(ens, rho, obs, t), abs=1e-12)


def test_exact_designs_match_haar(rng):
    rho = st.random_density(2, rng)
    obs = gue(2, rng)
    stab = StabilizerEnsemble(2)
    assert acceptance_prob_expectation(stab, rho, obs) == pytest.approx(haar_acceptance_expectation(rho, obs))
    assert acceptance_prob_variance(stab, rho, obs) == pytest.approx(haar_acceptance_variance(rho, obs))
    assert haar_acceptance_variance(rho, obs) == pytest.approx(acceptance_prob_variance(HaarEnsemble(2), rho, obs))


def test_bias_equals_scaled_advantage(rng):
    """|bias| = 2 (2^n + 1) ||O|| * |p_E(ens) - p_E(Haar)| holds with equality."""
    n = 2
    rho = st.random_density(n, rng)
    for obs in (gue(n, rng), projector_onto(st.PureState.basis(n, 0))):
        ens = MixtureEnsemble(StabilizerEnsemble(n), st.haar_sample(n, rng), 0.3)
        mean, _ = exact_estimator_moments(ens, rho, obs)
        bias = abs(mean - obs.expectation(rho))
        adv = abs(acceptance_prob_expectation(ens, rho, obs) - haar_acceptance_expectation(rho, obs))
        assert bias == pytest.approx(2 * (obs.dim + 1) * obs.op_norm * adv, abs=1e-12)
        assert bias <= advantage_to_bounds(adv, 0.0, obs)[0] + 1e-12


@pytest.mark.parametrize("kind", ["expectation", "variance"])
def test_sampled_matches_analytic(kind, rng):
    n = 2
    zeta = st.haar_sample(n, rng)
    rho = st.random_density(n, rng)
    obs = gue(n, rng)
    exact = {"expectation": acceptance_prob_expectation, "variance": acceptance_prob_variance}[kind]
    p = exact(zeta, rho, obs)
    bits = sample_distinguisher(kind, zeta, rho, obs, 50_000, rng)
    assert abs(bits.mean() - p) < 5 * np.sqrt(p * (1 - p) / 50_000)


def test_advantage_bounds_and_report(rng):
    obs = pauli_string("Z")
    bias, var = advantage_to_bounds(0.1, 0.05, obs)
    assert bias == pytest.approx(2 * 3 * 0.1)
    assert var == pytest.approx(3 * 2 + 6 * 0.1 * 9)
    with pytest.raises(ValueError):
        advantage_to_bounds(1.5, 0.0, obs)
    rep = distinguisher_report("expectation", StabilizerEnsemble(1), st.product_state("0").density(), obs, 1000, rng)
    assert rep.advantage == pytest.approx(0, abs=1e-12)
    assert set(rep.to_json()) >= {"p_accept_ensemble", "p_accept_haar", "advantage"}
