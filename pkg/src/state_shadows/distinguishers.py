"""Expectation and variance distinguishers built from the snapshot circuit.

Both run the Bell-measurement experiment on ``rho (x) zeta``, apply ``Z^z``
then ``X^x`` to further copies of ``zeta``, measure the conjugate observable
and accept with a probability affine in the outcome(s). Their acceptance
probabilities are linear in the 2- and 3-copy moments of the auxiliary
ensemble, which ties distinguishing advantage to estimator bias and variance.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import states as st
from .errors import DimMismatchError, NotEnumerableError, SizeLimitError
from .moments import Ensemble, MomentOperator, PointEnsemble, ensemble_moment, haar_moment
from .observables import Observable, conjugate_observable, measure_batch, shadow_vectors
from .rng import run_chunked, shot_chunk
from .shadows import as_source, bell_measure_batch

MAX_SUM_QUBITS = 5
P_TOL = 1e-9


def _all_masks(n: int) -> tuple[np.ndarray, np.ndarray]:
    d = 1 << n
    xs, zs = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
    return xs.ravel(), zs.ravel()


def _check(rho: st.DensityMatrix, obs: Observable, n: int) -> None:
    if rho.n != n or obs.n != n:
        raise DimMismatchError(f"mismatched qubit counts: rho {rho.n}, O {obs.n}, zeta {n}")
    if obs.op_norm <= 0:
        raise ValueError("observable must be non-zero")


def _state_sum(zeta: st.PureState, rho: st.DensityMatrix, obs: Observable, power: int) -> float:
    """``sum_{x,z} 2^-n <v|rho|v> <v|O|v>^power`` with ``v = X^x Z^z conj(zeta)``."""
    n = zeta.n
    if n > MAX_SUM_QUBITS:
        raise SizeLimitError(f"4^n Pauli sum limited to n <= {MAX_SUM_QUBITS}")
    d = 1 << n
    xs, zs = _all_masks(n)
    v = shadow_vectors(np.broadcast_to(zeta.amplitudes, (d * d, d)), n, xs, zs)
    p = np.einsum("si,ij,sj->s", v.conj(), rho.matrix, v).real / d
    return float(np.dot(p, obs.quadratic_form(v) ** power))


def twirled_trace(moment: np.ndarray, n: int, factors: list[np.ndarray]) -> complex:
    """``sum_{x,z} Tr(P^(x)t A P^(x)t^H (F_1 (x) ... (x) F_t))`` for ``P = X^x Z^z``."""
    d = 1 << n
    total = 0j
    for x in range(d):
        for z in range(d):
            p = st.pauli_matrix(n, x, z)
            ph = p.conj().T
            b = np.ones((1, 1), dtype=complex)
            for f in factors:
                b = np.kron(b, ph @ f @ p)
            total += np.sum(moment * b.T)
    return total


def _moment_sum(moment: MomentOperator, rho: st.DensityMatrix, obs: Observable) -> float:
    t = moment.t
    factors = [rho.matrix] + [obs.matrix] * (t - 1)
    return float(twirled_trace(moment.matrix.conj(), moment.n, factors).real) / (1 << moment.n)


def _probability(sum_term: float, obs: Observable, power: int) -> float:
    return 0.5 + sum_term / (2 * obs.op_norm ** power)


def _acceptance(source, rho, obs: Observable, t: int) -> float:
    rho = st.as_density(rho)
    if isinstance(source, st.PureState):
        _check(rho, obs, source.n)
        return _probability(_state_sum(source, rho, obs, t - 1), obs, t - 1)
    if isinstance(source, MomentOperator):
        if source.t != t:
            raise ValueError(f"need a {t}-copy moment, got t={source.t}")
        _check(rho, obs, source.n)
        return _probability(_moment_sum(source, rho, obs), obs, t - 1)
    if isinstance(source, Ensemble):
        return _acceptance(ensemble_moment(source, t), rho, obs, t)
    raise TypeError(f"cannot evaluate acceptance for {type(source).__name__}")


def acceptance_prob_expectation(source, rho, obs: Observable) -> float:
    """Exact ``Pr[A_E = 1]`` for a fixed auxiliary state, a 2-copy moment, or an ensemble."""
    return _acceptance(source, rho, obs, 2)


def acceptance_prob_variance(source, rho, obs: Observable) -> float:
    """Exact ``Pr[A_Var = 1]`` for a fixed auxiliary state, a 3-copy moment, or an ensemble."""
    return _acceptance(source, rho, obs, 3)


def acceptance_by_states(ens: Ensemble, rho, obs: Observable, t: int) -> float:
    """Acceptance averaged state by state over a finite support (cross-check route)."""
    sup = ens.support()
    if sup is None:
        raise NotEnumerableError(f"{ens!r} has no finite support")
    rho = st.as_density(rho)
    total = sum(w * _state_sum(st.PureState(ens.n, v), rho, obs, t - 1) for v, w in zip(*sup))
    return _probability(total, obs, t - 1)


def haar_acceptance_expectation(rho, obs: Observable) -> float:
    """Closed form for Haar auxiliary states: 1/2 + (Tr O + Tr(O rho)) / (2 ||O|| (2^n + 1))."""
    rho = st.as_density(rho)
    return 0.5 + (obs.trace + obs.expectation(rho)) / (2 * obs.op_norm * (obs.dim + 1))


def haar_acceptance_variance(rho, obs: Observable) -> float:
    """Haar value using twirl invariance: 1/2 + 2^n Tr(H_3 rho (x) O (x) O) / (2 ||O||^2)."""
    rho = st.as_density(rho)
    h3 = haar_moment(obs.n, 3).matrix
    q = np.kron(np.kron(rho.matrix, obs.matrix), obs.matrix)
    return 0.5 + obs.dim * float(np.sum(h3 * q.T).real) / (2 * obs.op_norm ** 2)


# --- sampled execution --------------------------------------------------------

def _coin(p: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    if np.any(p < -P_TOL) or np.any(p > 1 + P_TOL):
        raise AssertionError(f"acceptance probability outside [0, 1]: [{p.min()}, {p.max()}]")
    return (rng.random(p.shape) < np.clip(p, 0.0, 1.0)).astype(np.int8)


def _as_ensemble(source) -> Ensemble:
    if isinstance(source, Ensemble):
        return source
    if isinstance(source, st.PureState):
        return PointEnsemble(source)
    raise TypeError(f"expected an Ensemble or PureState, got {type(source).__name__}")


def _distinguisher_chunk(ens: Ensemble, rho, obs: Observable, copies: int):
    source = as_source(rho)
    n = ens.n
    obs_conj = conjugate_observable(obs)
    norm = obs.op_norm

    def run(size: int, gen: np.random.Generator) -> np.ndarray:
        zetas, _ = ens.sample(size, gen)
        psi = source.sample(size, gen)
        x, z = bell_measure_batch(psi, zetas, n, gen)
        # copies of zeta corrected by Z^z then X^x
        corrected = shadow_vectors(zetas.conj(), n, x, z)
        alphas = [measure_batch(obs_conj, corrected, gen) for _ in range(copies)]
        if copies == 1:
            p = 0.5 + alphas[0] / (2 * norm)
        else:
            p = 0.5 + alphas[0] * alphas[1] / (2 * norm ** 2)
        return _coin(p, gen)

    return run


def sample_distinguisher(kind: str, source, rho, obs: Observable, shots: int, rng: np.random.Generator,
                         workers: int = 1) -> np.ndarray:
    """Output bits of ``shots`` independent runs of the expectation or variance distinguisher."""
    ens = _as_ensemble(source)
    rho = st.as_density(rho)
    _check(rho, obs, ens.n)
    copies = {"expectation": 1, "variance": 2}[kind]
    d = 1 << ens.n
    parts = run_chunked(_distinguisher_chunk(ens, rho, obs, copies), shots, shot_chunk(4 * d * d), rng, workers)
    return np.concatenate(parts) if parts else np.zeros(0, dtype=np.int8)


def run_expectation_distinguisher(source, rho, obs: Observable, rng: np.random.Generator) -> int:
    """One run of A_E: measure O* on the corrected second copy, accept w.p. 1/2 + a/(2||O||)."""
    return int(sample_distinguisher("expectation", source, rho, obs, 1, rng)[0])


def run_variance_distinguisher(source, rho, obs: Observable, rng: np.random.Generator) -> int:
    """One run of A_Var: two corrected copies, accept w.p. 1/2 + a1 a2 / (2||O||^2)."""
    return int(sample_distinguisher("variance", source, rho, obs, 1, rng)[0])


# --- advantage to bounds --------------------------------------------------------

def advantage_to_bounds(adv_expectation: float, adv_variance: float, obs: Observable) -> tuple[float, float]:
    """Bias and variance bounds implied by the two distinguishing advantages.

    With eps = max(advantages): bias <= 2 (2^n+1) eps ||O|| and
    Var <= 3 Tr(O0^2) + 6 eps ||O||^2 (2^n+1)^2.
    """
    for a in (adv_expectation, adv_variance):
        if not -P_TOL <= a <= 1 + P_TOL:
            raise ValueError(f"advantage {a} outside [0, 1]")
    eps = max(adv_expectation, adv_variance)
    d1 = obs.dim + 1
    bias = 2 * d1 * eps * obs.op_norm
    var = 3 * obs.traceless_sq + 6 * eps * obs.op_norm ** 2 * d1 ** 2
    return bias, var


@dataclass
class DistinguisherReport:
    kind: str
    p_accept_ensemble: float
    p_accept_haar: float
    advantage: float
    implied_bias_bound: float
    implied_variance_slack: float
    shots: int
    empirical_frequency: float
    std_error: float

    def to_json(self) -> dict:
        return asdict(self)


def distinguisher_report(kind: str, ens: Ensemble, rho, obs: Observable, shots: int,
                         rng: np.random.Generator, workers: int = 1) -> DistinguisherReport:
    """Analytic acceptance under ``ens`` and Haar, their gap, and a sampled run under ``ens``."""
    rho = st.as_density(rho)
    if kind == "expectation":
        p_ens = acceptance_prob_expectation(ens, rho, obs)
        p_haar = haar_acceptance_expectation(rho, obs)
    elif kind == "variance":
        p_ens = acceptance_prob_variance(ens, rho, obs)
        p_haar = haar_acceptance_variance(rho, obs)
    else:
        raise ValueError(f"unknown distinguisher {kind!r}")
    adv = abs(p_ens - p_haar)
    bias, var = advantage_to_bounds(adv, adv, obs)
    if shots > 0:
        bits = sample_distinguisher(kind, ens, rho, obs, shots, rng, workers)
        freq = float(bits.mean())
    else:
        freq = float("nan")
    se = math.sqrt(max(p_ens * (1 - p_ens), 0.0) / shots) if shots > 0 else float("nan")
    return DistinguisherReport(
        kind=kind,
        p_accept_ensemble=p_ens,
        p_accept_haar=p_haar,
        advantage=adv,
        implied_bias_bound=bias,
        implied_variance_slack=var - 3 * obs.traceless_sq,
        shots=shots,
        empirical_frequency=freq,
        std_error=se,
    )
