"""State-based classical shadows: Bell-basis snapshots and median-of-means estimation.

One experiment entangles the unknown state (register R1) with an auxiliary
state ``zeta`` (register R2) through transversal CNOTs, applies Hadamards to
R1 and measures both registers, giving bit strings ``z`` (R1) and ``x`` (R2).
The snapshot ``(2^n+1)|v><v| - I`` with ``v = X^x Z^z conj(zeta)`` is never
formed explicitly; observables are evaluated through ``<v|O|v>``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import states as st
from .errors import DimMismatchError, LengthMismatchError, NonPositiveObservableError, SizeLimitError
from .moments import Ensemble, pauli_twirl
from .observables import Observable, Snapshot, shadow_estimates, shadow_vectors
from .rng import run_chunked, shot_chunk

MAX_TABLE_QUBITS = 7
MAX_CIRCUIT_QUBITS = 10
BOUND_KINDS = ("exact", "relative", "additive", "pseudo")
MOM_CONSTANT = 34.0


# --- state sources ----------------------------------------------------------

class StateSource:
    """Produces pure-state samples of a (possibly mixed) input state.

    A mixed state is eigendecomposed once; each shot draws one eigenvector with
    probability equal to its eigenvalue, which reproduces the Born statistics
    of the mixture exactly.
    """

    def __init__(self, rho):
        if isinstance(rho, StateSource):
            rho = rho.rho
        self.rho = st.as_density(rho)
        self.n = self.rho.n
        w, v = self.rho.spectrum()
        keep = w > 1e-15
        self.weights = w[keep] / w[keep].sum()
        self.vectors = v[:, keep].T.copy()

    @property
    def is_pure(self) -> bool:
        return len(self.weights) == 1

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        if self.is_pure:
            return np.broadcast_to(self.vectors[0], (count, self.vectors.shape[1]))
        idx = rng.choice(len(self.weights), size=count, p=self.weights)
        return self.vectors[idx]


def as_source(rho) -> StateSource:
    return rho if isinstance(rho, StateSource) else StateSource(rho)


# --- outcome law ------------------------------------------------------------

def outcome_distribution(rho, zeta: st.PureState) -> np.ndarray:
    """Table ``P[x, z] = <v|rho|v> / 2^n`` with ``v = X^x Z^z conj(zeta)``."""
    rho = st.as_density(rho)
    if rho.n != zeta.n:
        raise DimMismatchError(f"{rho.n}-qubit input with {zeta.n}-qubit auxiliary state")
    n = zeta.n
    if n > MAX_TABLE_QUBITS:
        raise SizeLimitError(f"outcome table for n={n} would have 4^{n} entries")
    d = 1 << n
    xs, zs = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
    v = shadow_vectors(np.broadcast_to(zeta.amplitudes, (d * d, d)), n, xs.ravel(), zs.ravel())
    probs = np.einsum("si,ij,sj->s", v.conj(), rho.matrix, v).real / d
    return probs.reshape(d, d)


def circuit_unitary(n: int) -> np.ndarray:
    """Full 2n-qubit unitary of the measurement circuit, gate by gate.

    Qubits 0..n-1 form R1 and n..2n-1 form R2 (qubit 0 most significant). This
    is a brute-force reference for the outcome law; it costs 16^n memory.
    """
    if n > 5:
        raise SizeLimitError("brute-force circuit unitary is limited to n <= 5")
    nq = 2 * n
    dim = 1 << nq
    idx = np.arange(dim)
    u = np.eye(dim, dtype=complex)
    for i in range(n):
        cbit = nq - 1 - i
        tbit = nq - 1 - (n + i)
        dest = idx ^ (((idx >> cbit) & 1) << tbit)
        cnot = np.zeros((dim, dim))
        cnot[dest, idx] = 1.0
        u = cnot @ u
    had = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
    layer = np.ones((1, 1), dtype=complex)
    for q in range(nq):
        layer = np.kron(layer, had if q < n else np.eye(2))
    return layer @ u


def brute_force_distribution(rho, zeta: st.PureState) -> np.ndarray:
    """Outcome table ``P[x, z]`` from the explicit circuit unitary on ``rho (x) |zeta><zeta|``."""
    rho = st.as_density(rho)
    n = zeta.n
    d = 1 << n
    u = circuit_unitary(n)
    joint = np.kron(rho.matrix, zeta.projector())
    final = u @ joint @ u.conj().T
    probs = final.diagonal().real.reshape(d, d)  # [z (R1), x (R2)]
    return probs.T.copy()


def _walsh_hadamard(a: np.ndarray, axis: int) -> np.ndarray:
    """Unnormalized Walsh-Hadamard transform along ``axis``."""
    a = np.moveaxis(np.array(a, dtype=complex), axis, -1)
    d = a.shape[-1]
    h = 1
    while h < d:
        shaped = a.reshape(a.shape[:-1] + (d // (2 * h), 2, h))
        lo, hi = shaped[..., 0, :], shaped[..., 1, :]
        a = np.stack([lo + hi, lo - hi], axis=-2).reshape(a.shape)
        h *= 2
    return np.moveaxis(a, -1, axis)


def bell_outcome_probabilities(psi: np.ndarray, zetas: np.ndarray, n: int) -> np.ndarray:
    """Per-shot circuit output probabilities, shape ``(S, 2^n [z], 2^n [x])``.

    After the CNOTs the amplitude of ``|a, b>`` is ``psi[a] zeta[a xor b]``;
    the Hadamards on R1 then transform the ``a`` index.
    """
    d = 1 << n
    a = np.arange(d)
    joint = psi[:, :, None] * zetas[:, a[:, None] ^ a[None, :]]  # (S, a, x)
    if d <= 16:
        amps = np.matmul(st.parity_table(n), joint)
    else:
        amps = _walsh_hadamard(joint, axis=1)
    return np.abs(amps) ** 2 / d


def bell_measure_batch(psi: np.ndarray, zetas: np.ndarray, n: int, rng: np.random.Generator):
    """Sample ``(x, z)`` for each shot row; returns two integer arrays."""
    probs = bell_outcome_probabilities(psi, zetas, n).reshape(len(zetas), -1)
    cdf = np.cumsum(probs, axis=1)
    u = rng.random(len(zetas))[:, None] * cdf[:, -1:]
    flat = np.minimum((cdf < u).sum(axis=1), probs.shape[1] - 1)
    z, x = np.divmod(flat, 1 << n)
    return x.astype(np.int64), z.astype(np.int64)


def bell_measure_circuit(psi: st.PureState, zeta: st.PureState, rng: np.random.Generator) -> st.PauliMask:
    """Run the circuit once on ``psi (x) zeta``; returns ``(x from R2, z from R1)``."""
    if psi.n != zeta.n:
        raise DimMismatchError(f"{psi.n}-qubit input with {zeta.n}-qubit auxiliary state")
    if psi.n > MAX_CIRCUIT_QUBITS:
        raise SizeLimitError(f"circuit simulation limited to n <= {MAX_CIRCUIT_QUBITS}")
    x, z = bell_measure_batch(psi.amplitudes[None, :], zeta.amplitudes[None, :], psi.n, rng)
    return st.PauliMask(psi.n, int(x[0]), int(z[0]))


# --- snapshots --------------------------------------------------------------

@dataclass
class SnapshotBatch:
    """Column-wise storage of many snapshots."""

    n: int
    zetas: np.ndarray
    keys: np.ndarray
    x: np.ndarray
    z: np.ndarray
    ensemble: Ensemble | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.x)

    def __getitem__(self, i: int) -> Snapshot:
        name = self.ensemble.name if self.ensemble is not None else ""
        return Snapshot(st.PureState(self.n, self.zetas[i]), st.PauliMask(self.n, int(self.x[i]), int(self.z[i])),
                        int(self.keys[i]), name)

    def estimates(self, obs: Observable) -> np.ndarray:
        return shadow_estimates(obs, self.zetas, self.x, self.z)


def _check_dims(source: StateSource, ens: Ensemble) -> None:
    if source.n != ens.n:
        raise DimMismatchError(f"{source.n}-qubit input with {ens.n}-qubit ensemble")
    if source.n > MAX_CIRCUIT_QUBITS:
        raise SizeLimitError(f"circuit simulation limited to n <= {MAX_CIRCUIT_QUBITS}")


def _snapshot_chunk(source: StateSource, ens: Ensemble):
    def run(size: int, gen: np.random.Generator) -> SnapshotBatch:
        zetas, keys = ens.sample(size, gen)
        psi = source.sample(size, gen)
        x, z = bell_measure_batch(psi, zetas, source.n, gen)
        return SnapshotBatch(source.n, zetas, keys, x, z, ens)

    return run


def generate_snapshots(rho, ens: Ensemble, shots: int, rng: np.random.Generator, workers: int = 1) -> SnapshotBatch:
    """``shots`` independent experiments; identical output for any ``workers``."""
    source = as_source(rho)
    _check_dims(source, ens)
    d = 1 << source.n
    parts = run_chunked(_snapshot_chunk(source, ens), shots, shot_chunk(4 * d * d), rng, workers)
    if not parts:
        empty = np.zeros(0, dtype=np.int64)
        return SnapshotBatch(source.n, np.zeros((0, d), dtype=complex), empty, empty, empty, ens)
    return SnapshotBatch(
        source.n,
        np.concatenate([p.zetas for p in parts]),
        np.concatenate([p.keys for p in parts]),
        np.concatenate([p.x for p in parts]),
        np.concatenate([p.z for p in parts]),
        ens,
    )


def generate_snapshot(rho, ens: Ensemble, rng: np.random.Generator) -> Snapshot:
    """One experiment: draw ``zeta`` from the ensemble, Bell-measure, record (zeta, x, z)."""
    return generate_snapshots(rho, ens, 1, rng)[0]


def snapshot_values(rho, ens: Ensemble, obs: Observable, shots: int, rng: np.random.Generator,
                    workers: int = 1) -> np.ndarray:
    """Per-snapshot estimates ``Tr(O rho_hat)`` without keeping the snapshots."""
    source = as_source(rho)
    _check_dims(source, ens)
    if obs.n != source.n:
        raise DimMismatchError(f"{obs.n}-qubit observable on {source.n}-qubit input")
    run = _snapshot_chunk(source, ens)

    def part(size, gen):
        return run(size, gen).estimates(obs)

    d = 1 << source.n
    parts = run_chunked(part, shots, shot_chunk(4 * d * d), rng, workers)
    return np.concatenate(parts) if parts else np.zeros(0)


# --- aggregation --------------------------------------------------------------

def median_of_means(values, K: int, L: int) -> float:
    """Split ``values`` in order into K blocks of L, average each block, take the median."""
    values = np.asarray(values, dtype=float)
    if K < 1 or L < 1:
        raise ValueError("K and L must be positive")
    if values.size != K * L:
        raise LengthMismatchError(f"{values.size} values cannot form {K} blocks of {L}")
    return float(np.median(values.reshape(K, L).mean(axis=1)))


@dataclass(frozen=True)
class EstimatorConfig:
    gamma: float
    delta: float
    K: int
    L: int
    bound_kind: str = "exact"
    epsilon: float = 0.0
    bias_bound: float = 0.0
    variance_bound: float = 0.0

    def __post_init__(self):
        if self.K < 1 or self.L < 1:
            raise ValueError("K and L must be >= 1")
        if not (0 < self.gamma < 1 and 0 < self.delta < 1):
            raise ValueError("gamma and delta must lie in (0, 1)")
        if self.bound_kind not in BOUND_KINDS:
            raise ValueError(f"bound_kind must be one of {BOUND_KINDS}")

    @property
    def total_shots(self) -> int:
        return self.K * self.L


def theorem_bounds(kind: str, eps: float, obs: Observable) -> tuple[float, float]:
    """Single-snapshot ``(bias bound, variance bound)`` for a design of the given kind.

    relative: 2 eps Tr(O),             3 Tr(O0^2) + 10 eps Tr(O)^2
    additive: (2^n+1) eps ||O||,       3 Tr(O0^2) + 3 eps ||O||^2 (2^n+1)^2
    pseudo:   2 (2^n+1) eps ||O||,     3 Tr(O0^2) + 6 eps ||O||^2 (2^n+1)^2
    """
    base = 3.0 * obs.traceless_sq
    d1 = obs.dim + 1
    if kind == "exact":
        return 0.0, base
    if kind == "relative":
        return 2 * eps * obs.trace, base + 10 * eps * obs.trace ** 2
    if kind == "additive":
        return d1 * eps * obs.op_norm, base + 3 * eps * obs.op_norm ** 2 * d1 ** 2
    if kind == "pseudo":
        return 2 * d1 * eps * obs.op_norm, base + 6 * eps * obs.op_norm ** 2 * d1 ** 2
    raise ValueError(f"unknown bound kind {kind!r}")


def batch_count(delta: float) -> int:
    """K = ceil(2 ln(2/delta)); the natural log matches the 2 exp(-K/2) tail."""
    return max(1, math.ceil(round(2.0 * math.log(2.0 / delta), 9)))


def batch_size(gamma: float, variance_bound: float) -> int:
    """L = ceil(34 sigma^2 / gamma^2), at least 1."""
    return max(1, math.ceil(round(MOM_CONSTANT * variance_bound / gamma ** 2, 9)))


def plan(gamma: float, delta: float, bound_kind: str, obs: Observable, eps: float = 0.0) -> EstimatorConfig:
    """Choose K and L from the guarantee matching ``bound_kind``.

    The relative guarantee only covers positive observables on n >= 2 qubits.
    """
    if bound_kind == "relative":
        if not obs.is_positive():
            raise NonPositiveObservableError("the relative-design guarantee needs a positive observable")
        if obs.n < 2:
            raise ValueError("the relative-design guarantee needs n >= 2")
    if eps < 0:
        raise ValueError("epsilon must be non-negative")
    if bound_kind == "exact":
        eps = 0.0
    bias, var = theorem_bounds(bound_kind, eps, obs)
    return EstimatorConfig(
        gamma=gamma,
        delta=delta,
        K=batch_count(delta),
        L=batch_size(gamma, var),
        bound_kind=bound_kind,
        epsilon=eps,
        bias_bound=bias,
        variance_bound=var,
    )


@dataclass
class EstimateReport:
    estimate: float
    K: int
    L: int
    total_shots: int
    empirical_variance: float
    bias_bound: float
    variance_bound: float
    seed: int | None
    bound_kind: str = "exact"
    epsilon: float = 0.0
    gamma: float = 0.0
    delta: float = 0.0
    observable_positive: bool = False
    log_base: str = "e"

    def to_json(self) -> dict:
        return asdict(self)


def report_from_values(values: np.ndarray, config: EstimatorConfig, obs: Observable,
                       seed: int | None = None) -> EstimateReport:
    values = np.asarray(values, dtype=float)
    return EstimateReport(
        estimate=median_of_means(values, config.K, config.L),
        K=config.K,
        L=config.L,
        total_shots=config.total_shots,
        empirical_variance=float(values.var(ddof=1)) if values.size > 1 else 0.0,
        bias_bound=config.bias_bound,
        variance_bound=config.variance_bound,
        seed=seed,
        bound_kind=config.bound_kind,
        epsilon=config.epsilon,
        gamma=config.gamma,
        delta=config.delta,
        observable_positive=obs.is_positive(),
    )


def estimate_observable(rho, ens: Ensemble, obs: Observable, config: EstimatorConfig,
                        rng: np.random.Generator, seed: int | None = None, workers: int = 1) -> EstimateReport:
    """Median-of-means estimate of ``Tr(O rho)`` from ``K*L`` fresh snapshots."""
    values = snapshot_values(rho, ens, obs, config.total_shots, rng, workers)
    return report_from_values(values, config, obs, seed)


# --- measurement channel ------------------------------------------------------

def depolarizing_inverse(a, n: int) -> np.ndarray:
    """``(2^n + 1) A - Tr(A) I``."""
    a = np.asarray(a, dtype=complex)
    d = 1 << n
    if a.shape != (d, d):
        raise DimMismatchError(f"{a.shape} matrix for n={n}")
    return (d + 1) * a - np.trace(a) * np.eye(d)


def _channel_from_states(vectors: np.ndarray, weights: np.ndarray, rho: st.DensityMatrix) -> np.ndarray:
    n, d = rho.n, rho.dim
    xs, zs = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
    xs, zs = xs.ravel(), zs.ravel()
    out = np.zeros((d, d), dtype=complex)
    for vec, w in zip(vectors, weights):
        v = shadow_vectors(np.broadcast_to(vec, (d * d, d)), n, xs, zs)
        p = np.einsum("si,ij,sj->s", v.conj(), rho.matrix, v).real / d
        out += w * (v.T * p) @ v.conj()
    return out


def channel_from_moment(moment2: np.ndarray, rho) -> np.ndarray:
    """Measurement channel from the ensemble's 2-copy moment.

    ``(1/2^n) Tr_1[ sum_{x,z} P^(x)2 conj(M2) P^(x)2^H (rho (x) I) ]``.
    """
    rho = st.as_density(rho)
    n, d = rho.n, rho.dim
    tw = pauli_twirl(np.asarray(moment2).conj(), n, 2)
    prod = tw @ np.kron(rho.matrix, np.eye(d))
    return np.einsum("aibi->ab", prod.reshape(d, d, d, d).transpose(1, 0, 3, 2)) / d


def channel_apply(ens: Ensemble, rho, mode: str = "exact", samples: int = 0,
                  rng: np.random.Generator | None = None) -> np.ndarray:
    """``E_zeta sum_{x,z} Pr[x,z|zeta] |v><v|`` with ``v = X^x Z^z conj(zeta)``.

    ``exact`` enumerates a finite support (or uses a closed-form 2-moment);
    ``mc`` averages the exact per-zeta sum over sampled auxiliary states.
    """
    rho = st.as_density(rho)
    if rho.n != ens.n:
        raise DimMismatchError(f"{rho.n}-qubit input with {ens.n}-qubit ensemble")
    if mode == "exact":
        sup = ens.support()
        if sup is not None:
            return _channel_from_states(sup[0], sup[1], rho)
        m2 = ens.analytic_moment(2)
        if m2 is None:
            from .errors import NotEnumerableError

            raise NotEnumerableError(f"{ens!r} cannot be enumerated")
        return channel_from_moment(m2, rho)
    if mode in ("mc", "monte_carlo"):
        if samples < 1 or rng is None:
            raise ValueError("Monte-Carlo channel needs samples >= 1 and an rng")
        vecs, _ = ens.sample(samples, rng)
        return _channel_from_states(vecs, np.full(samples, 1.0 / samples), rho)
    raise ValueError(f"unknown mode {mode!r}")


def exact_shadow_mean(ens: Ensemble, rho) -> np.ndarray:
    """Expectation of the snapshot matrix, ``M^-1_Haar(M_S(rho))``."""
    rho = st.as_density(rho)
    return depolarizing_inverse(channel_apply(ens, rho), rho.n)


def exact_estimator_moments(ens: Ensemble, rho, obs: Observable) -> tuple[float, float]:
    """Exact mean and variance of ``Tr(O rho_hat)`` over a finite ensemble."""
    rho = st.as_density(rho)
    sup = ens.support()
    if sup is None:
        from .errors import NotEnumerableError

        raise NotEnumerableError(f"{ens!r} has no finite support")
    d = rho.dim
    xs, zs = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
    xs, zs = xs.ravel(), zs.ravel()
    m1 = m2 = 0.0
    for vec, w in zip(*sup):
        v = shadow_vectors(np.broadcast_to(vec, (d * d, d)), rho.n, xs, zs)
        p = np.einsum("si,ij,sj->s", v.conj(), rho.matrix, v).real / d
        est = (d + 1) * obs.quadratic_form(v) - obs.trace
        m1 += w * np.dot(p, est)
        m2 += w * np.dot(p, est ** 2)
    return float(m1), float(m2 - m1 ** 2)


@dataclass
class BiasVariance:
    bias: float
    variance: float
    se_bias: float
    se_variance: float
    mean: float
    true_value: float
    shots: int

    def to_json(self) -> dict:
        return asdict(self)


def sample_stats(values: np.ndarray, true_value: float) -> BiasVariance:
    """Sample bias/variance with standard errors (variance SE from the 4th central moment)."""
    values = np.asarray(values, dtype=float)
    m = values.size
    if m < 2:
        raise ValueError("need at least two samples")
    mean = float(values.mean())
    var = float(values.var(ddof=1))
    centered = values - mean
    m4 = float(np.mean(centered ** 4))
    se_var = math.sqrt(max(m4 - var ** 2, 0.0) / m)
    return BiasVariance(
        bias=mean - true_value,
        variance=var,
        se_bias=math.sqrt(var / m),
        se_variance=se_var,
        mean=mean,
        true_value=true_value,
        shots=m,
    )


def empirical_bias_variance(rho, ens: Ensemble, obs: Observable, shots: int, rng: np.random.Generator,
                            workers: int = 1) -> BiasVariance:
    if shots < 2:
        raise ValueError("need at least two shots")
    values = snapshot_values(rho, ens, obs, shots, rng, workers)
    return sample_stats(values, obs.expectation(rho))
