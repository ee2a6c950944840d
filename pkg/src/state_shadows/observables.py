"""Observables, Born-rule measurement and single-snapshot estimates."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .errors import ConfigError, DimMismatchError
from .linalg import hermitian_eig, hermitian_part, is_psd
from .states import PauliMask, PureState, apply_pauli_batch, as_density, qubits_for_dim

GROUPING_TOL = 1e-8

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class Observable:
    """Hermitian matrix with its spectral decomposition ``O = sum_i a_i P_i``.

    Eigenvalues closer than ``GROUPING_TOL * ||O||`` share one projector. All
    derived quantities are computed once at construction; instances are
    treated as immutable.
    """

    def __init__(self, matrix, name: str | None = None):
        m = hermitian_part(matrix)
        self.n = qubits_for_dim(m.shape[0])
        self.matrix = m
        self.matrix.setflags(write=False)
        self.name = name

        w, v = hermitian_eig(m)
        self.op_norm = float(np.max(np.abs(w)))
        tol = GROUPING_TOL * max(self.op_norm, 1e-300)
        groups: list[list[int]] = []
        for i, lam in enumerate(w):
            if groups and abs(w[groups[-1][0]] - lam) <= tol:
                groups[-1].append(i)
            else:
                groups.append([i])
        self.eigenvalues = np.array([w[g].mean() for g in groups])
        self._group_vectors = [v[:, g] for g in groups]
        self.trace = float(np.trace(m).real)
        d = 1 << self.n
        self.traceless_sq = float(np.sum(np.abs(m) ** 2) - self.trace ** 2 / d)

    @property
    def dim(self) -> int:
        return 1 << self.n

    @property
    def projectors(self) -> list[np.ndarray]:
        return [g @ g.conj().T for g in self._group_vectors]

    def is_positive(self) -> bool:
        return is_psd(self.matrix)

    def expectation(self, rho) -> float:
        rho = as_density(rho)
        if rho.n != self.n:
            raise DimMismatchError(f"{self.n}-qubit observable on a {rho.n}-qubit state")
        return float(np.trace(self.matrix @ rho.matrix).real)

    def outcome_probabilities(self, vectors: np.ndarray) -> np.ndarray:
        """Born probabilities of each grouped eigenvalue for each row of ``vectors``."""
        vectors = np.atleast_2d(vectors)
        if vectors.shape[-1] != self.dim:
            raise DimMismatchError(f"state of dimension {vectors.shape[-1]} vs observable {self.dim}")
        probs = np.stack(
            [np.sum(np.abs(vectors @ g.conj()) ** 2, axis=1) for g in self._group_vectors], axis=1
        )
        return probs / probs.sum(axis=1, keepdims=True)

    def quadratic_form(self, vectors: np.ndarray) -> np.ndarray:
        """``<v|O|v>`` for each row ``v``."""
        vectors = np.atleast_2d(vectors)
        return np.einsum("si,si->s", vectors.conj(), vectors @ self.matrix.T).real

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "kind": "dense",
            "payload": {"re": self.matrix.real.tolist(), "im": self.matrix.imag.tolist()},
        }

    def __repr__(self) -> str:
        label = self.name or "dense"
        return f"Observable({label}, n={self.n}, trace={self.trace:.4g}, norm={self.op_norm:.4g})"


def traceless_part(obs: Observable) -> Observable:
    """``O - Tr(O)/2^n * I``."""
    shift = obs.trace / obs.dim * np.eye(obs.dim)
    return Observable(obs.matrix - shift, name=f"{obs.name}_0" if obs.name else None)


def conjugate_observable(obs: Observable) -> Observable:
    return Observable(obs.matrix.conj(), name=f"{obs.name}*" if obs.name else None)


def measure_batch(obs: Observable, vectors: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One Born-rule measurement of ``obs`` on each row of ``vectors``."""
    probs = obs.outcome_probabilities(vectors)
    cdf = np.cumsum(probs, axis=1)
    u = rng.random(len(probs))[:, None]
    idx = np.minimum((cdf < u).sum(axis=1), len(obs.eigenvalues) - 1)
    return obs.eigenvalues[idx]


def measure(obs: Observable, state: PureState, rng: np.random.Generator) -> float:
    """Return eigenvalue ``a_i`` with probability ``<s|P_i|s>``."""
    if state.n != obs.n:
        raise DimMismatchError(f"{obs.n}-qubit observable measured on {state.n}-qubit state")
    return float(measure_batch(obs, state.amplitudes[None, :], rng)[0])


# --- constructors ---------------------------------------------------------

def pauli_string(label: str) -> Observable:
    """Tensor product of Paulis, e.g. ``"XZ"`` (leftmost factor acts on qubit 0)."""
    label = label.upper()
    if not label or any(c not in PAULI for c in label):
        raise ConfigError(f"invalid Pauli string {label!r}")
    return Observable(reduce(np.kron, (PAULI[c] for c in label)), name=label)


def pauli_sum(terms) -> Observable:
    """Real linear combination ``sum_j c_j P_j`` from ``[(c_j, "XZ..."), ...]``."""
    terms = list(terms)
    if not terms:
        raise ConfigError("empty Pauli sum")
    m = sum(float(c) * pauli_string(p).matrix for c, p in terms)
    return Observable(m, name="+".join(p for _, p in terms))


def gue(n: int, rng: np.random.Generator) -> Observable:
    """Random GUE observable ``(G + G^H) / (2 sqrt(2^n))``.

    ``G`` has i.i.d. standard complex Gaussian entries (E|G_ij|^2 = 1), so the
    spectrum stays O(1) as n grows.
    """
    d = 1 << n
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return Observable((g + g.conj().T) / (2 * np.sqrt(d)), name="gue")


def random_projector(n: int, rank: int, rng: np.random.Generator) -> Observable:
    d = 1 << n
    g = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    q, _ = np.linalg.qr(g)
    return Observable(q @ q.conj().T, name=f"proj{rank}")


def projector_onto(state: PureState) -> Observable:
    return Observable(state.projector(), name="proj")


def observable_from_json(data: dict, rng: np.random.Generator | None = None) -> Observable:
    """Build from ``{n, kind: pauli|dense|gue, payload}``."""
    try:
        n = int(data["n"])
        kind = data["kind"]
        payload = data.get("payload", {})
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed observable spec: {data!r}") from exc
    if kind == "pauli":
        if isinstance(payload, str):
            obs = pauli_string(payload)
        elif "terms" in payload:
            obs = pauli_sum(payload["terms"])
        else:
            obs = pauli_string(payload["string"])
    elif kind == "dense":
        m = np.asarray(payload["re"], dtype=float) + 1j * np.asarray(payload.get("im", 0.0), dtype=float)
        obs = Observable(m)
    elif kind == "gue":
        seed = payload.get("seed") if isinstance(payload, dict) else None
        from .rng import make_rng

        obs = gue(n, make_rng(seed) if seed is not None else rng or make_rng(None))
    else:
        raise ConfigError(f"unknown observable kind {kind!r}")
    if obs.n != n:
        raise DimMismatchError(f"observable spec declares n={n} but acts on {obs.n} qubits")
    return obs


# --- snapshots ------------------------------------------------------------

@dataclass(frozen=True)
class Snapshot:
    """Classical record of one experiment: the auxiliary state and outcomes (x, z).

    ``key`` identifies the ensemble element (support index for finite
    ensembles) so the auxiliary state can be regenerated; ``zeta`` caches it.
    """

    zeta: PureState
    mask: PauliMask
    key: int = -1
    ensemble: str = field(default="", compare=False)

    def __post_init__(self):
        if self.mask.n != self.zeta.n:
            raise DimMismatchError(f"{self.mask.n}-bit outcomes for a {self.zeta.n}-qubit state")

    def shadow_vector(self) -> np.ndarray:
        """``zeta*_{x,z} = X^x Z^z conj(zeta)``."""
        return apply_pauli_batch(self.zeta.amplitudes.conj()[None, :], self.zeta.n, self.mask.x, self.mask.z)[0]

    def matrix(self) -> np.ndarray:
        """Explicit shadow matrix ``(2^n + 1)|v><v| - I`` (cost 4^n; for checks only)."""
        v = self.shadow_vector()
        d = 1 << self.zeta.n
        return (d + 1) * np.outer(v, v.conj()) - np.eye(d)


def shadow_vectors(zetas: np.ndarray, n: int, x, z) -> np.ndarray:
    return apply_pauli_batch(np.asarray(zetas).conj(), n, x, z)


def shadow_estimates(obs: Observable, zetas: np.ndarray, x, z) -> np.ndarray:
    """Vectorized ``(2^n+1) <v|O|v> - Tr(O)`` over rows of ``zetas``."""
    zetas = np.atleast_2d(zetas)
    if zetas.shape[-1] != obs.dim:
        raise DimMismatchError(f"auxiliary states of dimension {zetas.shape[-1]} vs observable {obs.dim}")
    v = shadow_vectors(zetas, obs.n, x, z)
    # split off the identity part using <v|v> = 1, so multiples of I are estimated exactly
    shift = obs.trace / obs.dim
    o0 = obs.matrix - shift * np.eye(obs.dim)
    q = np.einsum("si,si->s", v.conj(), v @ o0.T).real
    return (obs.dim + 1) * q + shift


def shadow_estimate(obs: Observable, snap: Snapshot) -> float:
    """Estimate ``Tr(O rho_hat)`` without forming the 2^n x 2^n snapshot matrix."""
    if snap.zeta.n != obs.n:
        raise DimMismatchError(f"{obs.n}-qubit observable vs {snap.zeta.n}-qubit snapshot")
    return float(shadow_estimates(obs, snap.zeta.amplitudes[None, :], snap.mask.x, snap.mask.z)[0])
