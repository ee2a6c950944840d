"""Moment operators, state ensembles and approximate-design distances.

The t-copy moment of an ensemble is ``E[|psi><psi|^(x)t]``; for Haar-random
states it is the normalized projector onto the symmetric subspace. Ensembles
know how to sample themselves and, when possible, expose either a finite
weighted support or a closed-form moment so that exact moments are available.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np

from . import states as st
from .errors import NotEnumerableError, SizeLimitError, SupportLeakError
from .linalg import hermitian_eig, trace_norm
from .rng import run_chunked, shot_chunk

MAX_TOTAL_QUBITS = 12
SUPPORT_LEAK_TOL = 1e-6
BOUND_TOL = 1e-9


def _check_size(n: int, t: int) -> None:
    if n < 1 or t < 1:
        raise ValueError(f"need n, t >= 1 (got n={n}, t={t})")
    if n * t > MAX_TOTAL_QUBITS:
        raise SizeLimitError(f"n*t = {n * t} exceeds {MAX_TOTAL_QUBITS}")


def sym_dim(n: int, t: int) -> int:
    """Dimension of the symmetric subspace of t copies of n qubits: C(2^n + t - 1, t)."""
    _check_size(n, t)
    return math.comb((1 << n) + t - 1, t)


def permutation_operator(n: int, t: int, perm) -> np.ndarray:
    """Operator permuting the t tensor factors: ``|i_1..i_t> -> |i_perm^-1(1) ..>``.

    Built by permuting base-2^n digits of the basis index.
    """
    _check_size(n, t)
    d = 1 << n
    dim = d ** t
    digits = np.indices((d,) * t).reshape(t, -1)
    dest_digits = np.empty_like(digits)
    for k, p in enumerate(perm):
        dest_digits[p] = digits[k]
    dest = np.ravel_multi_index(tuple(dest_digits), (d,) * t)
    out = np.zeros((dim, dim))
    out[dest, np.arange(dim)] = 1.0
    return out


@lru_cache(maxsize=16)
def _sym_projector(n: int, t: int) -> np.ndarray:
    perms = list(itertools.permutations(range(t)))
    proj = sum(permutation_operator(n, t, p) for p in perms) / len(perms)
    proj.setflags(write=False)
    return proj


def sym_projector(n: int, t: int) -> np.ndarray:
    """Projector onto the symmetric subspace (average of all copy permutations)."""
    _check_size(n, t)
    return _sym_projector(n, t)


@lru_cache(maxsize=16)
def _sym_basis(n: int, t: int) -> np.ndarray:
    d = 1 << n
    digits = np.sort(np.indices((d,) * t).reshape(t, -1), axis=0)
    # each column: normalized uniform superposition over one multiset of digits
    _, col, counts = np.unique(digits.T, axis=0, return_inverse=True, return_counts=True)
    col = col.reshape(-1)
    basis = np.zeros((d ** t, counts.size))
    basis[np.arange(d ** t), col] = 1.0 / np.sqrt(counts[col])
    basis.setflags(write=False)
    return basis


def sym_basis(n: int, t: int) -> np.ndarray:
    """Orthonormal basis of the symmetric subspace as columns (real, d^t x d_s)."""
    _check_size(n, t)
    return _sym_basis(n, t)


def tensor_powers(vectors: np.ndarray, t: int) -> np.ndarray:
    """Rows ``v^(x)t`` for each row ``v``."""
    vectors = np.atleast_2d(vectors)
    out = vectors
    for _ in range(t - 1):
        out = (out[:, :, None] * vectors[:, None, :]).reshape(len(vectors), -1)
    return out


@dataclass
class MomentOperator:
    """t-copy moment ``E[|psi><psi|^(x)t]`` as a dense 2^(nt) matrix."""

    n: int
    t: int
    matrix: np.ndarray
    provenance: str = "exact"  # "exact" or "monte_carlo"
    samples: int | None = None

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_exact(self) -> bool:
        return self.provenance == "exact"


def haar_moment(n: int, t: int) -> MomentOperator:
    """``Pi_sym / dim(Sym)``."""
    return MomentOperator(n, t, sym_projector(n, t) / sym_dim(n, t) + 0j)


# --- ensembles ------------------------------------------------------------

class Ensemble:
    """A distribution over pure n-qubit states.

    Subclasses implement ``sample`` and optionally ``support`` (finite weighted
    list) and/or ``analytic_moment`` (closed form).
    """

    name = "ensemble"

    def __init__(self, n: int):
        self.n = int(n)

    def sample(self, count: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(vectors, keys)``: ``count`` states as rows and their descriptors."""
        raise NotImplementedError

    def support(self) -> tuple[np.ndarray, np.ndarray] | None:
        return None

    def analytic_moment(self, t: int) -> np.ndarray | None:
        return None

    def state_for_key(self, key: int) -> st.PureState | None:
        sup = self.support()
        if sup is None or key < 0:
            return None
        return st.PureState(self.n, sup[0][key])

    def describe_key(self, key: int) -> str:
        return f"{self.name}:{key}" if key >= 0 else f"{self.name}:draw"

    def sample_state(self, rng: np.random.Generator) -> st.PureState:
        vecs, _ = self.sample(1, rng)
        return st.PureState(self.n, vecs[0])

    def __repr__(self) -> str:
        return f"{type(self).__name__}(n={self.n})"


class HaarEnsemble(Ensemble):
    name = "haar"

    def sample(self, count, rng):
        return st.haar_vectors(self.n, count, rng), np.full(count, -1, dtype=np.int64)

    def analytic_moment(self, t):
        return haar_moment(self.n, t).matrix


class RealHaarEnsemble(Ensemble):
    """Orthogonally invariant real unit vectors."""

    name = "real_haar"

    def sample(self, count, rng):
        return st.real_haar_vectors(self.n, count, rng), np.full(count, -1, dtype=np.int64)

    def analytic_moment(self, t):
        return real_gaussian_moment(self.n, t) + 0j


class BinaryPhaseEnsemble(Ensemble):
    """``2^(-n/2) sum_b (-1)^f(b) |b>`` for uniformly random Boolean f."""

    name = "binary_phase"
    MAX_ENUM = 3

    def sample(self, count, rng):
        vecs = st.binary_phase_vectors(self.n, count, rng)
        if self.n > self.MAX_ENUM:
            return vecs, np.full(count, -1, dtype=np.int64)
        # key = truth table of f read as an integer (bit b of key is f(b))
        bits = (vecs.real < 0).astype(np.int64)
        keys = bits @ (1 << np.arange(bits.shape[1], dtype=np.int64))
        return vecs, keys

    def support(self):
        if self.n > self.MAX_ENUM:
            return None
        d = 1 << self.n
        keys = np.arange(1 << d)
        bits = (keys[:, None] >> np.arange(d)[None, :]) & 1
        vecs = ((1 - 2 * bits) / np.sqrt(d)).astype(complex)
        return vecs, np.full(len(vecs), 1.0 / len(vecs))


class StabilizerEnsemble(Ensemble):
    """Uniform distribution over stabilizer states (exact 3-design)."""

    name = "stabilizer"

    def sample(self, count, rng):
        if self.n <= 3:
            table = st.stabilizer_table(self.n)
            keys = rng.integers(0, len(table), size=count)
            return table[keys], keys
        return st.stabilizer_vectors(self.n, count, rng), np.full(count, -1, dtype=np.int64)

    def support(self):
        if self.n > 3:
            return None
        table = st.stabilizer_table(self.n)
        return table, np.full(len(table), 1.0 / len(table))


class FiniteEnsemble(Ensemble):
    """Explicit weighted list of states."""

    name = "finite"

    def __init__(self, vectors, weights=None, name: str | None = None):
        vecs = np.atleast_2d(np.asarray(vectors, dtype=complex))
        vecs = vecs / np.linalg.norm(vecs, axis=1, keepdims=True)
        super().__init__(st.qubits_for_dim(vecs.shape[1]))
        w = np.full(len(vecs), 1.0 / len(vecs)) if weights is None else np.asarray(weights, dtype=float)
        if w.shape != (len(vecs),) or np.any(w < 0):
            raise ValueError("weights must be non-negative, one per state")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {w.sum()}, not 1")
        self._vecs, self._w = vecs, w
        if name:
            self.name = name

    def sample(self, count, rng):
        keys = rng.choice(len(self._vecs), size=count, p=self._w)
        return self._vecs[keys], keys

    def support(self):
        return self._vecs, self._w


class MixtureEnsemble(Ensemble):
    """With probability ``eps/2`` emit the fixed state ``psi``, otherwise sample ``base``.

    Its t-moment is ``(1 - eps/2) M_base + (eps/2) |psi><psi|^(x)t``.
    """

    name = "mixture"

    def __init__(self, base: Ensemble, psi: st.PureState, eps: float):
        if not 0.0 <= eps < 1.0 + 1e-15:
            raise ValueError(f"mixture parameter must lie in [0, 1), got {eps}")
        if psi.n != base.n:
            raise ValueError("psi and base ensemble act on different qubit counts")
        super().__init__(base.n)
        self.base, self.psi, self.eps = base, psi, float(eps)

    @property
    def p_psi(self) -> float:
        return self.eps / 2

    def sample(self, count, rng):
        pick = rng.random(count) < self.p_psi
        vecs, keys = self.base.sample(count, rng)
        vecs = vecs.copy()
        vecs[pick] = self.psi.amplitudes
        base_sup = self.base.support()
        keys = keys.copy()
        keys[pick] = len(base_sup[0]) if base_sup is not None else -2
        return vecs, keys

    def support(self):
        sup = self.base.support()
        if sup is None:
            return None
        vecs = np.vstack([sup[0], self.psi.amplitudes[None, :]])
        w = np.concatenate([(1 - self.p_psi) * sup[1], [self.p_psi]])
        return vecs, w

    def analytic_moment(self, t):
        base = self.base.analytic_moment(t)
        if base is None:
            sup = self.base.support()
            if sup is None:
                return None
            base = _weighted_moment(sup[0], sup[1], t)
        psi_t = tensor_powers(self.psi.amplitudes[None, :], t)[0]
        return (1 - self.p_psi) * base + self.p_psi * np.outer(psi_t, psi_t.conj())

    def describe_key(self, key):
        if key == -2:
            return "mixture:psi"
        return f"mixture:{key}" if key >= 0 else f"mixture:{self.base.name}:draw"


class PointEnsemble(FiniteEnsemble):
    """Always the same state."""

    name = "point"

    def __init__(self, state: st.PureState):
        super().__init__(state.amplitudes[None, :], [1.0], name="point")


def adversarial_mixture(n: int, t: int, eps: float, psi: st.PureState | None = None) -> MixtureEnsemble:
    """Haar states mixed with a fixed state ``psi`` at weight ``eps/2``.

    An additive eps-approximate t-design whose relative error grows with the
    symmetric-subspace dimension. ``t`` is only validated here; the ensemble
    itself serves every moment order.
    """
    _check_size(n, t)
    psi = psi if psi is not None else st.PureState.basis(n, 0)
    return MixtureEnsemble(HaarEnsemble(n), psi, eps)


def real_gaussian_moment(n: int, t: int) -> np.ndarray:
    """``E[|v><v|^(x)t]`` for a uniformly random real unit vector (Wick/Isserlis sum)."""
    _check_size(n, t)
    d = 1 << n
    letters = "abcdefghijkl"[: 2 * t]
    eye = np.eye(d)
    total = np.zeros((d,) * (2 * t))
    for pairs in _perfect_matchings(list(range(2 * t))):
        spec = ",".join(letters[p] + letters[q] for p, q in pairs) + "->" + letters
        total += np.einsum(spec, *([eye] * t))
    norm = np.prod([d + 2 * k for k in range(t)], dtype=float)
    return total.reshape(d ** t, d ** t) / norm


def _perfect_matchings(items: list[int]):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for i, partner in enumerate(rest):
        for tail in _perfect_matchings(rest[:i] + rest[i + 1:]):
            yield [(first, partner)] + tail


def _weighted_moment(vectors: np.ndarray, weights: np.ndarray, t: int) -> np.ndarray:
    tp = tensor_powers(vectors, t)
    return (tp.T * weights) @ tp.conj()


def ensemble_moment(
    ens: Ensemble,
    t: int,
    mode: str = "exact",
    samples: int = 0,
    rng: np.random.Generator | None = None,
    workers: int = 1,
) -> MomentOperator:
    """t-copy moment of ``ens``: exact (support or closed form) or Monte Carlo."""
    _check_size(ens.n, t)
    if mode == "exact":
        sup = ens.support()
        if sup is not None:
            return MomentOperator(ens.n, t, _weighted_moment(sup[0], sup[1], t))
        analytic = ens.analytic_moment(t)
        if analytic is not None:
            return MomentOperator(ens.n, t, np.asarray(analytic, dtype=complex))
        raise NotEnumerableError(f"{ens!r} has neither a finite support nor a closed-form moment")
    if mode in ("mc", "monte_carlo"):
        if samples < 1 or rng is None:
            raise ValueError("Monte-Carlo moments need samples >= 1 and an rng")
        dim = (1 << ens.n) ** t

        def part(size, gen):
            vecs, _ = ens.sample(size, gen)
            tp = tensor_powers(vecs, t)
            return tp.T @ tp.conj()

        parts = run_chunked(part, samples, shot_chunk(dim * 4), rng, workers)
        return MomentOperator(ens.n, t, sum(parts) / samples, "monte_carlo", samples)
    raise ValueError(f"unknown moment mode {mode!r}")


# --- design distances -----------------------------------------------------

def support_leak(m: MomentOperator) -> float:
    """Frobenius norm of the part of ``m`` outside the symmetric subspace."""
    b = sym_basis(m.n, m.t)
    inside = b @ (b.T @ m.matrix @ b) @ b.T
    return float(np.linalg.norm(m.matrix - inside))


def restricted(m: MomentOperator, check: bool = True) -> np.ndarray:
    """``B^T M B`` in an orthonormal basis ``B`` of the symmetric subspace."""
    if check:
        leak = support_leak(m)
        if leak > SUPPORT_LEAK_TOL:
            raise SupportLeakError(f"moment has weight {leak:.3e} outside the symmetric subspace")
    b = sym_basis(m.n, m.t)
    return b.T @ m.matrix @ b


def additive_epsilon(m: MomentOperator) -> float:
    """``|| M - H ||_1`` with H the Haar moment."""
    h = haar_moment(m.n, m.t).matrix
    return trace_norm(m.matrix - h)


def relative_epsilon(m: MomentOperator) -> float:
    """Smallest eps with ``(1-eps) H <= M <= (1+eps) H``.

    Computed from the spectrum of M inside the symmetric subspace:
    ``max |d_s * lambda - 1|``.
    """
    ds = sym_dim(m.n, m.t)
    w, _ = hermitian_eig(restricted(m))
    return float(np.max(np.abs(ds * w - 1.0)))


@dataclass
class ConversionReport:
    n: int
    t: int
    sym_dim: int
    eps_add: float
    eps_rel: float
    add_le_rel: bool
    rel_le_symdim_add: bool
    rel_le_full_dim_add: bool

    @property
    def bounds_ok(self) -> bool:
        return self.add_le_rel and self.rel_le_symdim_add and self.rel_le_full_dim_add

    @property
    def ratio(self) -> float:
        return self.eps_rel / self.eps_add if self.eps_add > 0 else float("nan")

    def to_json(self) -> dict:
        out = asdict(self)
        out["bounds_ok"] = self.bounds_ok
        out["ratio"] = None if math.isnan(self.ratio) else self.ratio
        return out


def conversion_report(m: MomentOperator) -> ConversionReport:
    """Both design distances of an exact moment and the conversion inequalities between them.

    Checks ``eps_add <= eps_rel <= dim(Sym) * eps_add`` and the looser
    ``eps_rel <= 2^(nt) * eps_add``. Values of ``eps_rel`` above 1 are reported as is.
    """
    if not m.is_exact:
        raise ValueError("conversion bounds are exact statements; Monte-Carlo moments are refused")
    ds = sym_dim(m.n, m.t)
    ea = additive_epsilon(m)
    er = relative_epsilon(m)
    return ConversionReport(
        n=m.n,
        t=m.t,
        sym_dim=ds,
        eps_add=ea,
        eps_rel=er,
        add_le_rel=ea <= er + BOUND_TOL,
        rel_le_symdim_add=er <= ds * ea + BOUND_TOL,
        rel_le_full_dim_add=er <= (1 << (m.n * m.t)) * ea + BOUND_TOL,
    )


def pauli_twirl(matrix: np.ndarray, n: int, t: int) -> np.ndarray:
    """``sum_{x,z} P^(x)t A P^(x)t^H`` with ``P = X^x Z^z`` over all 4^n masks."""
    d = 1 << n
    out = np.zeros_like(matrix, dtype=complex)
    for x in range(d):
        for z in range(d):
            p = st.pauli_matrix(n, x, z)
            pt = p
            for _ in range(t - 1):
                pt = np.kron(pt, p)
            out += pt @ matrix @ pt.conj().T
    return out
