"""Quantum state types, Pauli masks and auxiliary-state samplers.

Basis convention: qubit 0 is the most significant bit of a computational basis
index. Bit strings (``PauliMask.x`` / ``PauliMask.z``) are stored as integers
using the same convention, so ``x = 0b10`` on two qubits flips qubit 0.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DimMismatchError, LengthMismatchError, SizeLimitError
from .linalg import hermitian_eig, hermitian_part

MAX_QUBITS = 12
NORM_TOL = 1e-10


def popcount(a):
    """Bit count, elementwise for integer arrays."""
    a = np.asarray(a, dtype=np.int64)
    out = np.zeros_like(a)
    while np.any(a):
        out += a & 1
        a = a >> 1
    return out


@lru_cache(maxsize=None)
def parity_table(n: int) -> np.ndarray:
    """``table[z, b] = (-1)^(z . b)`` for all n-bit strings, as float."""
    d = 1 << n
    idx = np.arange(d)
    return np.where(popcount(idx[:, None] & idx[None, :]) % 2 == 1, -1.0, 1.0)


def _check_qubits(n: int) -> int:
    n = int(n)
    if n < 1:
        raise ValueError(f"qubit count must be >= 1, got {n}")
    if n > MAX_QUBITS:
        raise SizeLimitError(f"n = {n} exceeds the supported maximum of {MAX_QUBITS} qubits")
    return n


def qubits_for_dim(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if dim < 2 or (1 << n) != dim:
        raise DimMismatchError(f"dimension {dim} is not a power of two >= 2")
    return n


@dataclass(frozen=True, eq=False)
class PureState:
    """Normalized state vector on ``n`` qubits."""

    n: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != 1 << self.n:
            raise DimMismatchError(f"{amps.size} amplitudes do not describe {self.n} qubits")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalized (norm {norm:.12f})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_vector(cls, vec, normalize: bool = True) -> "PureState":
        v = np.asarray(vec, dtype=complex).reshape(-1)
        if normalize:
            v = v / np.linalg.norm(v)
        return cls(qubits_for_dim(v.size), v)

    @classmethod
    def basis(cls, n: int, index: int = 0) -> "PureState":
        v = np.zeros(1 << n, dtype=complex)
        v[index] = 1.0
        return cls(n, v)

    @property
    def dim(self) -> int:
        return 1 << self.n

    def projector(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())

    def density(self) -> "DensityMatrix":
        return DensityMatrix(self.n, self.projector())

    def to_json(self) -> dict:
        return {"n": self.n, "re": self.amplitudes.real.tolist(), "im": self.amplitudes.imag.tolist()}

    @classmethod
    def from_json(cls, data: dict) -> "PureState":
        amps = np.asarray(data["re"], dtype=float) + 1j * np.asarray(data.get("im", 0.0), dtype=float)
        state = cls.from_vector(amps)
        if "n" in data and int(data["n"]) != state.n:
            raise DimMismatchError(f"declared n={data['n']} but {amps.size} amplitudes given")
        return state


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, positive semidefinite, unit-trace matrix on ``n`` qubits."""

    n: int
    matrix: np.ndarray

    def __post_init__(self):
        m = hermitian_part(self.matrix)
        if m.shape[0] != 1 << self.n:
            raise DimMismatchError(f"{m.shape} matrix does not describe {self.n} qubits")
        tr = np.trace(m).real
        if abs(tr - 1.0) > NORM_TOL:
            raise ValueError(f"density matrix trace is {tr}")
        if np.linalg.eigvalsh(m)[0] < -NORM_TOL:
            raise ValueError("density matrix has a negative eigenvalue")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_matrix(cls, m) -> "DensityMatrix":
        m = np.asarray(m, dtype=complex)
        return cls(qubits_for_dim(m.shape[0]), m)

    @classmethod
    def maximally_mixed(cls, n: int) -> "DensityMatrix":
        d = 1 << n
        return cls(n, np.eye(d, dtype=complex) / d)

    @property
    def dim(self) -> int:
        return 1 << self.n

    def spectrum(self) -> tuple[np.ndarray, np.ndarray]:
        """Eigenvalues (clipped to >= 0 and renormalized) and eigenvectors, largest first."""
        w, v = hermitian_eig(self.matrix)
        w = np.clip(w, 0.0, None)
        return w / w.sum(), v

    def to_json(self) -> dict:
        return {"n": self.n, "re": self.matrix.real.tolist(), "im": self.matrix.imag.tolist()}

    @classmethod
    def from_json(cls, data: dict) -> "DensityMatrix":
        m = np.asarray(data["re"], dtype=float) + 1j * np.asarray(data.get("im", 0.0), dtype=float)
        rho = cls.from_matrix(m)
        if "n" in data and int(data["n"]) != rho.n:
            raise DimMismatchError(f"declared n={data['n']} but matrix is {m.shape}")
        return rho


def as_density(rho) -> DensityMatrix:
    if isinstance(rho, DensityMatrix):
        return rho
    if isinstance(rho, PureState):
        return rho.density()
    return DensityMatrix.from_matrix(rho)


@dataclass(frozen=True)
class PauliMask:
    """The Pauli operator ``X^x Z^z`` on ``n`` qubits (x, z as integers, qubit 0 = MSB)."""

    n: int
    x: int
    z: int

    def __post_init__(self):
        limit = 1 << self.n
        if not (0 <= self.x < limit and 0 <= self.z < limit):
            raise LengthMismatchError(f"mask ({self.x}, {self.z}) does not fit in {self.n} bits")

    @classmethod
    def from_bits(cls, x: str, z: str) -> "PauliMask":
        if len(x) != len(z):
            raise LengthMismatchError(f"x has {len(x)} bits but z has {len(z)}")
        return cls(len(x), int(x, 2) if x else 0, int(z, 2) if z else 0)

    @property
    def x_bits(self) -> str:
        return format(self.x, f"0{self.n}b")

    @property
    def z_bits(self) -> str:
        return format(self.z, f"0{self.n}b")

    def matrix(self) -> np.ndarray:
        return pauli_matrix(self.n, self.x, self.z)


def pauli_matrix(n: int, x: int, z: int) -> np.ndarray:
    """Dense ``X^x Z^z``: column b holds (-1)^(z.b) at row b xor x."""
    d = 1 << n
    b = np.arange(d)
    m = np.zeros((d, d), dtype=complex)
    m[b ^ x, b] = parity_table(n)[z]
    return m


def apply_pauli_batch(vectors: np.ndarray, n: int, x, z) -> np.ndarray:
    """Apply ``X^x Z^z`` to each row of ``vectors`` (shape ``(S, 2^n)``); x, z per row."""
    vectors = np.asarray(vectors)
    d = 1 << n
    if vectors.shape[-1] != d:
        raise LengthMismatchError(f"vectors of length {vectors.shape[-1]} do not match n={n}")
    x = np.broadcast_to(np.asarray(x, dtype=np.int64), vectors.shape[:1])
    z = np.broadcast_to(np.asarray(z, dtype=np.int64), vectors.shape[:1])
    b = np.arange(d)
    signs = parity_table(n)[z]  # (S, d): (-1)^(z.b)
    out = np.empty_like(vectors, dtype=complex)
    rows = np.arange(vectors.shape[0])[:, None]
    out[rows, b[None, :] ^ x[:, None]] = signs * vectors
    return out


def apply_pauli(state: PureState, mask: PauliMask) -> PureState:
    """``X^x Z^z |state>``: phase (-1)^(z.b) on basis index b, then b -> b xor x."""
    if mask.n != state.n:
        raise LengthMismatchError(f"mask on {mask.n} qubits applied to a {state.n}-qubit state")
    out = apply_pauli_batch(state.amplitudes[None, :], state.n, mask.x, mask.z)[0]
    return PureState(state.n, out)


def conjugate(state: PureState) -> PureState:
    return PureState(state.n, state.amplitudes.conj())


def same_ray(a: PureState, b: PureState, tol: float = 1e-9) -> bool:
    """True when the two states agree up to a global phase."""
    return a.n == b.n and abs(abs(np.vdot(a.amplitudes, b.amplitudes)) - 1.0) <= tol


# --- samplers -------------------------------------------------------------

def _normalize_rows(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def haar_vectors(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` Haar-random state vectors as rows (normalized complex Gaussians)."""
    d = 1 << _check_qubits(n)
    g = rng.standard_normal((count, d, 2))
    return _normalize_rows(g[..., 0] + 1j * g[..., 1])


def real_haar_vectors(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    d = 1 << _check_qubits(n)
    return _normalize_rows(rng.standard_normal((count, d))).astype(complex)


def binary_phase_vectors(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Rows ``2^(-n/2) (-1)^f(b)`` for a fresh uniformly random Boolean f per row."""
    d = 1 << _check_qubits(n)
    bits = rng.integers(0, 2, size=(count, d))
    return ((1 - 2 * bits) / np.sqrt(d)).astype(complex)


def haar_sample(n: int, rng: np.random.Generator) -> PureState:
    return PureState(n, haar_vectors(n, 1, rng)[0])


def real_haar_sample(n: int, rng: np.random.Generator) -> PureState:
    return PureState(n, real_haar_vectors(n, 1, rng)[0])


def binary_phase_sample(n: int, rng: np.random.Generator) -> PureState:
    return PureState(n, binary_phase_vectors(n, 1, rng)[0])


# --- stabilizer states ----------------------------------------------------
#
# Every stabilizer state is (up to phase) 2^(-k/2) sum_y i^(l.y) (-1)^(q(y)) |c + B y>
# with B an n x k full-rank binary matrix, c a coset shift, l in F_2^k and q a
# binary quadratic form (linear terms included). For a fixed affine subspace the
# map (q, l) -> state is a bijection onto its stabilizer states, and the family is
# independent of the chosen basis and shift.

def stabilizer_count(n: int) -> int:
    """Number of n-qubit stabilizer states, 2^n prod_{k=1..n} (2^k + 1)."""
    out = 1 << n
    for k in range(1, n + 1):
        out *= (1 << k) + 1
    return out


def gaussian_binomial(n: int, k: int) -> int:
    """Number of k-dimensional subspaces of F_2^n."""
    num = den = 1
    for i in range(k):
        num *= (1 << (n - i)) - 1
        den *= (1 << (i + 1)) - 1
    return num // den


def _stabilizer_weights(n: int) -> np.ndarray:
    counts = [
        gaussian_binomial(n, k) * (1 << (n - k)) * (1 << (k * (k + 3) // 2)) for k in range(n + 1)
    ]
    return np.asarray(counts, dtype=float) / sum(counts)


def _affine_state(n: int, shift: int, basis: list[int], quad: np.ndarray, lin: np.ndarray) -> np.ndarray:
    """Amplitudes for the affine-subspace parametrization.

    ``quad`` is a k x k upper-triangular 0/1 matrix (diagonal = linear part of q),
    ``lin`` the exponent vector of the i^(l.y) factor.
    """
    k = len(basis)
    vec = np.zeros(1 << n, dtype=complex)
    for ys in itertools.product((0, 1), repeat=k):
        y = np.asarray(ys, dtype=np.int64)
        idx = shift
        for bit, b in zip(ys, basis):
            if bit:
                idx ^= b
        qval = int(y @ np.triu(quad) @ y) & 1
        vec[idx] = (1j ** int(lin @ y)) * (-1) ** qval
    return vec / np.sqrt(1 << k)


def _random_full_rank(n: int, k: int, rng: np.random.Generator) -> list[int]:
    while True:
        rows = [int(v) for v in rng.integers(0, 1 << n, size=k)]
        if _rank(rows) == k:
            return rows


def _rank(vectors: list[int]) -> int:
    basis: list[int] = []
    for v in vectors:
        for b in basis:
            v = min(v, v ^ b)
        if v:
            basis.append(v)
    return len(basis)


def stabilizer_vectors(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` uniformly random stabilizer states as rows."""
    _check_qubits(n)
    weights = _stabilizer_weights(n)
    out = np.empty((count, 1 << n), dtype=complex)
    for s in range(count):
        k = int(rng.choice(n + 1, p=weights))
        basis = _random_full_rank(n, k, rng)
        shift = int(rng.integers(0, 1 << n))
        quad = np.triu(rng.integers(0, 2, size=(k, k)))
        lin = rng.integers(0, 2, size=k)
        out[s] = _affine_state(n, shift, basis, quad, lin)
    return out


def stabilizer_sample(n: int, rng: np.random.Generator) -> PureState:
    return PureState(n, stabilizer_vectors(n, 1, rng)[0])


def _subspaces(n: int, k: int) -> list[tuple[int, ...]]:
    """All k-dimensional subspaces of F_2^n, each as a sorted tuple of its elements."""
    seen = set()
    out = []
    for gens in itertools.combinations(range(1, 1 << n), k):
        if _rank(list(gens)) != k:
            continue
        span = {0}
        for g in gens:
            span |= {s ^ g for s in span}
        key = tuple(sorted(span))
        if key not in seen:
            seen.add(key)
            out.append(key)
    return out


def _basis_of(span: tuple[int, ...]) -> list[int]:
    basis: list[int] = []
    for v in span:
        if v and _rank(basis + [v]) > len(basis):
            basis.append(v)
    return basis


@lru_cache(maxsize=None)
def _stabilizer_table(n: int) -> np.ndarray:
    rows = []
    for k in range(n + 1):
        tri = [(i, j) for i in range(k) for j in range(i, k)]
        for span in _subspaces(n, k) if k else [(0,)]:
            basis = _basis_of(span)
            cosets = {tuple(sorted(c ^ s for s in span)) for c in range(1 << n)}
            for coset in sorted(cosets):
                shift = coset[0]
                for qbits in itertools.product((0, 1), repeat=len(tri)):
                    quad = np.zeros((k, k), dtype=np.int64)
                    for (i, j), bit in zip(tri, qbits):
                        quad[i, j] = bit
                    for lbits in itertools.product((0, 1), repeat=k):
                        rows.append(_affine_state(n, shift, basis, quad, np.asarray(lbits, dtype=np.int64)))
    table = np.asarray(rows)
    table.setflags(write=False)
    return table


def stabilizer_enumerate(n: int) -> list[PureState]:
    """Every n-qubit stabilizer state (n <= 3), one representative per ray."""
    if n > 3:
        raise SizeLimitError("stabilizer enumeration is limited to n <= 3")
    return [PureState(n, v) for v in stabilizer_table(n)]


def stabilizer_table(n: int) -> np.ndarray:
    """Rows are the enumerated stabilizer states for ``n`` qubits (n <= 3)."""
    if n > 3:
        raise SizeLimitError("stabilizer enumeration is limited to n <= 3")
    return _stabilizer_table(_check_qubits(n))


# --- named states ---------------------------------------------------------

_SINGLE = {
    "0": np.array([1, 0], dtype=complex),
    "1": np.array([0, 1], dtype=complex),
    "+": np.array([1, 1], dtype=complex) / np.sqrt(2),
    "-": np.array([1, -1], dtype=complex) / np.sqrt(2),
    "i": np.array([1, 1j], dtype=complex) / np.sqrt(2),
    "-i": np.array([1, -1j], dtype=complex) / np.sqrt(2),
}


def product_state(labels) -> PureState:
    """Product of single-qubit states given as labels from {0, 1, +, -, i, -i}."""
    if isinstance(labels, str):
        labels = ["-i" if tok == "m" else tok for tok in _split_labels(labels)]
    vec = np.ones(1, dtype=complex)
    for lab in labels:
        if lab not in _SINGLE:
            raise ValueError(f"unknown single-qubit state label {lab!r}")
        vec = np.kron(vec, _SINGLE[lab])
    return PureState.from_vector(vec, normalize=False)


def _split_labels(s: str) -> list[str]:
    out, i = [], 0
    while i < len(s):
        if s[i] == "-" and i + 1 < len(s) and s[i + 1] == "i":
            out.append("-i")
            i += 2
        else:
            out.append(s[i])
            i += 1
    return out


def random_density(n: int, rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    """Random mixed state ``G G^H / Tr`` with G a 2^n x rank complex Gaussian matrix."""
    d = 1 << _check_qubits(n)
    r = d if rank is None else int(rank)
    g = rng.standard_normal((d, r)) + 1j * rng.standard_normal((d, r))
    m = g @ g.conj().T
    return DensityMatrix(n, m / np.trace(m).real)


def dumps_state(state: PureState) -> str:
    return json.dumps(state.to_json())
