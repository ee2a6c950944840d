"""Dense complex linear algebra kernel.

Everything is dense numpy. Hermitian eigendecomposition has two routes:
``"lapack"`` (numpy's ``eigh``) and ``"ql"`` (Householder tridiagonalization
followed by implicit-shift QL), which is self-contained and serves as the
independent cross-check of the LAPACK route.
"""
from __future__ import annotations

import math
from functools import reduce

import numpy as np

from .errors import NoConvergenceError, NonHermitianError

HERMITIAN_TOL = 1e-10


def as_matrix(m) -> np.ndarray:
    a = np.asarray(m)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-d array, got shape {a.shape}")
    return a


def hermitian_part(m, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Check ``m`` is Hermitian (relative to its largest entry) and symmetrize it."""
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise NonHermitianError(f"matrix is not square: {a.shape}")
    a = a.astype(complex, copy=False)
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    skew = float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0
    if skew > tol * scale:
        raise NonHermitianError(f"matrix fails Hermiticity check (max |M - M^H| = {skew:.3e})")
    return (a + a.conj().T) / 2


def householder_tridiagonalize(a: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Reduce a Hermitian matrix to real symmetric tridiagonal form.

    Returns ``(diag, offdiag, Z)`` with ``a == Z @ T @ Z^H`` where ``T`` has
    ``diag`` on its diagonal and ``offdiag`` (real, non-negative) on the first
    sub/super diagonals.
    """
    a = np.array(a, dtype=complex)
    n = a.shape[0]
    q = np.eye(n, dtype=complex)
    for k in range(n - 2):
        x = a[k + 1:, k]
        if np.linalg.norm(x[1:]) == 0.0:
            continue
        xnorm = np.linalg.norm(x)
        phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
        v = x.copy()
        v[0] += phase * xnorm
        v /= np.linalg.norm(v)
        vh = v.conj()
        a[k + 1:, :] -= 2.0 * np.outer(v, vh @ a[k + 1:, :])
        a[:, k + 1:] -= 2.0 * np.outer(a[:, k + 1:] @ v, vh)
        q[:, k + 1:] -= 2.0 * np.outer(q[:, k + 1:] @ v, vh)

    diag = a.diagonal().real.copy()
    sub = np.array([a[k + 1, k] for k in range(n - 1)], dtype=complex)
    # diagonal unitary that rotates the complex off-diagonal onto the positive reals
    phases = np.ones(n, dtype=complex)
    for k in range(n - 1):
        mag = abs(sub[k])
        phases[k + 1] = phases[k] * (sub[k] / mag if mag > 0 else 1.0)
    return diag, np.abs(sub), q * phases[None, :]


def tridiagonal_ql(
    diag: np.ndarray, offdiag: np.ndarray, z: np.ndarray, max_iter: int = 60
) -> tuple[np.ndarray, np.ndarray]:
    """Implicit-shift QL on a real symmetric tridiagonal matrix.

    ``z`` holds the basis the tridiagonal matrix is expressed in; its columns
    are rotated into eigenvectors. Returns unsorted ``(eigenvalues, vectors)``.
    """
    d = np.array(diag, dtype=float)
    n = d.size
    e = np.zeros(n)
    e[: n - 1] = offdiag
    zt = np.array(z, dtype=complex).T.copy()  # rows are basis vectors
    eps = np.finfo(float).eps

    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= eps * dd:
                    break
                m += 1
            if m == l:
                break
            it += 1
            if it > max_iter:
                raise NoConvergenceError(f"QL iteration did not converge for eigenvalue {l}")
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            underflow = False
            for i in range(m - 1, l - 1, -1):
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                upper = zt[i + 1].copy()
                zt[i + 1] = s * zt[i] + c * upper
                zt[i] = c * zt[i] - s * upper
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return d, zt.T


def hermitian_eig(m, method: str = "lapack") -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix.

    Returns eigenvalues in descending order and the matching orthonormal
    eigenvectors as columns, so that ``m ~= V @ diag(w) @ V^H``.
    """
    a = hermitian_part(m)
    if a.shape[0] == 0:
        return np.zeros(0), np.zeros((0, 0), dtype=complex)
    if method == "lapack":
        w, v = np.linalg.eigh(a)
    elif method == "ql":
        diag, off, z = householder_tridiagonalize(a)
        w, v = tridiagonal_ql(diag, off, z)
    else:
        raise ValueError(f"unknown eigensolver {method!r}")
    order = np.argsort(w, kind="stable")[::-1]
    return np.asarray(w)[order], np.asarray(v)[:, order]


def eigvalsh(m) -> np.ndarray:
    """Eigenvalues only, descending."""
    return np.linalg.eigvalsh(hermitian_part(m))[::-1]


def kron(*factors) -> np.ndarray:
    """Kronecker product of one or more matrices (or vectors), left to right."""
    if not factors:
        raise ValueError("kron needs at least one factor")
    return reduce(np.kron, (np.asarray(f) for f in factors))


def trace_norm(m) -> float:
    """Schatten-1 norm of a Hermitian matrix: sum of absolute eigenvalues."""
    return float(np.sum(np.abs(eigvalsh(m))))


def operator_norm(m) -> float:
    """Largest absolute eigenvalue of a Hermitian matrix."""
    w = eigvalsh(m)
    return float(np.max(np.abs(w))) if w.size else 0.0


def is_psd(m, tol: float = 1e-10) -> bool:
    w = eigvalsh(m)
    scale = max(1.0, float(np.max(np.abs(w)))) if w.size else 1.0
    return bool(w.size == 0 or w[-1] >= -tol * scale)
