"""Dense Hermitian linear algebra and the monotone-matrix-function kernel.

Everything here operates on small (n <= ~64) dense matrices and is a pure
function of its inputs.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence, Tuple

import numpy as np

HERMITIAN_TOL = 1e-10
PD_TOL = 1e-10
ZERO_TOL = 1e-8
NODE_TOL = 1e-8


class NotHermitianError(ValueError):
    """Input matrix is not Hermitian within tolerance."""


class NotPositiveDefiniteError(ValueError):
    """Matrix expected positive definite has an eigenvalue <= pd_tol."""


def as_hermitian(H, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Validate that ``H`` is Hermitian and return its symmetrized copy.

    Raises :class:`NotHermitianError` if the anti-Hermitian part exceeds
    ``tol`` relative to the matrix scale.
    """
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {H.shape}")
    scale = max(1.0, float(np.linalg.norm(H)))
    defect = float(np.linalg.norm(H - H.conj().T))
    if defect > tol * scale:
        raise NotHermitianError(
            f"matrix is not Hermitian: defect {defect:.3e} > {tol:.1e} * {scale:.3e}"
        )
    return 0.5 * (H + H.conj().T)


@dataclass(frozen=True)
class EigenDecomposition:
    """Spectral decomposition of a Hermitian matrix.

    ``values`` are ascending; columns of ``vectors`` are the orthonormal
    eigenvectors, so ``H = vectors @ diag(values) @ vectors.conj().T``.
    """

    values: np.ndarray
    vectors: np.ndarray


def herm_eig(H, tol: float = HERMITIAN_TOL) -> EigenDecomposition:
    """Eigendecomposition of a Hermitian matrix with ascending eigenvalues."""
    H = as_hermitian(H, tol)
    values, vectors = np.linalg.eigh(H)
    return EigenDecomposition(values=values, vectors=vectors)


def sqrt_pd(H, pd_tol: float = PD_TOL) -> np.ndarray:
    """Principal square root of a Hermitian positive definite matrix.

    Raises :class:`NotPositiveDefiniteError` if the smallest eigenvalue is
    <= ``pd_tol`` (loss of hyperbolicity when ``H`` comes from the
    asymptotic pencil).
    """
    dec = herm_eig(H)
    if dec.values[0] <= pd_tol:
        raise NotPositiveDefiniteError(
            f"smallest eigenvalue {dec.values[0]:.3e} <= {pd_tol:.1e}"
        )
    R = dec.vectors
    return (R * np.sqrt(dec.values)) @ R.conj().T


def morse_index(H, zero_tol: float = ZERO_TOL) -> Tuple[int, int]:
    """Return ``(n_negative, n_zero)`` eigenvalue counts of a Hermitian matrix.

    Eigenvalues within ``+-zero_tol`` of zero count as zero, not negative.
    """
    values = herm_eig(H).values
    n_neg = int(np.count_nonzero(values < -zero_tol))
    n_zero = int(np.count_nonzero(np.abs(values) <= zero_tol))
    return n_neg, n_zero


@dataclass(frozen=True)
class LoewnerData:
    """Divided-difference (Loewner) matrix of a scalar function on nodes."""

    nodes: np.ndarray
    matrix: np.ndarray


def loewner(
    f: Callable[[float], float],
    fprime: Callable[[float], float],
    nodes: Sequence[float],
    node_tol: float = NODE_TOL,
) -> LoewnerData:
    """Loewner matrix: (f(d_j)-f(d_k))/(d_j-d_k) off-diagonal, f'(d_j) on it.

    Coincident nodes (within ``node_tol`` relative) use ``f'`` at the node
    midpoint, the continuous limit of the divided difference.
    """
    d = np.asarray(nodes, dtype=float)
    m = len(d)
    L = np.empty((m, m))
    for j in range(m):
        L[j, j] = fprime(d[j])
        for k in range(j + 1, m):
            if abs(d[j] - d[k]) <= node_tol * max(1.0, abs(d[j])):
                val = fprime(0.5 * (d[j] + d[k]))
            else:
                val = (f(d[j]) - f(d[k])) / (d[j] - d[k])
            L[j, k] = val
            L[k, j] = val
    return LoewnerData(nodes=d, matrix=L)


def matfun_derivative(
    f: Callable[[float], float],
    fprime: Callable[[float], float],
    A,
    Adot,
    node_tol: float = NODE_TOL,
) -> np.ndarray:
    """Derivative d/dt f(A(t)) given A and A' at one point.

    Computed as ``R ((R* A' R) o L) R*`` with ``o`` the Hadamard product and
    ``L`` the Loewner matrix of ``f`` on the spectrum of ``A``.
    """
    dec = herm_eig(A)
    Adot = as_hermitian(Adot)
    L = loewner(f, fprime, dec.values, node_tol).matrix
    R = dec.vectors
    inner = (R.conj().T @ Adot @ R) * L
    out = R @ inner @ R.conj().T
    return 0.5 * (out + out.conj().T)


def cauchy_det_check(nodes: Sequence[float]) -> Tuple[float, float]:
    """Evaluate both sides of the square-root Loewner determinant identity.

    lhs is det of the matrix with entries 1/(sqrt(d_j)+sqrt(d_k)); rhs is the
    closed-form product. Returns ``(lhs, rhs)`` so callers can compare.
    """
    d = np.asarray(nodes, dtype=float)
    if np.any(d <= 0):
        raise ValueError("nodes must be positive")
    s = np.sqrt(d)
    M = 1.0 / (s[:, None] + s[None, :])
    lhs = float(np.linalg.det(M))
    num = 1.0
    den = 1.0
    m = len(d)
    for j in range(m):
        for k in range(j):
            num *= (s[j] - s[k]) ** 2
            den *= (s[j] + s[k]) ** 2
    den *= float(np.prod(2.0 * s))
    return lhs, num / den


def det_complex(M) -> complex:
    """Determinant of a square complex matrix by partially pivoted elimination.

    Kept free of LAPACK so it can serve as an independent cross-check.
    """
    A = np.array(M, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    m = A.shape[0]
    det = 1.0 + 0.0j
    for col in range(m):
        piv = col + int(np.argmax(np.abs(A[col:, col])))
        if A[piv, col] == 0:
            return 0.0 + 0.0j
        if piv != col:
            A[[col, piv]] = A[[piv, col]]
            det = -det
        det *= A[col, col]
        A[col + 1 :, col:] -= np.outer(A[col + 1 :, col] / A[col, col], A[col, col:])
    return complex(det)


SQRT = (np.sqrt, lambda t: 0.5 / np.sqrt(t))
"""(f, f') pair for the matrix square root."""


def power_pair(p: float):
    """(f, f') pair for f(t) = t**p."""
    return (lambda t: t ** p, lambda t: p * t ** (p - 1.0))
