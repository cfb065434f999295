"""Lagrangian frames, the symplectic form, and the unitary intersection detector.

A Lagrangian plane in C^{2n} is stored through a frame [X; Y] of two n x n
blocks.  Intersections between two planes are read off the unitary matrix
W~ = -(X1+iY1)(X1-iY1)^{-1}(X2-iY2)(X2+iY2)^{-1}: the planes meet exactly
where W~ has eigenvalue -1, with multiplicity equal to dim of the
intersection.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import as_hermitian

LAG_TOL = 1e-8
RANK_TOL = 1e-9
UNITARY_TOL = 1e-9
ANGLE_TOL = 1e-6


class FrameError(ValueError):
    """Frame fails the rank or Lagrangian-plane invariant."""


@dataclass(frozen=True)
class LagrangianFrame:
    """Frame [X; Y] for a Lagrangian plane; X, Y are n x n complex blocks."""

    X: np.ndarray
    Y: np.ndarray

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def stacked(self) -> np.ndarray:
        """The 2n x n frame matrix."""
        return np.vstack([self.X, self.Y])

    def lagrangian_defect(self) -> float:
        """|| X*Y - Y*X ||, zero exactly on a Lagrangian plane."""
        D = self.X.conj().T @ self.Y - self.Y.conj().T @ self.X
        return float(np.linalg.norm(D))


def make_frame(X, Y, lag_tol: float = LAG_TOL, rank_tol: float = RANK_TOL) -> LagrangianFrame:
    """Validating constructor: checks rank and the Lagrangian condition."""
    X = np.asarray(X, dtype=complex)
    Y = np.asarray(Y, dtype=complex)
    if X.shape != Y.shape or X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise FrameError(f"X, Y must be square and matching, got {X.shape}, {Y.shape}")
    frame = LagrangianFrame(X=X, Y=Y)
    stacked = frame.stacked()
    smin = np.linalg.svd(stacked, compute_uv=False)[-1]
    scale = max(1.0, float(np.linalg.norm(stacked)))
    if smin <= rank_tol * scale:
        raise FrameError(f"frame is rank deficient (smallest singular value {smin:.3e})")
    if frame.lagrangian_defect() > lag_tol * scale ** 2:
        raise FrameError(
            f"plane is not Lagrangian: defect {frame.lagrangian_defect():.3e}"
        )
    return frame


def orthonormalized(frame: LagrangianFrame) -> LagrangianFrame:
    """Same plane, orthonormal columns (thin QR, right multiplication only)."""
    Q, _ = np.linalg.qr(frame.stacked())
    n = frame.n
    return LagrangianFrame(X=Q[:n], Y=Q[n:])


def dirichlet_frame(n: int) -> LagrangianFrame:
    """The Dirichlet plane [0; I]."""
    return LagrangianFrame(X=np.zeros((n, n), dtype=complex), Y=np.eye(n, dtype=complex))


def phi_frame(boundary, lam: float) -> LagrangianFrame:
    """Robin boundary plane [I; c + phi(lambda)] for real lambda.

    ``boundary`` supplies ``c_plus_phi(lam)``; the result must be Hermitian
    (otherwise the plane is not Lagrangian and we reject).
    """
    Y = as_hermitian(boundary.c_plus_phi(lam))
    return LagrangianFrame(X=np.eye(Y.shape[0], dtype=complex), Y=Y)


def w_of(frame: LagrangianFrame) -> np.ndarray:
    """(X + iY)(X - iY)^{-1}; detects intersections with the Dirichlet plane."""
    A = frame.X + 1j * frame.Y
    B = frame.X - 1j * frame.Y
    # W = A @ inv(B), computed as a solve on the right
    return np.linalg.solve(B.conj().T, A.conj().T).conj().T


def w_relative(frame1: LagrangianFrame, frame2: LagrangianFrame) -> np.ndarray:
    """Unitary detecting intersections of two Lagrangian planes.

    dim ker(W~ + I) equals the dimension of plane1 ∩ plane2.
    """
    B2 = frame2.X - 1j * frame2.Y
    A2 = frame2.X + 1j * frame2.Y
    second = np.linalg.solve(A2.conj().T, B2.conj().T).conj().T
    return -w_of(frame1) @ second


def unitarity_defect(W: np.ndarray) -> float:
    return float(np.linalg.norm(W.conj().T @ W - np.eye(W.shape[0])))


def unitary_phases(W: np.ndarray) -> np.ndarray:
    """Sorted eigenvalue arguments of a unitary matrix, in (-pi, pi]."""
    return np.sort(np.angle(np.linalg.eigvals(W)))


def intersection_dim(
    frame1: LagrangianFrame, frame2: LagrangianFrame, angle_tol: float = ANGLE_TOL
) -> int:
    """Number of eigenvalues of w_relative within ``angle_tol`` of -1."""
    phases = unitary_phases(w_relative(frame1, frame2))
    dist = np.abs(np.mod(phases - np.pi + np.pi, 2.0 * np.pi) - np.pi)
    return int(np.count_nonzero(dist <= angle_tol))


@dataclass(frozen=True)
class UnitaryTrace:
    """One sample of a W~ path: parameter, unitary, unwrapped phases."""

    param: float
    W: np.ndarray
    phases: np.ndarray
