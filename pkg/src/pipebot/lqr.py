"""Continuous-time LQR synthesis.

``solve_riccati`` finds the stabilising solution of

    -P A - A^T P - Q + P B R^-1 B^T P = 0

by Newton-Kleinman iteration. Each Newton step is a Lyapunov solve, done here
with a Bartels-Stewart back-substitution on the complex Schur form; the
systems in this package are at most 8 states.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg


class SynthesisError(ValueError):
    """The weights or the (A, B) pair do not admit a stabilising LQR gain."""


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class LqrWeights:
    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        R = np.atleast_2d(np.asarray(self.R, dtype=float))
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)
        if Q.shape[0] != Q.shape[1] or R.shape[0] != R.shape[1]:
            raise SynthesisError("Q and R must be square")
        if np.max(np.abs(Q - Q.T), initial=0.0) > 1e-12:
            raise SynthesisError("Q is not symmetric")
        if np.max(np.abs(R - R.T), initial=0.0) > 1e-12:
            raise SynthesisError("R is not symmetric")
        if np.min(np.linalg.eigvalsh(R)) <= 0:
            raise SynthesisError("R is not positive definite")
        if np.min(np.linalg.eigvalsh(Q)) < -1e-12 * max(1.0, np.abs(Q).max()):
            raise SynthesisError("Q is not positive semidefinite")

    @classmethod
    def diagonal(cls, q, r) -> "LqrWeights":
        return cls(np.diag(np.asarray(q, dtype=float)), np.diag(np.asarray(r, dtype=float)))


@dataclass(frozen=True)
class LqrGain:
    K: np.ndarray
    P: np.ndarray
    residual: float
    iterations: int = 0

    def closed_loop_eigenvalues(self, A, B) -> np.ndarray:
        return np.linalg.eigvals(np.asarray(A) - np.asarray(B) @ self.K)


def riccati_residual(P, A, B, Q, R) -> np.ndarray:
    A, B, Q, R, P = (np.atleast_2d(np.asarray(M, dtype=float)) for M in (A, B, Q, R, P))
    return -P @ A - A.T @ P - Q + P @ B @ np.linalg.solve(R, B.T) @ P


def solve_lyapunov(A: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Solve ``A^T X + X A + C = 0`` (A Hurwitz, C symmetric).

    Bartels-Stewart: with ``A = U T U^H`` (complex Schur, T upper triangular)
    the equation becomes ``T^H Y + Y T = -U^H C U``, solved column by column.
    """
    A = np.asarray(A, dtype=float)
    T, U = scipy.linalg.schur(A.astype(complex), output="complex")
    F = -(U.conj().T @ np.asarray(C, dtype=complex) @ U)
    n = A.shape[0]
    Y = np.zeros((n, n), dtype=complex)
    TH = T.conj().T  # lower triangular
    for j in range(n):
        # (T^H + T[j, j] I) y_j = f_j - sum_{k<j} T[k, j] y_k
        rhs = F[:, j] - Y[:, :j] @ T[:j, j]
        Y[:, j] = scipy.linalg.solve_triangular(TH + T[j, j] * np.eye(n), rhs, lower=True)
    X = (U @ Y @ U.conj().T).real
    return 0.5 * (X + X.T)


def uncontrollable_unstable_modes(A, B, tol: float = 1e-9) -> list[complex]:
    """Eigenvalues with Re >= 0 that fail the PBH rank test."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    n = A.shape[0]
    bad = []
    for lam in np.linalg.eigvals(A):
        if lam.real < -tol:
            continue
        M = np.hstack([A - lam * np.eye(n), B])
        s = np.linalg.svd(M, compute_uv=False)
        if s[-1] <= tol * max(1.0, s[0]):
            bad.append(complex(lam))
    return bad


def undetectable_modes(A, Q, tol: float = 1e-9) -> list[complex]:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    w, V = np.linalg.eigh(np.atleast_2d(Q))
    Qh = (V * np.sqrt(np.clip(w, 0, None))) @ V.T
    bad = []
    for lam in np.linalg.eigvals(A):
        if lam.real < -tol:
            continue
        M = np.vstack([A - lam * np.eye(n), Qh])
        s = np.linalg.svd(M, compute_uv=False)
        if s[-1] <= tol * max(1.0, s[0]):
            bad.append(complex(lam))
    return bad


def stabilizing_gain(A, B) -> np.ndarray:
    """Initial gain by eigenvalue shift (Bass): ``K0 = B^T Z^-1`` with
    ``(A + b I) Z + Z (A + b I)^T = 2 B B^T`` for ``b`` above the spectral radius.
    """
    n = A.shape[0]
    shift = 1.0 + np.max(np.abs(np.linalg.eigvals(A)))
    As = -(A + shift * np.eye(n))  # Hurwitz
    # As Z + Z As^T + 2 B B^T = 0  <=>  lyapunov with A := As^T
    Z = solve_lyapunov(As.T, 2.0 * B @ B.T)
    return B.T @ np.linalg.pinv(Z)


def solve_riccati(A2, B2, weights: LqrWeights, max_iter: int = 100,
                  tol: float = 1e-9) -> LqrGain:
    """Stabilising ARE solution and the LQR gain ``K = R^-1 B^T P``."""
    A = np.atleast_2d(np.asarray(A2, dtype=float))
    n = A.shape[0]
    B = np.asarray(B2, dtype=float).reshape(n, -1)
    Q, R = weights.Q, weights.R
    if Q.shape != (n, n) or R.shape != (B.shape[1], B.shape[1]):
        raise SynthesisError("weight shapes do not match (A, B)")

    bad = uncontrollable_unstable_modes(A, B)
    if bad:
        raise SynthesisError(f"(A, B) is not stabilizable: uncontrollable mode(s) {bad}")
    bad = undetectable_modes(A, Q)
    if bad:
        raise SynthesisError(f"(A, Q^1/2) is not detectable: mode(s) {bad}")

    if np.max(np.linalg.eigvals(A).real) < 0:
        K = np.zeros((B.shape[1], n))
    else:
        K = stabilizing_gain(A, B)
    if np.max(np.linalg.eigvals(A - B @ K).real) >= 0:
        raise SynthesisError("could not find an initial stabilising gain")

    Rinv_BT = np.linalg.solve(R, B.T)
    scale = 1.0
    P = np.zeros((n, n))
    res = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        Acl = A - B @ K
        P = solve_lyapunov(Acl, Q + K.T @ R @ K)
        K = Rinv_BT @ P
        res = np.linalg.norm(riccati_residual(P, A, B, Q, R))
        scale = 1.0 + np.linalg.norm(P)
        if res <= tol * scale * 1e-2:
            break
    if res > tol * scale:
        raise ConvergenceError(f"Riccati residual {res:.3e} above bound after {it} iterations",
                               residual=res)
    return LqrGain(K=K, P=P, residual=float(res), iterations=it)


def lqr_control(gain: LqrGain | np.ndarray, x2_hat) -> np.ndarray:
    K = gain.K if isinstance(gain, LqrGain) else np.asarray(gain)
    return -K @ np.asarray(x2_hat, dtype=float)
