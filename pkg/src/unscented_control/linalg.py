"""Small dense linear-algebra kernel.

Everything here works on plain ``numpy`` float arrays of modest size
(a few dozen rows at most). All functions are pure.
"""

from __future__ import annotations

import numpy as np

from .errors import NotPSD, NotSchur, NotSymmetric, Singular

SCHUR_EPS = 1e-9
COND_TOL = 1e12


def as_matrix(M, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-D float array."""
    arr = np.atleast_2d(np.asarray(M, dtype=float))
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 2-D array")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def default_psd_tol(M: np.ndarray) -> float:
    return 1e-9 * max(1.0, float(np.linalg.norm(M, 2)))


def _check_symmetric(M: np.ndarray, tol: float) -> None:
    if M.shape[0] != M.shape[1]:
        raise NotSymmetric(f"matrix is not square: shape {M.shape}")
    asym = float(np.max(np.abs(M - M.T)))
    if asym > tol:
        raise NotSymmetric(f"max|M - M^T| = {asym:.3e} exceeds tol {tol:.3e}")


def symmetrize(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def psd_sqrt(M, tol: float | None = None) -> np.ndarray:
    """Unique symmetric PSD square root of a symmetric PSD matrix.

    Eigenvalues in ``[-tol, 0)`` are treated as round-off and clamped to
    zero; anything more negative raises :class:`NotPSD`.
    """
    M = as_matrix(M)
    if tol is None:
        tol = default_psd_tol(M)
    _check_symmetric(M, tol)
    w, V = np.linalg.eigh(symmetrize(M))
    if w[0] < -tol:
        raise NotPSD(f"minimum eigenvalue {w[0]:.3e} below -{tol:.3e}")
    w = np.clip(w, 0.0, None)
    S = (V * np.sqrt(w)) @ V.T
    return symmetrize(S)


def clamp_psd(M, tol: float | None = None) -> tuple[np.ndarray, float]:
    """Symmetrize and clip negative eigenvalues to zero.

    Returns the repaired matrix and the clamping magnitude (the absolute
    value of the most negative eigenvalue, 0 if none was negative).
    """
    M = symmetrize(as_matrix(M))
    if tol is None:
        tol = default_psd_tol(M)
    w, V = np.linalg.eigh(M)
    if w[0] >= 0.0:
        return M, 0.0
    if w[0] < -tol:
        raise NotPSD(f"minimum eigenvalue {w[0]:.3e} below -{tol:.3e}")
    magnitude = float(-w[0])
    w = np.clip(w, 0.0, None)
    return symmetrize((V * w) @ V.T), magnitude


def spectral_radius(M) -> float:
    M = as_matrix(M)
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def spectral_norm(M) -> float:
    """Largest singular value."""
    M = as_matrix(M)
    return float(np.linalg.norm(M, 2))


def eig_extrema_sym(M, tol: float | None = None) -> tuple[float, float]:
    """Return ``(lambda_min, lambda_max)`` of a symmetric matrix."""
    M = as_matrix(M)
    if tol is None:
        tol = default_psd_tol(M)
    _check_symmetric(M, tol)
    w = np.linalg.eigvalsh(symmetrize(M))
    return float(w[0]), float(w[-1])


def solve_linear(A, B, cond_tol: float = COND_TOL) -> np.ndarray:
    """Solve ``A X = B`` for square ``A``.

    Raises :class:`Singular` when the 2-norm condition number of ``A``
    exceeds ``cond_tol``.
    """
    A = as_matrix(A, "A")
    B_arr = np.asarray(B, dtype=float)
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"A must be square, got {A.shape}")
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > cond_tol:
        raise Singular(f"condition number {cond:.3e} exceeds {cond_tol:.1e}")
    return np.linalg.solve(A, B_arr)


def solve_stein(Z, Q, eps_schur: float = SCHUR_EPS) -> np.ndarray:
    """Solve the discrete Lyapunov equation ``Z^T P Z - P = -Q``.

    The equation is vectorized row-major, so ``vec(Z^T P Z)`` becomes
    ``kron(Z^T, Z^T) @ vec(P)``, and the resulting ``d^2`` system is
    solved directly. Fine for the d <= ~10 matrices used here.
    """
    Z = as_matrix(Z, "Z")
    Q = as_matrix(Q, "Q")
    d = Z.shape[0]
    if Z.shape != (d, d) or Q.shape != (d, d):
        raise ValueError(f"shape mismatch: Z {Z.shape}, Q {Q.shape}")
    _check_symmetric(Q, default_psd_tol(Q))
    rho = spectral_radius(Z)
    if rho >= 1.0 - eps_schur:
        raise NotSchur(f"spectral radius {rho:.12g} >= 1 - {eps_schur:g}")
    L = np.kron(Z.T, Z.T) - np.eye(d * d)
    vecP = np.linalg.solve(L, -Q.reshape(-1))
    return symmetrize(vecP.reshape(d, d))


def stein_residual(Z, P, Q) -> float:
    """``||Z^T P Z - P + Q||_2``."""
    Z, P, Q = as_matrix(Z), as_matrix(P), as_matrix(Q)
    return spectral_norm(Z.T @ P @ Z - P + Q)


def matrix_power(A, k: int) -> np.ndarray:
    A = as_matrix(A)
    return np.linalg.matrix_power(A, k)
