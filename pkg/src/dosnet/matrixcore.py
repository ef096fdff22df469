"""Small dense real-matrix helpers.

Every matrix in this package is a 2-D float ``numpy.ndarray``; dimensions in
scope never exceed a handful of rows, so everything here is a direct dense
computation.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, NotHurwitz, NotSymmetric

RESIDUAL_TOL = 1e-9
SYMMETRY_TOL = 1e-12
HURWITZ_MARGIN = 1e-12


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Coerce scalars, vectors and nested lists to a finite 2-D float array."""
    arr = np.array(m, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    elif arr.ndim != 2:
        raise DimensionMismatch(f"{name}: expected a 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name}: entries must be finite")
    return arr


def _require_square(m: np.ndarray, name: str = "matrix") -> None:
    if m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got {m.shape}")


def eigenvalues(m) -> np.ndarray:
    m = as_matrix(m)
    _require_square(m)
    return np.linalg.eigvals(m)


def is_hurwitz(m) -> bool:
    m = as_matrix(m)
    _require_square(m)
    return bool(np.all(np.linalg.eigvals(m).real < -HURWITZ_MARGIN))


def solve_lyapunov(phi, q) -> np.ndarray:
    """Solve ``phi.T @ P + P @ phi + q = 0`` for symmetric positive-definite ``P``.

    Uses the Kronecker (vectorized) form of the equation.
    """
    phi = as_matrix(phi, "phi")
    q = as_matrix(q, "q")
    _require_square(phi, "phi")
    _require_square(q, "q")
    if phi.shape != q.shape:
        raise DimensionMismatch(f"phi {phi.shape} and q {q.shape} differ in size")
    if not is_hurwitz(phi):
        raise NotHurwitz(f"phi has eigenvalues {np.linalg.eigvals(phi)}; no PD solution")
    n = phi.shape[0]
    eye = np.eye(n)
    # vec(phi.T P) + vec(P phi) = (I kron phi.T + phi.T kron I) vec(P) in column-major order
    lhs = np.kron(eye, phi.T) + np.kron(phi.T, eye)
    p = np.linalg.solve(lhs, -q.flatten(order="F")).reshape((n, n), order="F")
    return 0.5 * (p + p.T)


def lyapunov_residual(phi, p, q) -> float:
    phi, p, q = as_matrix(phi), as_matrix(p), as_matrix(q)
    return float(np.max(np.abs(phi.T @ p + p @ phi + q)))


def spectral_radius(m) -> float:
    m = as_matrix(m)
    _require_square(m)
    if m.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(m))))


def spectral_norm(m) -> float:
    m = as_matrix(m)
    if m.size == 0:
        return 0.0
    return float(np.linalg.norm(m, 2))


def log_norm(m) -> float:
    """Logarithmic norm induced by the Euclidean norm: lambda_max of the symmetric part."""
    m = as_matrix(m)
    _require_square(m)
    return float(np.linalg.eigvalsh(0.5 * (m + m.T))[-1])


def eig_extremes_symmetric(m) -> tuple[float, float]:
    m = as_matrix(m)
    _require_square(m)
    scale = max(1.0, float(np.max(np.abs(m))))
    if np.max(np.abs(m - m.T)) > SYMMETRY_TOL * scale:
        raise NotSymmetric("matrix is not symmetric")
    w = np.linalg.eigvalsh(0.5 * (m + m.T))
    return float(w[0]), float(w[-1])


def is_positive_definite(m) -> bool:
    try:
        lo, _ = eig_extremes_symmetric(m)
    except NotSymmetric:
        return False
    return lo > 0.0
