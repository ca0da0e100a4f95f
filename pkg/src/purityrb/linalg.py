"""Dense complex linear algebra helpers for small matrices.

Everything in this package lives in Hilbert-space dimension d <= 8 (so
superoperators are at most 64 x 64).  The helpers here favour explicit
validation over raw speed: structural properties (hermiticity, unitarity)
are checked against ``ATOL_STRUCT`` and algebraic identities against
``ATOL_EQ``, and all public operations reject non-finite entries.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

# Tolerance for structural checks (hermitian/unitary flags, CPTP tests).
ATOL_STRUCT = 1e-10
# Tolerance for exact algebraic identities.
ATOL_EQ = 1e-12


def as_cmatrix(a) -> np.ndarray:
    """Coerce ``a`` to a 2-d complex128 array, rejecting NaN/Inf entries."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2:
        raise ValueError(f"expected a matrix, got an array of rank {m.ndim}")
    require_finite(m)
    return m


def require_finite(a: np.ndarray) -> None:
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix contains NaN or Inf entries")


def dagger(a: np.ndarray) -> np.ndarray:
    """Conjugate transpose."""
    return np.conjugate(np.transpose(a))


def matmul(a, b) -> np.ndarray:
    """Matrix product with an explicit dimension check."""
    a = as_cmatrix(a)
    b = as_cmatrix(b)
    if a.shape[1] != b.shape[0]:
        raise ValueError(
            f"dimension mismatch in matmul: {a.shape} times {b.shape}"
        )
    return a @ b


def kron(a, b) -> np.ndarray:
    """Kronecker product, row-major block convention.

    Entry ((i*p + k), (j*q + l)) equals ``a[i, j] * b[k, l]`` for ``b`` of
    shape (p, q), i.e. the first factor indexes the coarse blocks.
    """
    return np.kron(as_cmatrix(a), as_cmatrix(b))


def frobenius_inner(a, b) -> complex:
    """Hilbert-Schmidt inner product Tr(a^dag b)."""
    return complex(np.vdot(a, b))


def frobenius_norm(a) -> float:
    return float(np.linalg.norm(a))


def is_hermitian(a, atol: float = ATOL_STRUCT) -> bool:
    a = np.asarray(a)
    return bool(np.linalg.norm(a - dagger(a)) < atol)


def is_unitary(a, atol: float = ATOL_STRUCT) -> bool:
    a = np.asarray(a)
    if a.shape[0] != a.shape[1]:
        return False
    return bool(np.linalg.norm(dagger(a) @ a - np.eye(a.shape[0])) < atol)


def hermitian_eigensystem(a) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian matrix.

    Raises ``ValueError`` if the input is not Hermitian to ``ATOL_STRUCT``
    or if the residual ||A v - w v|| of any eigenpair exceeds it.
    """
    a = as_cmatrix(a)
    if not is_hermitian(a):
        raise ValueError("hermitian_eigensystem requires a Hermitian matrix")
    w, v = np.linalg.eigh(a)
    residual = np.linalg.norm(a @ v - v * w[np.newaxis, :])
    if residual > ATOL_STRUCT * max(1.0, np.linalg.norm(a)):
        raise ValueError(f"eigensystem residual {residual:.2e} out of tolerance")
    return w, v


def unitary_eigensystem(u) -> tuple[np.ndarray, np.ndarray]:
    """Eigenphases and orthonormal eigenvectors of a unitary matrix.

    Returns ``(phases, v)`` with ``u = sum_k exp(i*phases[k]) v[:,k] v[:,k]^dag``
    and phases in (-pi, pi].  Uses a complex Schur decomposition, which for a
    normal matrix yields an orthonormal eigenbasis even with degenerate
    eigenvalues.
    """
    u = as_cmatrix(u)
    if not is_unitary(u):
        raise ValueError("unitary_eigensystem requires a unitary matrix")
    t, v = scipy.linalg.schur(u, output="complex")
    phases = np.angle(np.diagonal(t))
    rebuilt = (v * np.exp(1j * phases)[np.newaxis, :]) @ dagger(v)
    residual = np.linalg.norm(rebuilt - u)
    if residual > ATOL_STRUCT:
        raise ValueError(f"eigensystem residual {residual:.2e} out of tolerance")
    return phases, v
