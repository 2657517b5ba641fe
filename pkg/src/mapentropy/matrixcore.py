"""Dense complex linear algebra used throughout the package.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. The vec mapping
stacks rows, so ``vec(|i><j|) = |i> (x) |j>`` and ``vec(I) = sum_i |ii>``.
"""
from __future__ import annotations

from typing import Literal, Tuple

import numpy as np

HERMITIAN_RTOL = 1e-10
CLAMP_RTOL = 1e-12


class DimensionError(ValueError):
    """Raised when operand shapes are incompatible."""


class NotHermitianError(ValueError):
    """Raised when a matrix expected to be Hermitian is not."""


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2:
        raise DimensionError(f"expected a 2-d matrix, got shape {m.shape}")
    return m


def tensor(a, b) -> np.ndarray:
    """Kronecker product; block ``(i, j)`` of the result is ``a[i, j] * b``."""
    return np.kron(as_matrix(a), as_matrix(b))


def vec(a) -> np.ndarray:
    """Row-major stacking: ``vec(a)[i * cols + j] == a[i, j]``."""
    return as_matrix(a).reshape(-1).copy()


def unvec(v, rows: int, cols: int) -> np.ndarray:
    v = np.asarray(v, dtype=np.complex128).reshape(-1)
    if v.size != rows * cols:
        raise DimensionError(f"vector of length {v.size} cannot be reshaped to {rows}x{cols}")
    return v.reshape(rows, cols).copy()


def swap_operator(n: int, m: int) -> np.ndarray:
    """Permutation matrix ``S`` on C^n (x) C^m with ``S|mu>|nu> = |nu>|mu>``.

    The result maps C^n (x) C^m to C^m (x) C^n; for ``n == m`` it is an
    involution.
    """
    if n < 1 or m < 1:
        raise DimensionError("swap dimensions must be positive")
    s = np.zeros((n * m, n * m), dtype=np.complex128)
    for a in range(n):
        for b in range(m):
            s[b * n + a, a * m + b] = 1.0
    return s


def bipartite_vec_permutation(n_a: int, n_b: int, m_a: int, m_b: int) -> np.ndarray:
    """Permutation ``P`` with ``P @ vec(A (x) B) == vec(A) (x) vec(B)``.

    ``A`` is ``n_a x m_a`` and ``B`` is ``n_b x m_b``. ``vec(A (x) B)`` is
    ordered (out_A, out_B, in_A, in_B) while ``vec(A) (x) vec(B)`` is ordered
    (out_A, in_A, out_B, in_B); ``P`` reorders the middle two factors.
    """
    if min(n_a, n_b, m_a, m_b) < 1:
        raise DimensionError("dimensions must be positive")
    dims = (n_a, n_b, m_a, m_b)
    size = n_a * n_b * m_a * m_b
    src = np.arange(size).reshape(dims)
    # target ordering (out_A, in_A, out_B, in_B) = source axes (0, 2, 1, 3)
    order = src.transpose(0, 2, 1, 3).reshape(-1)
    p = np.zeros((size, size), dtype=np.complex128)
    p[np.arange(size), order] = 1.0
    return p


def is_hermitian(m, rtol: float = HERMITIAN_RTOL) -> bool:
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        return False
    scale = 1.0 + (np.abs(m).max() if m.size else 0.0)
    return bool(np.abs(m - m.conj().T).max() <= rtol * scale)


def hermitize(m, rtol: float = HERMITIAN_RTOL) -> np.ndarray:
    """Return ``(m + m^dagger) / 2`` after checking ``m`` is Hermitian within ``rtol``."""
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"matrix must be square, got {m.shape}")
    if not is_hermitian(m, rtol):
        raise NotHermitianError("matrix is not Hermitian within tolerance")
    return 0.5 * (m + m.conj().T)


def hermitian_eig(m) -> Tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a Hermitian matrix.

    Returns:
        ``(eigenvalues, eigenvectors)`` with eigenvalues in descending order and
        eigenvectors as the columns of a unitary matrix. Ties keep the order
        reported by LAPACK, which is deterministic for a given input.
    """
    h = hermitize(m)
    w, v = np.linalg.eigh(h)
    order = np.argsort(-w, kind="stable")
    return w[order], v[:, order]


def psd_eigenvalues(m, clamp: bool = True) -> np.ndarray:
    """Descending eigenvalues of a PSD matrix, with roundoff noise clamped to zero."""
    w = np.linalg.eigvalsh(hermitize(m))[::-1]
    if clamp and w.size:
        cutoff = CLAMP_RTOL * max(w[0], 0.0)
        w = np.where(w < cutoff, 0.0, w)
    return w


def schatten_norm(m, p: float) -> float:
    """Schatten p-norm ``(sum_i s_i^p)^(1/p)`` over singular values."""
    if p < 1:
        raise ValueError(f"Schatten norm requires p >= 1, got {p}")
    s = np.linalg.svd(as_matrix(m), compute_uv=False)
    if np.isinf(p):
        return float(s.max(initial=0.0))
    return float(np.sum(s**p) ** (1.0 / p))


def partial_trace(m, dim_a: int, dim_b: int, keep: Literal["A", "B"]) -> np.ndarray:
    """Partial trace of an operator on C^dim_a (x) C^dim_b.

    ``keep="A"`` traces out the B factor and vice versa.
    """
    m = as_matrix(m)
    d = dim_a * dim_b
    if m.shape != (d, d):
        raise DimensionError(f"expected a {d}x{d} matrix, got {m.shape}")
    t = m.reshape(dim_a, dim_b, dim_a, dim_b)
    if keep == "A":
        return np.einsum("ajbj->ab", t)
    if keep == "B":
        return np.einsum("iaib->ab", t)
    raise ValueError(f"keep must be 'A' or 'B', got {keep!r}")
