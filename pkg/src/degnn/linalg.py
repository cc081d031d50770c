"""Dense matrix utilities: validation, column-stacking vec, Kronecker product.

Matrices are plain numpy float64 arrays throughout the package. vec/unvec use
column stacking (Fortran order), so vec(A @ Y @ B) == kron(B.T, A) @ vec(Y).
"""

import numpy as np

from degnn.errors import DomainError


def as_matrix(m, name="matrix"):
    """Validate and return a 2-D float64 array with finite entries.

    Accepts anything numpy can coerce. Raises DomainError on wrong rank,
    empty dimensions, or non-finite entries.
    """
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2:
        raise DomainError(f"{name} must be 2-D, got ndim={a.ndim}")
    if a.shape[0] == 0 or a.shape[1] == 0:
        raise DomainError(f"{name} must have positive dimensions, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DomainError(f"{name} contains non-finite entries")
    return a


def as_vector(v, name="vector"):
    """Validate and return a 1-D float64 array with finite entries."""
    a = np.asarray(v, dtype=np.float64)
    if a.ndim != 1:
        raise DomainError(f"{name} must be 1-D, got ndim={a.ndim}")
    if not np.all(np.isfinite(a)):
        raise DomainError(f"{name} contains non-finite entries")
    return a


def vec(x):
    """Column-stack an n x d matrix into a vector of length n*d.

    Column j occupies entries [j*n, (j+1)*n). Exact (a reshape, no arithmetic).
    """
    x = as_matrix(x, "x")
    return x.reshape(-1, order="F").copy()


def unvec(v, n, d):
    """Inverse of vec: reshape a length n*d vector into an n x d matrix."""
    v = as_vector(v, "v")
    if n <= 0 or d <= 0:
        raise DomainError(f"target shape must be positive, got ({n}, {d})")
    if v.size != n * d:
        raise DomainError(f"vector of length {v.size} cannot fill a {n}x{d} matrix")
    return v.reshape((n, d), order="F").copy()


def kron(a, b):
    """Kronecker product of an m x n and a k x l matrix: (m*k) x (n*l) blocks a_ij * b."""
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    return np.kron(a, b)
