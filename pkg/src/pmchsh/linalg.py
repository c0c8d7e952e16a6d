"""
Small dense complex linear algebra.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. Composite
Bob-Eve operators use the ``kron(b, e)`` ordering, so the Eve index is the
fast (inner) one.
"""

from __future__ import annotations

import numpy as np

DEFAULT_TOL = 1e-9

SIGMA_I = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (SIGMA_X, SIGMA_Y, SIGMA_Z)


class LinalgError(ValueError):
    """Raised for malformed matrix input."""


class DimensionError(LinalgError):
    pass


class NotHermitianError(LinalgError):
    pass


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-D complex array."""
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise LinalgError(f"{name} has non-finite entries")
    return a


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(m).T


def hermiticity_error(m: np.ndarray) -> float:
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        return float("inf")
    return float(np.max(np.abs(m - dagger(m)), initial=0.0))


def _require_hermitian(m, tol: float) -> np.ndarray:
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    err = hermiticity_error(m)
    if err > tol:
        raise NotHermitianError(f"matrix is not Hermitian (max deviation {err:.3e} > {tol:.1e})")
    return m


def kron(a, b) -> np.ndarray:
    """Kronecker product with ``b`` as the fast index."""
    return np.kron(as_matrix(a, "a"), as_matrix(b, "b"))


def partial_trace(m, dim_b: int, dim_e: int, keep: str) -> np.ndarray:
    """Trace out one factor of a Bob-Eve operator.

    Parameters
    ----------
    m : array_like, shape (dim_b*dim_e, dim_b*dim_e)
    dim_b, dim_e : int
        Factor dimensions; Eve is the fast index.
    keep : {"B", "E"}
        The subsystem that survives.
    """
    m = as_matrix(m)
    n = dim_b * dim_e
    if m.shape != (n, n):
        raise DimensionError(f"expected shape ({n}, {n}) for dims ({dim_b}, {dim_e}), got {m.shape}")
    t = m.reshape(dim_b, dim_e, dim_b, dim_e)
    if keep == "B":
        return np.einsum("iaja->ij", t)
    if keep == "E":
        return np.einsum("iaib->ab", t)
    raise ValueError(f"keep must be 'B' or 'E', got {keep!r}")


def eig_hermitian(m, tol: float = DEFAULT_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and orthonormal eigenvector columns."""
    m = _require_hermitian(m, tol)
    h = 0.5 * (m + dagger(m))
    w, v = np.linalg.eigh(h)
    return w[::-1].copy(), v[:, ::-1].copy()


def trace_norm(m) -> float:
    """Sum of singular values; Hermitian input goes through its spectrum."""
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"trace norm needs a square matrix, got shape {m.shape}")
    if m.size == 0:
        return 0.0
    if hermiticity_error(m) <= 1e-12 * max(1.0, float(np.max(np.abs(m)))):
        return float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (m + dagger(m))))))
    return float(np.sum(np.linalg.svd(m, compute_uv=False)))


def sign_operator(m, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Hermitian unitary +1 on the nonnegative eigenspace of ``m``, -1 elsewhere.

    Eigenvalues within ``tol`` of zero count as nonnegative, so round-off
    never flips a null direction. ``0.5 * Tr[S m] == 0.5 * ||m||_1``.

    The eigenvectors from ``eigh`` are corrected to first order across the
    sign boundary in extended precision, so the entries of the result are
    accurate to rounding. This matters where a bound is evaluated at a square
    root whose argument vanishes (S = 2 sqrt 2).
    """
    h = _require_hermitian(m, tol)
    h = 0.5 * (h + dagger(h))
    w, v = np.linalg.eigh(h)
    neg = w < -tol
    n = h.shape[0]
    if not neg.any():
        return np.eye(n, dtype=complex)
    if neg.all():
        return -np.eye(n, dtype=complex)
    vl = v.astype(np.clongdouble)
    a = dagger(vl) @ h.astype(np.clongdouble) @ vl
    d = np.diag(a).real
    pos_idx = np.flatnonzero(~neg)
    q = vl[:, neg].copy()
    for k, j in enumerate(np.flatnonzero(neg)):
        gaps = d[j] - d[pos_idx]
        ok = np.abs(gaps) > 1e-12
        q[:, k] += vl[:, pos_idx[ok]] @ (a[pos_idx[ok], j] / gaps[ok])
    for k in range(q.shape[1]):
        for j in range(k):
            q[:, k] -= q[:, j] * (q[:, j].conj() @ q[:, k])
        q[:, k] /= np.sqrt((q[:, k].conj() @ q[:, k]).real)
    u = np.eye(n, dtype=np.clongdouble) - 2.0 * (q @ dagger(q))
    return u.astype(complex)


def is_hermitian_unitary(m, tol: float = DEFAULT_TOL) -> bool:
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        return False
    if hermiticity_error(m) > tol:
        return False
    return float(np.max(np.abs(m @ m - np.eye(m.shape[0])), initial=0.0)) <= tol


def projector(v) -> np.ndarray:
    """|v><v| for a vector, or V V^dagger for a matrix of columns."""
    v = np.asarray(v, dtype=complex)
    if v.ndim == 1:
        v = v[:, None]
    return v @ dagger(v)


def bloch_vector(m2) -> np.ndarray:
    """Real Pauli coefficients of a 2x2 operator: ``m = c0 I + r . sigma``."""
    m2 = as_matrix(m2)
    if m2.shape != (2, 2):
        raise DimensionError(f"Bloch vector needs a 2x2 matrix, got {m2.shape}")
    return np.array([0.5 * np.trace(p @ m2).real for p in PAULIS])


def from_bloch(r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    return r[0] * SIGMA_X + r[1] * SIGMA_Y + r[2] * SIGMA_Z


def matrix_to_json(m) -> list:
    """Row-major nested lists of ``[re, im]`` pairs."""
    m = as_matrix(m)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def matrix_from_json(data, name: str = "matrix") -> np.ndarray:
    try:
        a = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise LinalgError(f"{name}: entries must be [re, im] number pairs") from exc
    if a.ndim != 3 or a.shape[2] != 2:
        raise DimensionError(f"{name}: expected rows x cols x [re, im], got shape {a.shape}")
    return as_matrix(a[..., 0] + 1j * a[..., 1], name)
