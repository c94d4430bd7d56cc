"""Dense complex linear algebra primitives.

Matrices are plain ``numpy.ndarray`` objects of dtype complex128 in row-major
order; this module supplies the Schatten norms, fidelity, partial trace /
transpose and Hermitian eigendecomposition that the rest of the package is
built on, together with the validators for density matrices and pure states.

All operations are pure and all dimensions here are desk scale (<= 64), so
everything is dense.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError, InvalidInputError, ShapeError

# Relative tolerances for structural validation.  Double-precision
# eigensolvers introduce ~1e-12 relative error; 1e-9 leaves margin for
# composed operations.
TOL_HERMITIAN = 1e-9
TOL_TRACE = 1e-9
TOL_NORM = 1e-9
TOL_PSD = 1e-9


def as_matrix(m) -> np.ndarray:
    """Coerce to a finite 2-d complex array."""
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2:
        raise ShapeError(f"expected a matrix, got ndim={a.ndim}")
    if not np.isfinite(a).all():
        raise InvalidInputError("matrix contains non-finite entries")
    return a


def as_vector(v) -> np.ndarray:
    a = np.asarray(v, dtype=complex).reshape(-1)
    if not np.isfinite(a).all():
        raise InvalidInputError("vector contains non-finite entries")
    return a


def hermitianize(m: np.ndarray) -> np.ndarray:
    """Hermitian part (M + M†)/2."""
    return (m + m.conj().T) / 2


def is_hermitian(m: np.ndarray, tol: float = TOL_HERMITIAN) -> bool:
    m = as_matrix(m)
    scale = max(1.0, np.abs(m).max())
    return bool(np.abs(m - m.conj().T).max() <= tol * scale)


def check_pure_state(vec, tol: float = TOL_NORM) -> np.ndarray:
    """Validate and return a unit vector."""
    v = as_vector(vec)
    nrm = np.linalg.norm(v)
    if abs(nrm - 1.0) > tol:
        raise InvalidInputError(f"state vector norm {nrm} is not 1 within {tol}")
    return v


def check_density_matrix(
    rho,
    tol_herm: float = TOL_HERMITIAN,
    tol_tr: float = TOL_TRACE,
    tol_psd: float = TOL_PSD,
) -> np.ndarray:
    """Validate Hermiticity, unit trace and positivity of a density matrix."""
    m = as_matrix(rho)
    if m.shape[0] != m.shape[1]:
        raise ShapeError(f"density matrix must be square, got {m.shape}")
    scale = max(1.0, np.abs(m).max())
    if np.abs(m - m.conj().T).max() > tol_herm * scale:
        raise InvalidInputError("density matrix is not Hermitian within tolerance")
    tr = np.trace(m)
    if abs(tr - 1.0) > tol_tr:
        raise InvalidInputError(f"density matrix trace {tr} is not 1 within {tol_tr}")
    evals = np.linalg.eigvalsh(hermitianize(m))
    if evals.min() < -tol_psd * abs(tr):
        raise InvalidInputError(
            f"density matrix has eigenvalue {evals.min()} below -{tol_psd}"
        )
    return m


def schatten_norm(m, p) -> float:
    """Schatten p-norm for p in {1, 2, inf}.

    p=1 sums the singular values, p=2 is the Frobenius norm, p=inf is the
    largest singular value.  Rectangular input is allowed.
    """
    a = as_matrix(m)
    if p == 2:
        return float(np.linalg.norm(a))
    s = np.linalg.svd(a, compute_uv=False)
    if p == 1:
        return float(s.sum())
    if p in (np.inf, float("inf"), "inf"):
        return float(s[0]) if s.size else 0.0
    raise DomainError(f"p must be one of 1, 2, inf; got {p!r}")


def trace_norm_hermitian(m) -> float:
    """1-norm of a Hermitian matrix via eigenvalues (cheaper than an SVD)."""
    return float(np.abs(np.linalg.eigvalsh(hermitianize(as_matrix(m)))).sum())


def hermitian_eig(m):
    """Eigendecomposition of a Hermitian matrix.

    Symmetrizes as (M + M†)/2 first and returns eigenvalues in descending
    order with matching orthonormal eigenvector columns.
    """
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise ShapeError(f"expected a square matrix, got {a.shape}")
    w, v = np.linalg.eigh(hermitianize(a))
    order = np.argsort(w)[::-1]
    return w[order], v[:, order]


def sqrt_psd(m) -> np.ndarray:
    """Matrix square root of a PSD Hermitian matrix.

    Eigenvalues below 1e-14 of the largest (in particular tiny negatives left
    by floating-point arithmetic) are clipped to 0 so that rounding noise is
    not amplified by the square root.
    """
    w, v = hermitian_eig(m)
    w = np.where(w > 1e-14 * max(w[0], 0.0), w, 0.0)
    return (v * np.sqrt(w)) @ v.conj().T


def fidelity(rho, sigma) -> float:
    """F(rho, sigma) = (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2, clipped to [0, 1].

    Evaluated as ||sqrt(rho) sqrt(sigma)||_1^2, which is the same quantity but
    keeps rounding noise linear instead of under a square root.
    """
    r = as_matrix(rho)
    s = as_matrix(sigma)
    if r.shape != s.shape or r.shape[0] != r.shape[1]:
        raise ShapeError(f"fidelity needs equal square shapes, got {r.shape}, {s.shape}")
    singulars = np.linalg.svd(sqrt_psd(r) @ sqrt_psd(s), compute_uv=False)
    f = float(singulars.sum() ** 2)
    return min(max(f, 0.0), 1.0)


def _split_dims(m: np.ndarray, dims) -> tuple[int, int]:
    da, db = int(dims[0]), int(dims[1])
    if da < 1 or db < 1:
        raise ShapeError("subsystem dimensions must be positive")
    if m.shape != (da * db, da * db):
        raise ShapeError(f"matrix shape {m.shape} does not factor as ({da}*{db})^2")
    return da, db


def partial_trace(m, dims, keep="A") -> np.ndarray:
    """Trace out one tensor factor of a (dA*dB)-dimensional matrix.

    ``keep='A'`` returns the dA x dA reduction, ``keep='B'`` the dB x dB one.
    """
    a = as_matrix(m)
    da, db = _split_dims(a, dims)
    t = a.reshape(da, db, da, db)
    if keep in ("A", "a", 0):
        return np.trace(t, axis1=1, axis2=3)
    if keep in ("B", "b", 1):
        return np.trace(t, axis1=0, axis2=2)
    raise DomainError(f"keep must be 'A' or 'B', got {keep!r}")


def partial_transpose(m, dims, on="B") -> np.ndarray:
    """Transpose one tensor factor; involutive up to floating error."""
    a = as_matrix(m)
    da, db = _split_dims(a, dims)
    t = a.reshape(da, db, da, db)
    if on in ("A", "a", 0):
        t = t.transpose(2, 1, 0, 3)
    elif on in ("B", "b", 1):
        t = t.transpose(0, 3, 2, 1)
    else:
        raise DomainError(f"on must be 'A' or 'B', got {on!r}")
    return t.reshape(da * db, da * db)


def maximally_entangled(d: int) -> np.ndarray:
    """|Psi> = (1/sqrt(d)) sum_i |i>|i> as a vector of length d^2."""
    psi = np.zeros(d * d, dtype=complex)
    psi[:: d + 1] = 1.0 / np.sqrt(d)
    return psi


def flip_operator(d: int) -> np.ndarray:
    """Swap operator F = sum_ij |ij><ji| on C^d x C^d; Tr((A x B) F) = Tr(AB)."""
    f = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            f[i * d + j, j * d + i] = 1.0
    return f
