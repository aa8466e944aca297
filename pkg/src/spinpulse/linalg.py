"""Dense complex matrix algebra shared by all simulation modules.

Operators are plain ``numpy`` arrays of ``complex128`` in row-major layout.
Superoperators, when materialized, use the column-stacking convention
``vec(A X B) = (B^T kron A) vec(X)``; :func:`vec` and :func:`unvec` are the
only places where the stacking order appears.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import CapacityError, DomainError, ShapeError, ValidationError

# Dense-storage cap: a materialized superoperator for five sites (1024 x 1024)
# and a state matrix for ten sites (1024 x 1024) both hold 2^20 entries.
MAX_ENTRIES = 1 << 20

HERMITIAN_RTOL = 1e-10
TRACE_ATOL = 1e-8
POSITIVITY_ATOL = 1e-8


def kron(a, b):
    """Kronecker product of two matrices, guarded by the storage cap."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.size * b.size > MAX_ENTRIES:
        raise CapacityError(
            f"kron result would hold {a.size * b.size} entries "
            f"(cap {MAX_ENTRIES})"
        )
    return np.kron(a, b)


def kron_chain(factors):
    """Kronecker product of a sequence, leftmost factor most significant."""
    out = np.eye(1, dtype=complex)
    for f in factors:
        out = kron(out, f)
    return out


def expm(m, tol=1e-12):
    """Matrix exponential by Pade scaling-and-squaring.

    ``tol`` states the accuracy the caller relies on; the implementation is
    accurate to near machine precision for the norms used in this package,
    which the test suite pins against a truncated-series oracle.
    """
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError(f"expm needs a square matrix, got shape {m.shape}")
    if tol <= 0:
        raise DomainError("expm tolerance must be positive")
    return scipy.linalg.expm(m)


def partial_trace(rho, keep_site, n_sites):
    """Reduced 2x2 state of one site; site 1 is the least significant bit."""
    rho = np.asarray(rho)
    dim = 1 << n_sites
    if rho.shape != (dim, dim):
        raise ShapeError(
            f"state shape {rho.shape} does not match {n_sites} sites"
        )
    if not 1 <= keep_site <= n_sites:
        raise IndexError(f"keep_site {keep_site} outside 1..{n_sites}")
    # Reshaping splits each index into per-site bits, most significant first,
    # so site k sits on axis n_sites - k.
    axis = n_sites - keep_site
    t = rho.reshape((2,) * (2 * n_sites))
    ids_row = []
    ids_col = []
    for a in range(n_sites):
        if a == axis:
            ids_row.append(0)
            ids_col.append(1)
        else:
            ids_row.append(a + 2)
            ids_col.append(a + 2)
    return np.einsum(t, ids_row + ids_col, [0, 1])


def hermitian_eigs(m, rtol=HERMITIAN_RTOL):
    """Eigendecomposition of a Hermitian matrix.

    Returns ``(eigenvalues, eigenvectors)`` with real eigenvalues in
    ascending order and orthonormal eigenvector columns.
    """
    m = np.asarray(m)
    require_hermitian(m, rtol)
    return np.linalg.eigh(m)


def require_hermitian(m, rtol=HERMITIAN_RTOL):
    scale = np.abs(m).max()
    dev = np.abs(m - m.conj().T).max()
    if dev > rtol * max(scale, 1e-300):
        raise DomainError(
            f"matrix is not Hermitian: |M - M^dag| = {dev:.3e} "
            f"against scale {scale:.3e}"
        )


def vec(x):
    """Column-stacking vectorization: columns of ``x`` concatenated."""
    return np.asarray(x).reshape(-1, order="F")


def unvec(v, dim):
    """Inverse of :func:`vec` for a square ``dim x dim`` matrix."""
    return np.asarray(v).reshape((dim, dim), order="F")


def assert_density_matrix(
    rho,
    herm_rtol=HERMITIAN_RTOL,
    trace_atol=TRACE_ATOL,
    positivity_atol=POSITIVITY_ATOL,
):
    """Raise ``ValidationError`` unless ``rho`` is a density matrix.

    Checks Hermiticity relative to the largest entry, unit trace, and
    positivity down to ``-positivity_atol`` (integration round-off produces
    tiny negative eigenvalues that are not treated as failures).
    """
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValidationError(f"density matrix must be square, got {rho.shape}")
    scale = max(np.abs(rho).max(), 1e-300)
    herm_dev = np.abs(rho - rho.conj().T).max()
    if herm_dev > herm_rtol * scale:
        raise ValidationError(f"state is not Hermitian: deviation {herm_dev:.3e}")
    trace_dev = abs(np.trace(rho) - 1.0)
    if trace_dev > trace_atol:
        raise ValidationError(f"state trace deviates from 1 by {trace_dev:.3e}")
    lowest = np.linalg.eigvalsh((rho + rho.conj().T) / 2).min()
    if lowest < -positivity_atol:
        raise ValidationError(f"state has eigenvalue {lowest:.3e} below tolerance")
