"""Dense linear-algebra kernels used by every other module.

Thin contracts over scipy/numpy: the matrix exponential (scaling-and-squaring
with Pade approximants), symmetric eigendecomposition and SVD.  The wrappers
pin down the conventions the rest of the package relies on -- finite input
only, ascending eigenvalues, descending singular values, ``V`` returned such
that ``M = U @ diag(s) @ V.T`` -- and enforce the symmetry tolerance for
eigendecompositions of analytically-symmetric matrices that carry roundoff.
"""

import numpy as np
import scipy.linalg

from .errors import ContractError

__all__ = ["expm", "sym_eig", "svd", "require_finite"]

# Input to sym_eig may deviate from exact symmetry by this much (relative to
# max(1, ||M||_max)); larger deviations indicate a bug upstream, not roundoff.
SYM_TOL = 1e-9


def require_finite(M, name="matrix"):
    """Raise ContractError if M contains NaN or Inf."""
    if not np.all(np.isfinite(M)):
        raise ContractError("%s contains non-finite entries" % name)


def expm(M):
    """Matrix exponential e^M of a square real or complex matrix.

    Delegates to scipy's scaling-and-squaring Pade implementation; double
    precision throughout.
    """
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ContractError("expm requires a square matrix, got shape %s" % (M.shape,))
    require_finite(M, "expm input")
    return scipy.linalg.expm(M)


def sym_eig(M):
    """Eigendecomposition of a (numerically) symmetric matrix.

    Parameters
    ----------
    M : (n, n) array
        Symmetric up to roundoff: ``max|M - M.T| <= 1e-9 * max(1, max|M|)``.
        Matrices such as X e^{dz A} are symmetric analytically but carry
        floating-point asymmetry; the kernel symmetrizes via (M + M.T)/2
        before decomposing.

    Returns
    -------
    w : (n,) ndarray
        Eigenvalues in ascending order.
    V : (n, n) ndarray
        Orthonormal eigenvectors as columns, ``M = V diag(w) V.T``.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ContractError("sym_eig requires a square matrix, got shape %s" % (M.shape,))
    require_finite(M, "sym_eig input")
    asym = np.max(np.abs(M - M.T)) if M.size else 0.0
    scale = max(1.0, float(np.max(np.abs(M))) if M.size else 0.0)
    if asym > SYM_TOL * scale:
        raise ContractError(
            "sym_eig input asymmetry %.3e exceeds tolerance %.3e" % (asym, SYM_TOL * scale)
        )
    w, V = np.linalg.eigh(0.5 * (M + M.T))
    return w, V


def svd(M):
    """Singular value decomposition ``M = U @ diag(s) @ V.T``.

    Returns (U, s, V) with s nonnegative descending and V (not V^T) holding
    right singular vectors as columns.
    """
    M = np.asarray(M)
    require_finite(M, "svd input")
    U, s, Vh = np.linalg.svd(M, full_matrices=False)
    return U, s, Vh.conj().T
