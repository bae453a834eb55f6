"""Dense complex linear-algebra helpers.

All matrices are plain ``numpy`` arrays.  ``vec`` is column-stacking
everywhere in the package, so ``vec(A @ X @ B) == kron(B.T, A) @ vec(X)``.
"""

import numpy as np

DEFAULT_TOL = 1e-10


class NotHermitianError(ValueError):
    pass


def kron(a, b):
    return np.kron(np.asarray(a), np.asarray(b))


def vec(a):
    """Stack the columns of ``a`` into one long vector."""
    return np.asarray(a).reshape(-1, order="F")


def unvec(v, rows, cols=None):
    if cols is None:
        cols = rows
    return np.asarray(v).reshape((rows, cols), order="F")


def commutation_matrix(k):
    """The k^2 x k^2 permutation ``Z`` with ``Z @ vec(A) == vec(A.T)``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    idx = np.arange(k * k).reshape((k, k), order="F")
    z = np.zeros((k * k, k * k))
    # row r of Z picks entry idx.T flattened column-major
    z[np.arange(k * k), vec(idx.T)] = 1.0
    return z


def is_hermitian(a, tol=1e-12):
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    scale = max(np.max(np.abs(a)), 1.0) if a.size else 1.0
    return bool(np.max(np.abs(a - a.conj().T), initial=0.0) <= tol * scale)


def hermitize(a):
    a = np.asarray(a)
    return 0.5 * (a + a.conj().T)


def pinv(a, tol=DEFAULT_TOL):
    """Moore-Penrose inverse; singular values below ``tol * s_max`` are dropped."""
    a = np.asarray(a)
    if a.size == 0:
        return np.zeros(a.shape[::-1], dtype=a.dtype)
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    keep = s > tol * s[0] if s.size and s[0] > 0 else np.zeros_like(s, dtype=bool)
    s_inv = np.zeros_like(s)
    s_inv[keep] = 1.0 / s[keep]
    return (vh.conj().T * s_inv) @ u.conj().T


def herm_eig(a, tol=1e-12):
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending.

    Returns ``(w, U)`` with ``a == U @ diag(w) @ U^H``.
    """
    a = np.asarray(a)
    if not is_hermitian(a, tol=tol):
        raise NotHermitianError("matrix is not Hermitian")
    w, u = np.linalg.eigh(hermitize(a))
    return w[::-1].copy(), u[:, ::-1].copy()


def null_space(a, tol=DEFAULT_TOL):
    """Orthonormal basis (as columns) of ``{x : a @ x == 0}``."""
    a = np.atleast_2d(np.asarray(a))
    n = a.shape[1]
    if a.shape[0] == 0:
        return np.eye(n, dtype=a.dtype)
    _, s, vh = np.linalg.svd(a, full_matrices=True)
    smax = s[0] if s.size else 0.0
    rank = int(np.sum(s > tol * smax)) if smax > 0 else 0
    return vh[rank:].conj().T.copy()


def selection_matrices(k):
    """Row selectors on ``vec(S)`` for a k x k matrix.

    ``T`` (k(k-1) x k^2) picks the off-diagonal entries in column-major
    order; ``L`` (k x k^2) picks the diagonal, so ``diag(S) == L @ vec(S)``.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    positions = np.arange(k * k).reshape((k, k), order="F")
    off = [positions[i, j] for j in range(k) for i in range(k) if i != j]
    diag = [positions[i, i] for i in range(k)]
    eye = np.eye(k * k)
    return eye[off], eye[diag]
