"""Small dense linear-algebra helpers used by the GP modules."""

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .errors import NumericalError


def stable_cholesky(K, jitter=0.0, max_jitter_scale=1e-4):
    """Lower Cholesky factor of ``K + jitter*I``, escalating jitter on failure.

    Jitter grows by factors of 10 up to ``max_jitter_scale * max(diag(K))``.
    Returns ``(L, jitter_used)``. Raises :class:`NumericalError` if no jitter
    in that range factorizes the matrix.
    """
    K = np.asarray(K, dtype=float)
    n = K.shape[0]
    diag_max = max(np.max(np.diag(K)), 1.0) if n else 1.0
    j = float(jitter)
    while True:
        try:
            L = np.linalg.cholesky(K + j * np.eye(n) if j > 0.0 else K)
            return L, j
        except np.linalg.LinAlgError:
            j = max(j * 10.0, 1e-12 * diag_max)
            if j > max_jitter_scale * diag_max:
                raise NumericalError(
                    f"Cholesky failed for {n}x{n} matrix even with jitter "
                    f"{j:.3e} (max allowed {max_jitter_scale * diag_max:.3e})"
                )


def chol_solve(L, B):
    """Solve ``A x = B`` given the lower Cholesky factor L of A."""
    return cho_solve((L, True), B)


def tri_solve(L, B, trans=False):
    """Solve ``L x = B`` (or ``L.T x = B`` when ``trans``) for lower-triangular L."""
    return solve_triangular(L, B, lower=True, trans=1 if trans else 0)


def logdet_from_chol(L):
    """log det(A) from the lower Cholesky factor of A."""
    return 2.0 * np.sum(np.log(np.diag(L)))


def symmetrize(A):
    return 0.5 * (A + A.T)


def softplus(x):
    """Numerically stable log(1 + exp(x))."""
    x = np.asarray(x, dtype=float)
    return np.where(x > 30.0, x, np.log1p(np.exp(np.minimum(x, 30.0))))


def softplus_inv(y):
    """Inverse of :func:`softplus`; y must be strictly positive."""
    y = np.asarray(y, dtype=float)
    return np.where(y > 30.0, y, np.log(np.expm1(np.maximum(y, 1e-300))))


def softplus_grad(x):
    """d softplus(x) / dx, the logistic sigmoid."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x, dtype=float)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out
