"""Pure-NumPy implementations of the hot inner-loop kernels.

Mirrors the signatures of the compiled module ``netkucb._core``; the active
implementation is chosen once at import in :mod:`netkucb.backend`.
"""

import numpy as np


def grow_inverse(M, u, c, n):
    """Grow an n-by-n maintained inverse by one bordered row/column in place.

    ``M`` is a capacity buffer of at least (n+1, n+1); its leading n-by-n
    block holds the current inverse.  ``u`` is the product of that block
    with the new point's kernel column and ``c`` is the reciprocal Schur
    complement.  The updated (n+1)-dim inverse is written into the leading
    block of ``M``.
    """
    un = u[:n]
    M[:n, :n] += c * np.outer(un, un)
    M[:n, n] = -c * un
    M[n, :n] = -c * un
    M[n, n] = c


def sherman_morrison(Ainv, phi):
    """Rank-1 update of a maintained inverse: A <- A + phi phi^T, in place.

    Returns ``s = 1 + phi^T A^{-1} phi`` (the determinant ratio of the
    update, used for incremental log-det tracking).
    """
    u = Ainv @ phi
    s = 1.0 + float(phi @ u)
    Ainv -= np.outer(u, u) / s
    return s


def linear_row(P, q, out, n):
    """out[:n] = P[:n] @ q for a packed point buffer P."""
    np.dot(P[:n], q, out=out[:n])


def rbf_row(P, q, inv_two_sq, out, n):
    """out[i] = exp(-||P[i] - q||^2 * inv_two_sq) for i < n."""
    d = P[:n] - q
    np.einsum("ij,ij->i", d, d, out=out[:n])
    out[:n] *= -inv_two_sq
    np.exp(out[:n], out=out[:n])


def matern_row(P, q, lengthscale, nu, out, n):
    """Matern kernel row for nu in {0.5, 1.5, 2.5} (closed forms)."""
    d = P[:n] - q
    r = np.sqrt(np.einsum("ij,ij->i", d, d)) / lengthscale
    if nu == 0.5:
        out[:n] = np.exp(-r)
    elif nu == 1.5:
        t = np.sqrt(3.0) * r
        out[:n] = (1.0 + t) * np.exp(-t)
    elif nu == 2.5:
        t = np.sqrt(5.0) * r
        out[:n] = (1.0 + t + t * t / 3.0) * np.exp(-t)
    else:
        raise ValueError(f"unsupported matern smoothness {nu}")
