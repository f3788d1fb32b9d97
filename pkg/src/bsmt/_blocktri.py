"""Block-tridiagonal direct solver (block Thomas elimination)."""

import numpy as np


def solve_block_tridiagonal(lower, diag, upper, rhs):
    """Solve L[i] x[i-1] + D[i] x[i] + U[i] x[i+1] = rhs[i] for all i.

    lower, diag, upper: (N, B, B); rhs: (N, B).  lower[0] and upper[N-1] are
    never referenced.  Returns x of shape (N, B).  A singular pivot raises
    numpy.linalg.LinAlgError naming the offending cell.
    """
    n = diag.shape[0]
    b = diag.shape[1]
    uy = np.empty((n, b, b))
    ry = np.empty((n, b))
    dmod = diag[0]
    rmod = rhs[0]
    for i in range(n):
        try:
            packed = np.linalg.solve(
                dmod, np.concatenate([upper[i], rmod[:, None]], axis=1)
            )
        except np.linalg.LinAlgError as err:
            raise np.linalg.LinAlgError(
                f"singular pivot block at cell {i}"
            ) from err
        uy[i] = packed[:, :b]
        ry[i] = packed[:, b]
        if i + 1 < n:
            dmod = diag[i + 1] - lower[i + 1] @ uy[i]
            rmod = rhs[i + 1] - lower[i + 1] @ ry[i]
    x = np.empty((n, b))
    x[n - 1] = ry[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = ry[i] - uy[i] @ x[i + 1]
    return x


def block_tridiagonal_residual(lower, diag, upper, rhs, x):
    """rhs minus the operator applied to x, same shapes as rhs."""
    n = diag.shape[0]
    r = rhs.copy()
    for i in range(n):
        r[i] -= diag[i] @ x[i]
        if i > 0:
            r[i] -= lower[i] @ x[i - 1]
        if i + 1 < n:
            r[i] -= upper[i] @ x[i + 1]
    return r
