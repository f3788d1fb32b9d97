"""Half-range Gauss-Legendre quadrature for slab-geometry transport.

The discrete-ordinates direction set is symmetric about mu = 0.  Each half
range carries its own n-point Gauss-Legendre rule mapped onto (0, 1), so the
full set has 2n ordinates ("double" Gauss quadrature).  Weights are
normalized so that each half integrates to 1, i.e. sum(w) = int_0^1 dmu.
"""

from dataclasses import dataclass

import numpy as np

POSITIVE = 0
NEGATIVE = 1


@dataclass(frozen=True)
class AngularQuadrature:
    """Direction cosines mu in (0, 1), ascending, and matching weights.

    The same (mu, w) arrays serve both half ranges: a field value at index m
    of the negative half lives at direction -mu[m].
    """

    mu: np.ndarray
    w: np.ndarray

    @property
    def n_per_half(self):
        return self.mu.size


def _legendre_roots(n, tol=1e-15, max_iter=100):
    # Newton iteration on P_n over [-1, 1] with the usual Chebyshev-style
    # initial guesses.  Converges quadratically; tol is on the update.
    k = np.arange(1, n + 1)
    x = np.cos(np.pi * (k - 0.25) / (n + 0.5))
    for _ in range(max_iter):
        p0 = np.ones_like(x)
        p1 = x.copy()
        for j in range(2, n + 1):
            p0, p1 = p1, ((2 * j - 1) * x * p1 - (j - 1) * p0) / j
        dp = n * (x * p1 - p0) / (x * x - 1.0)
        dx = p1 / dp
        x -= dx
        if np.max(np.abs(dx)) < tol:
            break
    # final recurrence pass for derivative at the converged roots
    p0 = np.ones_like(x)
    p1 = x.copy()
    for j in range(2, n + 1):
        p0, p1 = p1, ((2 * j - 1) * x * p1 - (j - 1) * p0) / j
    dp = n * (x * p1 - p0) / (x * x - 1.0)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    order = np.argsort(x)
    return x[order], w[order]


def build_double_gauss_legendre(n_per_half):
    """Build the 2 x n_per_half direction set, one n-point rule per half.

    Nodes are generated by Newton iteration on the Legendre recurrence (no
    tabulated values) and affinely mapped from [-1, 1] to [0, 1].
    """
    if n_per_half < 1:
        raise ValueError("n_per_half must be >= 1")
    x, w = _legendre_roots(int(n_per_half))
    mu = 0.5 * (x + 1.0)
    return AngularQuadrature(mu=mu, w=0.5 * w)


def half_moment(quad, values, k, half, convention="prefixed"):
    """Discrete k-th angular moment of one half range.

    values holds the field at the half's nodes: values[m] sits at +mu[m] on
    the positive half and at -mu[m] on the negative half.

    convention "prefixed" returns the physically signed quantity
    +/- int_0^{+/-1} mu^k psi dmu, i.e. the integral in the half's natural
    orientation: phi^+- >= 0 and the k = 1 moment of the negative half is
    the (negative) partial current J^-.  convention "raw" returns the
    literal reversed-orientation integral int_0^{+/-1}, which flips the
    sign of every negative-half moment; these are the ratios' numerators
    and denominators in the closure-factor definitions.
    """
    values = np.asarray(values, dtype=float)
    if values.shape[-1] != quad.n_per_half:
        raise ValueError("values shape does not match quadrature")
    if k < 0:
        raise ValueError("moment order must be >= 0")
    base = values @ (quad.w * quad.mu**k)
    if half == POSITIVE:
        return base
    if half == NEGATIVE:
        if convention == "prefixed":
            return ((-1.0) ** k) * base
        if convention == "raw":
            return -((-1.0) ** k) * base
        raise ValueError(f"unknown convention {convention!r}")
    raise ValueError(f"unknown half {half!r}")
