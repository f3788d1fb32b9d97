"""Ensemble-averaged low-order system with quasidiffusion closures.

Unknowns per cell: the ensemble scalar flux and current, each as an LD
average/slope pair [phi_bar, phi_hat, J_bar, J_hat].  Face currents and
face second moments are affine chains through the frozen closure factors,
so each cell couples only to its neighbors and the system is
block-tridiagonal.  Face values are recovered from the solution afterwards.
"""

from dataclasses import dataclass

import numpy as np

from ._blocktri import solve_block_tridiagonal
from .quadrature import NEGATIVE, POSITIVE


@dataclass
class EnsembleBoundary:
    """p-weighted inflow moments at the slab faces."""

    J_pos: float
    K_pos: float
    J_neg: float
    K_neg: float
    phi_pos: float = 0.0
    phi_neg: float = 0.0


def ensemble_boundary(p, bounds):
    """Mix two per-material BoundaryMoments with the volume fractions."""

    def mix(attr):
        return p[0] * getattr(bounds[0], attr) + p[1] * getattr(bounds[1], attr)

    return EnsembleBoundary(
        J_pos=mix("J_pos"),
        K_pos=mix("K_pos"),
        J_neg=mix("J_neg"),
        K_neg=mix("K_neg"),
        phi_pos=mix("phi_pos"),
        phi_neg=mix("phi_neg"),
    )


@dataclass
class EnsembleSolution:
    phi_bar: np.ndarray  # (n_cells,)
    phi_hat: np.ndarray
    J_bar: np.ndarray
    J_hat: np.ndarray


def edge_forms(co, boundary, n):
    """Linear forms giving face currents and second moments.

    Returns (jpL, jnR, jconst, kpL, knR, kconst), each (n + 1,).  The face
    value at edge e is  form_L[e] * (phi_bar + phi_hat)[e-1]
    + form_R[e] * (phi_bar - phi_hat)[e] + const[e],  with the left term
    dropped at e = 0 and the right term at e = n, where inflow data stand
    in for the missing half.
    """
    fp, fn = co.f_edge
    cp, cn = co.c_edge
    ep, en = co.e_edge

    jpL = cp.factor * fp.factor
    jnR = cn.factor * fn.factor
    jconst = (cp.factor * fp.residual + cp.residual) + (
        cn.factor * fn.residual + cn.residual
    )
    kpL = ep.factor * fp.factor
    knR = en.factor * fn.factor
    kconst = (ep.factor * fp.residual + ep.residual) + (
        en.factor * fn.residual + en.residual
    )
    # inflow sides are data, not closures
    jpL = jpL.copy()
    jnR = jnR.copy()
    jconst = jconst.copy()
    kpL = kpL.copy()
    knR = knR.copy()
    kconst = kconst.copy()
    jpL[0] = 0.0
    kpL[0] = 0.0
    jconst[0] = boundary.J_pos + (cn.factor[0] * fn.residual[0] + cn.residual[0])
    kconst[0] = boundary.K_pos + (en.factor[0] * fn.residual[0] + en.residual[0])
    jnR[n] = 0.0
    knR[n] = 0.0
    jconst[n] = boundary.J_neg + (cp.factor[n] * fp.residual[n] + cp.residual[n])
    kconst[n] = boundary.K_neg + (ep.factor[n] * fp.residual[n] + ep.residual[n])
    return jpL, jnR, jconst, kpL, knR, kconst


def assemble_ensemble(co, h, boundary, extra_rhs=None):
    n = co.sa_bar.factor.shape[0]
    jpL, jnR, jconst, kpL, knR, kconst = edge_forms(co, boundary, n)

    L = np.zeros((n, 4, 4))
    D = np.zeros((n, 4, 4))
    U = np.zeros((n, 4, 4))
    rhs = np.zeros((n, 4))

    # balance: net face current / h + closured absorption = source
    D[:, 0, 0] = jpL[1:] / h - jnR[:-1] / h + co.sa_bar.factor
    D[:, 0, 1] = jpL[1:] / h + jnR[:-1] / h
    U[:, 0, 0] = jnR[1:] / h
    U[:, 0, 1] = -jnR[1:] / h
    L[:, 0, 0] = -jpL[:-1] / h
    L[:, 0, 1] = -jpL[:-1] / h
    rhs[:, 0] = co.q_bar - co.sa_bar.residual - (jconst[1:] - jconst[:-1]) / h

    # slope of balance: face currents against the cell-average current
    D[:, 1, 0] = 3.0 * jpL[1:] / h + 3.0 * jnR[:-1] / h
    D[:, 1, 1] = 3.0 * jpL[1:] / h - 3.0 * jnR[:-1] / h + co.sa_hat.factor
    D[:, 1, 2] = -6.0 / h
    U[:, 1, 0] = 3.0 * jnR[1:] / h
    U[:, 1, 1] = -3.0 * jnR[1:] / h
    L[:, 1, 0] = 3.0 * jpL[:-1] / h
    L[:, 1, 1] = 3.0 * jpL[:-1] / h
    rhs[:, 1] = -co.sa_hat.residual - 3.0 * (jconst[1:] + jconst[:-1]) / h

    # first moment: net face second moment / h + removal on the current
    D[:, 2, 0] = kpL[1:] / h - knR[:-1] / h + co.eta_bar.factor
    D[:, 2, 1] = kpL[1:] / h + knR[:-1] / h
    D[:, 2, 2] = co.st_bar
    U[:, 2, 0] = knR[1:] / h
    U[:, 2, 1] = -knR[1:] / h
    L[:, 2, 0] = -kpL[:-1] / h
    L[:, 2, 1] = -kpL[:-1] / h
    rhs[:, 2] = -co.eta_bar.residual - (kconst[1:] - kconst[:-1]) / h

    # slope of first moment: cell second moment through the Eddington factor
    D[:, 3, 0] = (
        3.0 * kpL[1:] / h + 3.0 * knR[:-1] / h - 6.0 * co.edd_bar.factor / h
    )
    D[:, 3, 1] = 3.0 * kpL[1:] / h - 3.0 * knR[:-1] / h + co.eta_hat.factor
    D[:, 3, 3] = co.st_hat
    U[:, 3, 0] = 3.0 * knR[1:] / h
    U[:, 3, 1] = -3.0 * knR[1:] / h
    L[:, 3, 0] = 3.0 * kpL[:-1] / h
    L[:, 3, 1] = 3.0 * kpL[:-1] / h
    rhs[:, 3] = (
        -co.eta_hat.residual
        + 6.0 * co.edd_bar.residual / h
        - 3.0 * (kconst[1:] + kconst[:-1]) / h
    )

    if extra_rhs is not None:
        rhs += extra_rhs
    return L, D, U, rhs


def solve_ensemble(co, h, boundary, extra_rhs=None):
    L, D, U, rhs = assemble_ensemble(co, h, boundary, extra_rhs)
    x = solve_block_tridiagonal(L, D, U, rhs)
    return EnsembleSolution(
        phi_bar=x[:, 0], phi_hat=x[:, 1], J_bar=x[:, 2], J_hat=x[:, 3]
    )


def edge_currents(co, boundary, sol):
    """Face currents of a solution, edge index 0..N."""
    n = sol.phi_bar.shape[0]
    jpL, jnR, jconst, _, _, _ = edge_forms(co, boundary, n)
    t_left = sol.phi_bar + sol.phi_hat
    t_right = sol.phi_bar - sol.phi_hat
    j = jconst.copy()
    j[1:] += jpL[1:] * t_left
    j[:-1] += jnR[:-1] * t_right
    return j


def edge_half_densities(co, boundary, sol):
    """Half-range face densities (pos, neg) of a solution, each (N + 1,).

    Inflow sides carry the boundary data densities.
    """
    n = sol.phi_bar.shape[0]
    fp, fn = co.f_edge
    pos = np.empty(n + 1)
    neg = np.empty(n + 1)
    pos[1:] = fp(np.r_[0.0, sol.phi_bar + sol.phi_hat])[1:]
    pos[0] = boundary.phi_pos
    neg[:-1] = fn(np.r_[sol.phi_bar - sol.phi_hat, 0.0])[:-1]
    neg[n] = boundary.phi_neg
    return pos, neg
