"""Low-order half-range (Yvon-Mertens) moment systems.

One material's system couples, per cell, the average and slope of the two
half-range zeroth moments.  Every first and second moment that appears is
closured against those unknowns with affine factors frozen at the last
transport pass, so the assembled rows are exact weighted sums of the
per-direction balance and slope equations at the pass values.  Unknown
ordering per cell: [phi+bar, phi+hat, phi-bar, phi-hat].
"""

from dataclasses import dataclass

import numpy as np

from ._blocktri import solve_block_tridiagonal
from .closures import MaterialClosure
from .quadrature import NEGATIVE, POSITIVE
from .transport import HalfMoments

IDX_PB, IDX_PH, IDX_NB, IDX_NH = 0, 1, 2, 3


@dataclass
class BoundaryMoments:
    """Inflow moments at the slab faces.

    J_pos, K_pos act on edge 0 (incoming positive half), J_neg, K_neg on
    edge N (incoming negative half, J_neg <= 0 in the oriented convention).
    phi_pos and phi_neg carry the inflow densities; the assembly never reads
    them, but moment bundles rebuilt from a solution do.
    """

    J_pos: float
    K_pos: float
    J_neg: float
    K_neg: float
    phi_pos: float = 0.0
    phi_neg: float = 0.0


def boundary_from_moments(mom):
    """Pick the inflow moment data off a HalfMoments bundle."""
    n_edge = mom.edge_pos.shape[1]
    return BoundaryMoments(
        J_pos=float(mom.edge_pos[1, 0]),
        K_pos=float(mom.edge_pos[2, 0]),
        J_neg=float(mom.edge_neg[1, n_edge - 1]),
        K_neg=float(mom.edge_neg[2, n_edge - 1]),
        phi_pos=float(mom.edge_pos[0, 0]),
        phi_neg=float(mom.edge_neg[0, n_edge - 1]),
    )


@dataclass
class HalfRangeSolution:
    phi_bar: np.ndarray  # (2, n_cells), [half]
    phi_hat: np.ndarray

    def as_vector(self):
        x = np.empty((self.phi_bar.shape[1], 4))
        x[:, IDX_PB] = self.phi_bar[POSITIVE]
        x[:, IDX_PH] = self.phi_hat[POSITIVE]
        x[:, IDX_NB] = self.phi_bar[NEGATIVE]
        x[:, IDX_NH] = self.phi_hat[NEGATIVE]
        return x

    @classmethod
    def from_vector(cls, x):
        phi_bar = np.stack([x[:, IDX_PB], x[:, IDX_NB]])
        phi_hat = np.stack([x[:, IDX_PH], x[:, IDX_NH]])
        return cls(phi_bar=phi_bar, phi_hat=phi_hat)


@dataclass
class TransitionSources:
    """Per-cell data driving one material from outside it.

    bar and hat feed the zeroth-moment balance and slope rows, k_bar and
    k_hat the first-moment rows.  All four are (n_cells,) and already carry
    their chord-frequency prefactors.
    """

    bar: np.ndarray
    hat: np.ndarray
    k_bar: np.ndarray
    k_hat: np.ndarray

    @classmethod
    def zeros(cls, n_cells):
        return cls(*(np.zeros(n_cells) for _ in range(4)))


def transition_from_raw_moments(mom, rate):
    """Half-range differences of another material's raw angular moments."""
    return TransitionSources(
        bar=rate * (mom.cell_bar[1, POSITIVE] - mom.cell_bar[1, NEGATIVE]),
        hat=rate * (mom.cell_hat[1, POSITIVE] - mom.cell_hat[1, NEGATIVE]),
        k_bar=rate * (mom.cell_bar[2, POSITIVE] - mom.cell_bar[2, NEGATIVE]),
        k_hat=rate * (mom.cell_hat[2, POSITIVE] - mom.cell_hat[2, NEGATIVE]),
    )


def transition_from_solution(closure, sol, rate):
    """Closured moment differences of a half-range solution."""
    j_bar = [closure.c_bar[h](sol.phi_bar[h]) for h in (POSITIVE, NEGATIVE)]
    j_hat = [closure.c_hat[h](sol.phi_hat[h]) for h in (POSITIVE, NEGATIVE)]
    k_bar = [closure.e_bar[h](sol.phi_bar[h]) for h in (POSITIVE, NEGATIVE)]
    k_hat = [closure.e_hat[h](sol.phi_hat[h]) for h in (POSITIVE, NEGATIVE)]
    return TransitionSources(
        bar=rate * (j_bar[0] - j_bar[1]),
        hat=rate * (j_hat[0] - j_hat[1]),
        k_bar=rate * (k_bar[0] - k_bar[1]),
        k_hat=rate * (k_hat[0] - k_hat[1]),
    )


def solution_moments(closure, sol, boundary):
    """Closured HalfMoments of a half-range solution.

    Edge entries at the inflow faces (edge 0 positive, edge N negative) are
    the boundary data, matching where the assembly reads them from.
    """
    n = sol.phi_bar.shape[1]
    cell_bar = np.empty((3, 2, n))
    cell_hat = np.empty((3, 2, n))
    cell_bar[0] = sol.phi_bar
    cell_hat[0] = sol.phi_hat
    for h in (POSITIVE, NEGATIVE):
        cell_bar[1, h] = closure.c_bar[h](sol.phi_bar[h])
        cell_bar[2, h] = closure.e_bar[h](sol.phi_bar[h])
        cell_hat[1, h] = closure.c_hat[h](sol.phi_hat[h])
        cell_hat[2, h] = closure.e_hat[h](sol.phi_hat[h])

    edge_pos = np.empty((3, n + 1))
    edge_neg = np.empty((3, n + 1))
    trace_pos = sol.phi_bar[POSITIVE] + sol.phi_hat[POSITIVE]
    trace_neg = sol.phi_bar[NEGATIVE] - sol.phi_hat[NEGATIVE]
    edge_pos[0, 1:] = trace_pos
    edge_pos[1, 1:] = closure.c_edge[POSITIVE](edge_pos[0])[1:]
    edge_pos[2, 1:] = closure.e_edge[POSITIVE](edge_pos[0])[1:]
    # inflow face data replace the unused closure entries
    edge_pos[0, 0] = boundary.phi_pos
    edge_pos[1, 0] = boundary.J_pos
    edge_pos[2, 0] = boundary.K_pos
    edge_neg[0, :n] = trace_neg
    edge_neg[1, :n] = closure.c_edge[NEGATIVE](edge_neg[0])[:n]
    edge_neg[2, :n] = closure.e_edge[NEGATIVE](edge_neg[0])[:n]
    edge_neg[0, n] = boundary.phi_neg
    edge_neg[1, n] = boundary.J_neg
    edge_neg[2, n] = boundary.K_neg
    return HalfMoments(
        cell_bar=cell_bar, cell_hat=cell_hat, edge_pos=edge_pos, edge_neg=edge_neg
    )


def assemble_material(mat, h, closure, kappa, boundary, trans, q=None):
    """Build the block-tridiagonal system for one material.

    kappa multiplies the half-range differences of the material's own
    closured moments (the removal side of the chord exchange).  trans is a
    TransitionSources with the external data already scaled.  q defaults to
    the material's volumetric source.
    """
    n = closure.c_bar[POSITIVE].factor.shape[0]
    sa = mat.sigma_a
    st = mat.sigma_t
    if q is None:
        q = mat.q

    cbP = closure.c_bar[POSITIVE].factor
    rbP = closure.c_bar[POSITIVE].residual
    cbN = closure.c_bar[NEGATIVE].factor
    rbN = closure.c_bar[NEGATIVE].residual
    chP = closure.c_hat[POSITIVE].factor
    rhP = closure.c_hat[POSITIVE].residual
    chN = closure.c_hat[NEGATIVE].factor
    rhN = closure.c_hat[NEGATIVE].residual
    ebP = closure.e_bar[POSITIVE].factor
    rkP = closure.e_bar[POSITIVE].residual
    ebN = closure.e_bar[NEGATIVE].factor
    rkN = closure.e_bar[NEGATIVE].residual
    ehP = closure.e_hat[POSITIVE].factor
    rkhP = closure.e_hat[POSITIVE].residual
    ehN = closure.e_hat[NEGATIVE].factor
    rkhN = closure.e_hat[NEGATIVE].residual

    # Inflow faces carry data, not unknowns: zero the factor there and fold
    # the datum into the residual so one formula covers every edge.
    CJP = closure.c_edge[POSITIVE].factor.copy()
    RJP = closure.c_edge[POSITIVE].residual.copy()
    CJP[0] = 0.0
    RJP[0] = boundary.J_pos
    CKP = closure.e_edge[POSITIVE].factor.copy()
    RKP = closure.e_edge[POSITIVE].residual.copy()
    CKP[0] = 0.0
    RKP[0] = boundary.K_pos
    CJN = closure.c_edge[NEGATIVE].factor.copy()
    RJN = closure.c_edge[NEGATIVE].residual.copy()
    CJN[n] = 0.0
    RJN[n] = boundary.J_neg
    CKN = closure.e_edge[NEGATIVE].factor.copy()
    RKN = closure.e_edge[NEGATIVE].residual.copy()
    CKN[n] = 0.0
    RKN[n] = boundary.K_neg

    L = np.zeros((n, 4, 4))
    D = np.zeros((n, 4, 4))
    U = np.zeros((n, 4, 4))
    rhs = np.zeros((n, 4))

    # balance row: net edge current / h + absorption + own exchange removal
    D[:, 0, IDX_PB] = CJP[1:] / h + sa + kappa * cbP
    D[:, 0, IDX_PH] = CJP[1:] / h
    D[:, 0, IDX_NB] = -CJN[:-1] / h + sa - kappa * cbN
    D[:, 0, IDX_NH] = CJN[:-1] / h
    U[:, 0, IDX_NB] = CJN[1:] / h
    U[:, 0, IDX_NH] = -CJN[1:] / h
    L[:, 0, IDX_PB] = -CJP[:-1] / h
    L[:, 0, IDX_PH] = -CJP[:-1] / h
    rhs[:, 0] = (
        q
        + trans.bar
        - kappa * (rbP - rbN)
        - (RJP[1:] + RJN[1:]) / h
        + (RJP[:-1] + RJN[:-1]) / h
    )

    # slope of the balance row
    D[:, 1, IDX_PB] = 3.0 * CJP[1:] / h - 6.0 * cbP / h
    D[:, 1, IDX_PH] = 3.0 * CJP[1:] / h + sa + kappa * chP
    D[:, 1, IDX_NB] = 3.0 * CJN[:-1] / h - 6.0 * cbN / h
    D[:, 1, IDX_NH] = -3.0 * CJN[:-1] / h + sa - kappa * chN
    U[:, 1, IDX_NB] = 3.0 * CJN[1:] / h
    U[:, 1, IDX_NH] = -3.0 * CJN[1:] / h
    L[:, 1, IDX_PB] = 3.0 * CJP[:-1] / h
    L[:, 1, IDX_PH] = 3.0 * CJP[:-1] / h
    rhs[:, 1] = (
        trans.hat
        - kappa * (rhP - rhN)
        + 6.0 * (rbP + rbN) / h
        - 3.0 * (RJP[1:] + RJN[1:]) / h
        - 3.0 * (RJP[:-1] + RJN[:-1]) / h
    )

    # first-moment row: net edge second moment / h + total removal on current
    D[:, 2, IDX_PB] = CKP[1:] / h + st * cbP + kappa * ebP
    D[:, 2, IDX_PH] = CKP[1:] / h
    D[:, 2, IDX_NB] = -CKN[:-1] / h + st * cbN - kappa * ebN
    D[:, 2, IDX_NH] = CKN[:-1] / h
    U[:, 2, IDX_NB] = CKN[1:] / h
    U[:, 2, IDX_NH] = -CKN[1:] / h
    L[:, 2, IDX_PB] = -CKP[:-1] / h
    L[:, 2, IDX_PH] = -CKP[:-1] / h
    rhs[:, 2] = (
        trans.k_bar
        - st * (rbP + rbN)
        - kappa * (rkP - rkN)
        - (RKP[1:] + RKN[1:]) / h
        + (RKP[:-1] + RKN[:-1]) / h
    )

    # slope of the first-moment row
    D[:, 3, IDX_PB] = 3.0 * CKP[1:] / h - 6.0 * ebP / h
    D[:, 3, IDX_PH] = 3.0 * CKP[1:] / h + st * chP + kappa * ehP
    D[:, 3, IDX_NB] = 3.0 * CKN[:-1] / h - 6.0 * ebN / h
    D[:, 3, IDX_NH] = -3.0 * CKN[:-1] / h + st * chN - kappa * ehN
    U[:, 3, IDX_NB] = 3.0 * CKN[1:] / h
    U[:, 3, IDX_NH] = -3.0 * CKN[1:] / h
    L[:, 3, IDX_PB] = 3.0 * CKP[:-1] / h
    L[:, 3, IDX_PH] = 3.0 * CKP[:-1] / h
    rhs[:, 3] = (
        trans.k_hat
        - st * (rhP + rhN)
        - kappa * (rkhP - rkhN)
        + 6.0 * (rkP + rkN) / h
        - 3.0 * (RKP[1:] + RKN[1:]) / h
        - 3.0 * (RKP[:-1] + RKN[:-1]) / h
    )

    return L, D, U, rhs


def solve_material(mat, h, closure, kappa, boundary, trans, q=None):
    L, D, U, rhs = assemble_material(mat, h, closure, kappa, boundary, trans, q)
    x = solve_block_tridiagonal(L, D, U, rhs)
    return HalfRangeSolution.from_vector(x)


def gauss_seidel_pass(materials, h, closures, boundaries, moms):
    """One low-order material sweep in fixed order.

    Material 0 is driven by the raw half-range moments of material 1's last
    transport iterate, material 1 by the freshly closured solution of
    material 0.  Returns the two HalfRangeSolutions.
    """
    trans0 = transition_from_raw_moments(moms[1], 1.0 / materials[0].chord)
    sol0 = solve_material(
        materials[0], h, closures[0], 1.0 / materials[0].chord, boundaries[0], trans0
    )
    trans1 = transition_from_solution(closures[0], sol0, 1.0 / materials[1].chord)
    sol1 = solve_material(
        materials[1], h, closures[1], 1.0 / materials[1].chord, boundaries[1], trans1
    )
    return sol0, sol1


def ensemble_transition(materials, mapped, edd_bar, edd_hat):
    """Exchange data for re-solving one material against the ensemble.

    The chord exchange rewritten against the ensemble average raises the
    removal frequency to kappa = 1/chord_1 + 1/chord_2 and decouples the two
    material solves.  mapped holds the ensemble half-range averages; edd_bar
    and edd_hat are (pos, neg) affine closures giving their second moments.
    Returns (kappa, TransitionSources).
    """
    kappa = 1.0 / materials[0].chord + 1.0 / materials[1].chord
    trans = TransitionSources(
        bar=kappa * (mapped.J_bar[POSITIVE] - mapped.J_bar[NEGATIVE]),
        hat=kappa * (mapped.J_hat[POSITIVE] - mapped.J_hat[NEGATIVE]),
        k_bar=kappa
        * (edd_bar[POSITIVE](mapped.phi_bar[POSITIVE]) - edd_bar[NEGATIVE](mapped.phi_bar[NEGATIVE])),
        k_hat=kappa
        * (edd_hat[POSITIVE](mapped.phi_hat[POSITIVE]) - edd_hat[NEGATIVE](mapped.phi_hat[NEGATIVE])),
    )
    return kappa, trans


def ensemble_driven_solve(materials, h, closures, boundaries, mapped, edd_bar, edd_hat):
    """Re-solve both materials against ensemble-averaged exchange data."""
    kappa, trans = ensemble_transition(materials, mapped, edd_bar, edd_hat)
    out = []
    for l in (0, 1):
        out.append(
            solve_material(
                materials[l], h, closures[l], kappa, boundaries[l], trans
            )
        )
    return out[0], out[1]
