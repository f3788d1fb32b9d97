"""Discrete-ordinates transport sweeps with linear-discontinuous elements.

Each material carries its own angular flux field conditioned on that material
being present.  Within a cell the flux is linear in x per direction: a cell
average (bar) plus a slope component (hat), with the reconstructed value
bar + hat at the right face and bar - hat at the left face.  Faces are closed
by upwinding, so a sweep marches cell by cell in the flow direction and each
cell reduces to a 2x2 solve done in closed form.

Chord-length coupling between the two material fields adds |mu|/chord to the
removal term of each field and the matching |mu|/chord * psi_other source.
The coupling source is evaluated from a frozen copy of the other field, so a
Gauss-Seidel cycle alternates full sweeps between the materials.
"""

from dataclasses import dataclass

import numpy as np

from .quadrature import NEGATIVE, POSITIVE

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dep but stay usable
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        return wrap


@dataclass
class AngularFlux:
    """Per-material LD angular flux: bar and hat, shape (2, 2, N, n).

    Axes: material, half range (POSITIVE/NEGATIVE), cell, direction index.
    """

    bar: np.ndarray
    hat: np.ndarray

    @classmethod
    def zeros(cls, n_cells, n_per_half):
        shape = (2, 2, n_cells, n_per_half)
        return cls(bar=np.zeros(shape), hat=np.zeros(shape))

    def copy(self):
        return AngularFlux(bar=self.bar.copy(), hat=self.hat.copy())


@njit(cache=True)
def _sweep_kernel(
    mu,
    h,
    sigma_t,
    inv_chord,
    sbar_p,
    shat_p,
    sbar_n,
    shat_n,
    inflow_p,
    inflow_n,
    bar_p,
    hat_p,
    bar_n,
    hat_n,
):
    # one material, both halves, all directions; sources are fully formed
    n_cells, n_dir = sbar_p.shape
    for m in range(n_dir):
        a = mu[m]
        sh = (sigma_t + a * inv_chord) * h
        det = (sh + a) * (sh + 3.0 * a) + 3.0 * a * a
        # mu > 0: march left to right, inflow at the left face
        psi_in = inflow_p[m]
        for i in range(n_cells):
            u = h * sbar_p[i, m] + a * psi_in
            v = h * shat_p[i, m] - 3.0 * a * psi_in
            pb = (u * (sh + 3.0 * a) - a * v) / det
            ph = ((sh + a) * v + 3.0 * a * u) / det
            bar_p[i, m] = pb
            hat_p[i, m] = ph
            psi_in = pb + ph
        # mu < 0: march right to left, inflow at the right face
        psi_in = inflow_n[m]
        for i in range(n_cells - 1, -1, -1):
            u = h * sbar_n[i, m] + a * psi_in
            v = h * shat_n[i, m] + 3.0 * a * psi_in
            pb = (u * (sh + 3.0 * a) + a * v) / det
            ph = ((sh + a) * v - 3.0 * a * u) / det
            bar_n[i, m] = pb
            hat_n[i, m] = ph
            psi_in = pb - ph


def sweep_material(quad, mat, h, phi_bar, phi_hat, other_bar, other_hat, inflow):
    """Solve one material's LD system with all couplings frozen.

    phi_bar, phi_hat: (N,) scattering scalar flux for this material.
    other_bar, other_hat: (2, N, n) angular flux of the other material.
    inflow: (2, n) boundary intensities, row 0 left (+mu), row 1 right (-mu).

    Returns (bar, hat) arrays of shape (2, N, n).
    """
    n_cells = phi_bar.shape[0]
    n_dir = quad.n_per_half
    inv_chord = 1.0 / mat.chord
    iso_bar = 0.5 * (mat.sigma_s * phi_bar + mat.q)
    iso_hat = 0.5 * mat.sigma_s * phi_hat
    trans = quad.mu * inv_chord
    sbar = iso_bar[None, :, None] + trans[None, None, :] * other_bar
    shat = iso_hat[None, :, None] + trans[None, None, :] * other_hat
    bar = np.empty((2, n_cells, n_dir))
    hat = np.empty((2, n_cells, n_dir))
    _sweep_kernel(
        quad.mu,
        h,
        mat.sigma_t,
        inv_chord,
        np.ascontiguousarray(sbar[POSITIVE]),
        np.ascontiguousarray(shat[POSITIVE]),
        np.ascontiguousarray(sbar[NEGATIVE]),
        np.ascontiguousarray(shat[NEGATIVE]),
        np.ascontiguousarray(inflow[0]),
        np.ascontiguousarray(inflow[1]),
        bar[POSITIVE],
        hat[POSITIVE],
        bar[NEGATIVE],
        hat[NEGATIVE],
    )
    return bar, hat


def gauss_seidel_highorder(
    quad, prob, phi_bar_scat, phi_hat_scat, psi, n_cycles, return_precycle=False
):
    """Run n_cycles Gauss-Seidel cycles over the material pair.

    The scattering flux (phi_bar_scat, phi_hat_scat, both (2, N)) stays fixed
    for every cycle; only the chord coupling is iterated.  Material 0 solves
    against the incoming field of material 1, then material 1 solves against
    the fresh field of material 0.

    With return_precycle the state from the top of the final cycle comes
    back as a second value: the partner field that material 0's last sweep
    actually consumed.
    """
    if n_cycles < 1:
        raise ValueError("need at least one cycle")
    h = prob.dx
    out = psi.copy()
    pre = out
    for _ in range(n_cycles):
        if return_precycle:
            pre = out.copy()
        b0, h0 = sweep_material(
            quad,
            prob.materials[0],
            h,
            phi_bar_scat[0],
            phi_hat_scat[0],
            out.bar[1],
            out.hat[1],
            prob.inflow[0],
        )
        out.bar[0], out.hat[0] = b0, h0
        b1, h1 = sweep_material(
            quad,
            prob.materials[1],
            h,
            phi_bar_scat[1],
            phi_hat_scat[1],
            out.bar[0],
            out.hat[0],
            prob.inflow[1],
        )
        out.bar[1], out.hat[1] = b1, h1
    if return_precycle:
        return out, pre
    return out


@dataclass
class HalfMoments:
    """Half-range angular moments of one material's LD field.

    cell_bar[k, half, i] and cell_hat[k, half, i] are k-th moments (k = 0, 1,
    2) of the bar and hat components.  edge_pos[k, e] / edge_neg[k, e] are
    moments of the upwind face traces at edges e = 0..N, with prescribed
    inflow supplying the boundary trace on each half's incoming side.

    All values use the oriented sign convention: zeroth and second moments
    are nonnegative for nonnegative fields on both halves, and the first
    moment of the negative half is the (negative) partial current.
    """

    cell_bar: np.ndarray
    cell_hat: np.ndarray
    edge_pos: np.ndarray
    edge_neg: np.ndarray


def material_moments(quad, bar, hat, inflow):
    """Moment bundle for one material field (bar, hat of shape (2, N, n))."""
    n_cells = bar.shape[1]
    wk = np.stack([quad.w * quad.mu**k for k in range(3)])  # (3, n)
    sign = np.array([1.0, -1.0, 1.0])  # orientation prefix for the - half
    cell_bar = np.empty((3, 2, n_cells))
    cell_hat = np.empty((3, 2, n_cells))
    for k in range(3):
        cell_bar[k, POSITIVE] = bar[POSITIVE] @ wk[k]
        cell_hat[k, POSITIVE] = hat[POSITIVE] @ wk[k]
        cell_bar[k, NEGATIVE] = sign[k] * (bar[NEGATIVE] @ wk[k])
        cell_hat[k, NEGATIVE] = sign[k] * (hat[NEGATIVE] @ wk[k])
    edge_pos = np.empty((3, n_cells + 1))
    edge_neg = np.empty((3, n_cells + 1))
    trace_pos = bar[POSITIVE] + hat[POSITIVE]  # value at each cell's right face
    trace_neg = bar[NEGATIVE] - hat[NEGATIVE]  # value at each cell's left face
    for k in range(3):
        edge_pos[k, 0] = inflow[0] @ wk[k]
        edge_pos[k, 1:] = trace_pos @ wk[k]
        edge_neg[k, n_cells] = sign[k] * (inflow[1] @ wk[k])
        edge_neg[k, :n_cells] = sign[k] * (trace_neg @ wk[k])
    return HalfMoments(
        cell_bar=cell_bar, cell_hat=cell_hat, edge_pos=edge_pos, edge_neg=edge_neg
    )


def scalar_flux(moments):
    """Full-range scalar flux components (bar, hat), each (N,)."""
    bar = moments.cell_bar[0, POSITIVE] + moments.cell_bar[0, NEGATIVE]
    hat = moments.cell_hat[0, POSITIVE] + moments.cell_hat[0, NEGATIVE]
    return bar, hat
