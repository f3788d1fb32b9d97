"""Source-iteration baseline on the same high-order transport operator.

Each outer iteration sweeps both materials with the scattering sources
frozen at the previous iterate, then refreshes the sources from the new
angular fluxes.  Stopping metric and spectral-radius estimate match the
multilevel driver, so the two are directly comparable.
"""

import numpy as np

from .multilevel import (
    IterationHistory,
    IterationOptions,
    SolveResult,
    estimate_spectral_radius,
)
from .quadrature import NEGATIVE, POSITIVE
from .transport import AngularFlux, gauss_seidel_highorder, material_moments


def run_source_iteration(prob, options=None):
    if options is None:
        options = IterationOptions()
    quad = prob.quadrature()
    n = prob.n_cells
    p = prob.p

    psi = AngularFlux.zeros(n, quad.n_per_half)
    phi_scat_bar = np.zeros((2, n))
    phi_scat_hat = np.zeros((2, n))
    phi_prev = np.zeros(n)
    history = IterationHistory()

    material_phi = np.zeros((2, 2, n))
    material_phi_hat = np.zeros((2, 2, n))
    phi_hat_ens = np.zeros(n)
    current_ens = np.zeros(n)

    for _ in range(options.max_iterations):
        psi = gauss_seidel_highorder(
            quad, prob, phi_scat_bar, phi_scat_hat, psi, options.n_transport_cycles
        )
        moms = [
            material_moments(quad, psi.bar[l], psi.hat[l], prob.inflow[l])
            for l in (0, 1)
        ]
        mat_delta = [0.0, 0.0]
        for l in (0, 1):
            material_phi[l] = moms[l].cell_bar[0]
            material_phi_hat[l] = moms[l].cell_hat[0]
            new_bar = material_phi[l, POSITIVE] + material_phi[l, NEGATIVE]
            mat_delta[l] = float(np.max(np.abs(new_bar - phi_scat_bar[l])))
            phi_scat_bar[l] = new_bar
            phi_scat_hat[l] = (
                material_phi_hat[l, POSITIVE] + material_phi_hat[l, NEGATIVE]
            )
        phi_ens = p[0] * phi_scat_bar[0] + p[1] * phi_scat_bar[1]
        phi_hat_ens = p[0] * phi_scat_hat[0] + p[1] * phi_scat_hat[1]
        current_ens = np.zeros(n)
        for l in (0, 1):
            current_ens += p[l] * (
                moms[l].cell_bar[1, POSITIVE] + moms[l].cell_bar[1, NEGATIVE]
            )

        delta = float(np.max(np.abs(phi_ens - phi_prev)))
        norm = float(np.max(np.abs(phi_ens)))
        history.deltas.append(delta)
        history.norms.append(norm)
        history.material_deltas.append(mat_delta)
        history.iterations += 1
        phi_prev = phi_ens.copy()
        if history.iterations > 1 and delta <= options.epsilon * norm:
            history.converged = True
            break

    history.rho = estimate_spectral_radius(history.deltas, options.rho_window)
    return SolveResult(
        phi=phi_prev,
        phi_hat=phi_hat_ens,
        current=current_ens,
        material_phi=material_phi.copy(),
        material_phi_hat=material_phi_hat.copy(),
        psi=psi,
        history=history,
    )
