"""Nonlinear-projection multilevel solver for the coupled material pair.

Each outer iteration runs a fixed number of high-order transport cycles,
freezes closure factors from the fresh angular fluxes, then descends
through the two low-order levels: the half-range material systems in a
Gauss-Seidel pass, and the ensemble-averaged system with quasidiffusion
closures.  The ensemble answer is mapped back to half-range data, both
materials are re-solved against it, and the angular fluxes and scattering
sources are rescaled to agree with the corrected moments before the next
outer iteration.  All closures are affine with residuals anchored at the
pass values, so the converged multilevel state solves the same discrete
transport equations as plain source iteration.

When the chord exchange between the materials is strong, the re-solve of a
weakly scattering material reads lag-consistent exchange data: the partner
increment produced by the last coupling cycle is subtracted, so the
correction stage stays transparent to the part of the update the transport
sweep will deliver on its own.  The increment vanishes at convergence and
the fixed point is unchanged.
"""

from dataclasses import dataclass, field

import numpy as np

from .closures import (
    build_ensemble_coefficients,
    build_material_closure,
    build_prolongation_map,
)
from .problem import mixing_probabilities
from .quadrature import NEGATIVE, POSITIVE
from .quasidiffusion import ensemble_boundary, solve_ensemble
from .transport import (
    AngularFlux,
    gauss_seidel_highorder,
    material_moments,
)
from .yvon_mertens import (
    TransitionSources,
    boundary_from_moments,
    ensemble_transition,
    gauss_seidel_pass,
    solution_moments,
    solve_material,
    transition_from_raw_moments,
)

RATIO_FLOOR = 1e-13
RATIO_BAND = 100.0

# chord-exchange loop gain above which the lag-consistent re-solve pays off,
# and the per-chord scattering rate above which a material must keep fully
# fresh exchange data instead
COUPLING_GAIN_THRESHOLD = 0.25
SELF_SCATTER_THRESHOLD = 0.5


def chord_coupling_gain(materials):
    """Loop gain of the material-pair chord exchange per coupling cycle.

    Each factor is the share of one material's removal frequency owed to
    transition into the partner; the product estimates how much of a
    coupling error survives one full Gauss-Seidel cycle.
    """
    gain = 1.0
    for m in materials:
        rate = 1.0 / m.chord
        gain *= rate / (m.sigma_t + rate)
    return gain


def lagged_exchange_flags(materials):
    """Which material re-solves should read lag-consistent exchange data.

    With a strong coupling loop the partner increment from the last sweep
    cycle rides into the ensemble-driven re-solve, and the correction keeps
    chasing an update the next sweep would deliver anyway; subtracting the
    increment makes the re-solve transparent to it.  A material scattering
    about once per chord traversal or more is excluded: its correction
    arrives through its own scattering source, and damping the exchange
    path starves that channel.  Both variants agree at the fixed point,
    where the increment is zero.
    """
    if chord_coupling_gain(materials) <= COUPLING_GAIN_THRESHOLD:
        return (False, False)
    return tuple(m.sigma_s * m.chord < SELF_SCATTER_THRESHOLD for m in materials)


@dataclass
class IterationOptions:
    """Outer-iteration controls shared by both solvers.

    n_transport_cycles is the number of high-order material sweeps taken
    per outer iteration before the low-order stages run.
    """

    epsilon: float = 1e-10
    max_iterations: int = 200
    n_transport_cycles: int = 1
    rho_window: int = 5


@dataclass
class IterationHistory:
    deltas: list = field(default_factory=list)
    norms: list = field(default_factory=list)
    material_deltas: list = field(default_factory=list)
    converged: bool = False
    iterations: int = 0
    rho: float = float("nan")
    rescale_skips: int = 0

    def ratios(self):
        """Per-iteration error-reduction factors, nan where undefined."""
        out = [float("nan")]
        for i in range(1, len(self.deltas)):
            prev = self.deltas[i - 1]
            out.append(self.deltas[i] / prev if prev > 0.0 else float("nan"))
        return out


@dataclass
class SolveResult:
    """Converged state of either solver.

    phi / phi_hat are the ensemble-averaged full-range scalar flux pair;
    material_phi[l, half] and material_phi_hat[l, half] keep the half-range
    resolution; psi is the final angular flux iterate.
    """

    phi: np.ndarray
    phi_hat: np.ndarray
    current: np.ndarray
    material_phi: np.ndarray
    material_phi_hat: np.ndarray
    psi: AngularFlux
    history: IterationHistory


def estimate_spectral_radius(deltas, window):
    """Geometric mean of the trailing error-reduction ratios.

    The ratio recorded at the stopping step itself is dropped: the final
    update is clipped by the tolerance check and dips below the plateau.
    """
    ratios = [
        deltas[i] / deltas[i - 1]
        for i in range(1, len(deltas))
        if deltas[i - 1] > 0.0
    ]
    if len(ratios) >= 2:
        ratios = ratios[:-1]
    if not ratios:
        return float("nan")
    tail = ratios[-window:]
    return float(np.exp(np.mean(np.log(tail)))) if min(tail) > 0.0 else 0.0


def _safe_ratio(num, den, fallback=1.0):
    """Guarded elementwise num / den for multiplicative corrections.

    Falls back where the denominator is degenerate, the ratio is not
    positive, or it leaves the trust band [1/RATIO_BAND, RATIO_BAND].  A
    huge or sign-flipping factor means the reference moment is passing
    through zero, and scaling by it would destroy the iterate; the
    correction still reaches the next sweep through the moment-level
    scattering sources.
    """
    thr = RATIO_FLOOR * max(1.0, float(np.max(np.abs(den))))
    raw = np.divide(
        num, den, out=np.ones_like(np.asarray(den, dtype=float)), where=np.abs(den) > thr
    )
    ok = np.abs(den) > thr
    ok &= raw > 0.0
    ok &= raw <= RATIO_BAND
    ok &= raw >= 1.0 / RATIO_BAND
    out = np.full(den.shape, float(fallback))
    out[ok] = raw[ok]
    return out, int(np.count_nonzero(~ok))


def run_multilevel(prob, options=None):
    if options is None:
        options = IterationOptions()
    quad = prob.quadrature()
    h = prob.dx
    n = prob.n_cells
    p = prob.p

    psi = AngularFlux.zeros(n, quad.n_per_half)
    phi_scat_bar = np.zeros((2, n))
    phi_scat_hat = np.zeros((2, n))
    phi_prev = np.zeros(n)
    history = IterationHistory()
    lagged = lagged_exchange_flags(prob.materials)

    material_phi = np.zeros((2, 2, n))
    material_phi_hat = np.zeros((2, 2, n))
    phi_hat_ens = np.zeros(n)
    current_ens = np.zeros(n)

    for _ in range(options.max_iterations):
        # level 1: transport cycles with frozen scattering sources
        psi, psi_pre = gauss_seidel_highorder(
            quad,
            prob,
            phi_scat_bar,
            phi_scat_hat,
            psi,
            options.n_transport_cycles,
            return_precycle=True,
        )
        moms = [
            material_moments(quad, psi.bar[l], psi.hat[l], prob.inflow[l])
            for l in (0, 1)
        ]
        closures = [build_material_closure(m) for m in moms]
        boundaries = [boundary_from_moments(m) for m in moms]

        # level 2: half-range material pass
        sol_gs = gauss_seidel_pass(prob.materials, h, closures, boundaries, moms)

        # level 3 data, anchored at the freshly closured half-range state
        moms_gs = [
            solution_moments(closures[l], sol_gs[l], boundaries[l]) for l in (0, 1)
        ]
        co = build_ensemble_coefficients(p, prob.materials, moms_gs)
        c_factors = (closures[0].c_bar, closures[1].c_bar)
        map_down = build_prolongation_map(
            p,
            c_factors,
            phi_bar=np.array([[sol_gs[l].phi_bar[hh] for hh in (0, 1)] for l in (0, 1)]),
            J_bar=np.array([[moms_gs[l].cell_bar[1, hh] for hh in (0, 1)] for l in (0, 1)]),
            phi_hat=np.array([[sol_gs[l].phi_hat[hh] for hh in (0, 1)] for l in (0, 1)]),
            J_hat=np.array([[moms_gs[l].cell_hat[1, hh] for hh in (0, 1)] for l in (0, 1)]),
        )
        eb = ensemble_boundary(p, boundaries)
        sol_qd = solve_ensemble(co, h, eb)
        mapped = map_down.apply(
            sol_qd.phi_bar, sol_qd.J_bar, sol_qd.phi_hat, sol_qd.J_hat
        )

        # ensemble-driven material re-solve, then the final half-range map
        # anchored at its output; a lagged material sees the exchange data
        # with its partner's last sweep increment removed
        kappa, trans = ensemble_transition(
            prob.materials, mapped, co.edd_cell_bar, co.edd_cell_hat
        )
        sol_mod = []
        for l in (0, 1):
            tr = trans
            if lagged[l]:
                # kappa * p[partner] is the partner's weight in the ensemble
                # exchange; it equals this material's own chord frequency
                w = kappa * p[1 - l]
                moms_pre = material_moments(
                    quad, psi_pre.bar[1 - l], psi_pre.hat[1 - l], prob.inflow[1 - l]
                )
                fresh = transition_from_raw_moments(moms[1 - l], w)
                stale = transition_from_raw_moments(moms_pre, w)
                # material 1 already swept against the partner's fresh field,
                # so only its balance rows take the shift; shifting its
                # second-moment rows too overshoots the coupling rate
                if l == 0:
                    k_bar = trans.k_bar - fresh.k_bar + stale.k_bar
                    k_hat = trans.k_hat - fresh.k_hat + stale.k_hat
                else:
                    k_bar = trans.k_bar
                    k_hat = trans.k_hat
                tr = TransitionSources(
                    bar=trans.bar - fresh.bar + stale.bar,
                    hat=trans.hat - fresh.hat + stale.hat,
                    k_bar=k_bar,
                    k_hat=k_hat,
                )
            sol_mod.append(
                solve_material(
                    prob.materials[l], h, closures[l], kappa, boundaries[l], tr
                )
            )
        map_up = build_prolongation_map(
            p,
            c_factors,
            phi_bar=np.array([[sol_mod[l].phi_bar[hh] for hh in (0, 1)] for l in (0, 1)]),
            J_bar=np.array(
                [
                    [closures[l].c_bar[hh](sol_mod[l].phi_bar[hh]) for hh in (0, 1)]
                    for l in (0, 1)
                ]
            ),
            phi_hat=np.array([[sol_mod[l].phi_hat[hh] for hh in (0, 1)] for l in (0, 1)]),
            J_hat=np.array(
                [
                    [closures[l].c_hat[hh](sol_mod[l].phi_hat[hh]) for hh in (0, 1)]
                    for l in (0, 1)
                ]
            ),
        )
        final = map_up.apply(
            sol_qd.phi_bar, sol_qd.J_bar, sol_qd.phi_hat, sol_qd.J_hat
        )

        # prolongation: the next scattering flux is the modified material
        # flux scaled so its mixture sum matches the ensemble answer
        skips = 0
        sum_bar = np.zeros(n)
        for l in (0, 1):
            sum_bar += p[l] * (
                sol_mod[l].phi_bar[POSITIVE] + sol_mod[l].phi_bar[NEGATIVE]
            )
        ratio_full, s0 = _safe_ratio(sol_qd.phi_bar, sum_bar, 1.0)
        skips += s0
        mat_delta = [0.0, 0.0]
        for l in (0, 1):
            new_bar = (
                sol_mod[l].phi_bar[POSITIVE] + sol_mod[l].phi_bar[NEGATIVE]
            ) * ratio_full
            mat_delta[l] = float(np.max(np.abs(new_bar - phi_scat_bar[l])))
            phi_scat_bar[l] = new_bar
            phi_scat_hat[l] = (
                sol_mod[l].phi_hat[POSITIVE] + sol_mod[l].phi_hat[NEGATIVE]
            ) * ratio_full

        # half-range alignment, then one rescale factor per half of psi so
        # its partial fluxes match the aligned low-order values
        for hh in (POSITIVE, NEGATIVE):
            den = p[0] * sol_mod[0].phi_bar[hh] + p[1] * sol_mod[1].phi_bar[hh]
            ratio_half, s1 = _safe_ratio(final.phi_bar[hh], den, 1.0)
            skips += s1
            for l in (0, 1):
                material_phi[l, hh] = sol_mod[l].phi_bar[hh] * ratio_half
                material_phi_hat[l, hh] = sol_mod[l].phi_hat[hh] * ratio_half
                f, s2 = _safe_ratio(
                    material_phi[l, hh], moms[l].cell_bar[0, hh], 1.0
                )
                skips += s2
                psi.bar[l][hh] *= f[:, None]
                psi.hat[l][hh] *= f[:, None]

        phi_ens = sol_qd.phi_bar
        phi_hat_ens = sol_qd.phi_hat
        current_ens = sol_qd.J_bar
        delta = float(np.max(np.abs(phi_ens - phi_prev)))
        norm = float(np.max(np.abs(phi_ens)))
        history.deltas.append(delta)
        history.norms.append(norm)
        history.material_deltas.append(mat_delta)
        history.rescale_skips += skips
        history.iterations += 1
        phi_prev = phi_ens.copy()
        if history.iterations > 1 and delta <= options.epsilon * norm:
            history.converged = True
            break

    history.rho = estimate_spectral_radius(history.deltas, options.rho_window)
    return SolveResult(
        phi=phi_prev,
        phi_hat=phi_hat_ens.copy(),
        current=current_ens.copy(),
        material_phi=material_phi.copy(),
        material_phi_hat=material_phi_hat.copy(),
        psi=psi,
        history=history,
    )
