"""Ensemble low-order system: oracle match, consistency, balance, order."""

import numpy as np

from bsmt.closures import (
    AffineClosure,
    EnsembleCoefficients,
    build_ensemble_coefficients,
)
from bsmt.problem import mixing_probabilities
from bsmt.quadrature import NEGATIVE, POSITIVE
from bsmt.quasidiffusion import (
    EnsembleBoundary,
    assemble_ensemble,
    edge_currents,
    edge_half_densities,
    ensemble_boundary,
    solve_ensemble,
)
from bsmt.transport import material_moments
from bsmt.yvon_mertens import boundary_from_moments

from oracles import coupled_solution, diffusion_like_system
from test_yvon_mertens import blocks_to_dense, two_material_problem


def isotropic_coefficients(n, sa, st, q, j_res=None, k_res_pos=None, k_res_neg=None):
    """Constant isotropic ensemble coefficients.

    j_res adds equal residuals to both half-range face current closures;
    the k_res pair adds (opposite-signed) residuals to the face second
    moment closures.  Defaults are all zero.
    """

    def const(v, m, res=None):
        r = np.zeros(m) if res is None else np.asarray(res, dtype=float)
        return AffineClosure(factor=np.full(m, float(v)), residual=r)

    e = n + 1
    return EnsembleCoefficients(
        sa_bar=const(sa, n),
        sa_hat=const(sa, n),
        st_bar=np.full(n, float(st)),
        eta_bar=const(0.0, n),
        st_hat=np.full(n, float(st)),
        eta_hat=const(0.0, n),
        edd_bar=const(1.0 / 3.0, n),
        f_edge=(const(0.5, e), const(0.5, e)),
        c_edge=(const(0.5, e, j_res), const(-0.5, e, j_res)),
        e_edge=(const(1.0 / 3.0, e, k_res_pos), const(1.0 / 3.0, e, k_res_neg)),
        edd_cell_bar=(const(1.0 / 3.0, n), const(1.0 / 3.0, n)),
        edd_cell_hat=(const(1.0 / 3.0, n), const(1.0 / 3.0, n)),
        q_bar=np.full(n, float(q)),
        pass_phi_bar=np.zeros(n),
        pass_phi_hat=np.zeros(n),
        pass_J_bar=np.zeros(n),
        pass_J_hat=np.zeros(n),
    )


def test_isotropic_assembly_matches_independent_dense_oracle():
    rng = np.random.default_rng(17)
    n, h = 10, 0.45
    sa, st, q = 0.3, 1.2, 0.8
    jp, kp, jn, kn = 0.4, 0.2, -0.35, 0.18
    extra = rng.standard_normal((n, 4))
    co = isotropic_coefficients(n, sa, st, q)
    boundary = EnsembleBoundary(J_pos=jp, K_pos=kp, J_neg=jn, K_neg=kn)
    L, D, U, rhs = assemble_ensemble(co, h, boundary, extra_rhs=extra)
    A_pkg, b_pkg = blocks_to_dense(L, D, U, rhs)
    A_ora, b_ora = diffusion_like_system(n, h, sa, st, q, jp, kp, jn, kn, extra=extra)
    np.testing.assert_allclose(A_pkg, A_ora, atol=1e-13)
    np.testing.assert_allclose(b_pkg, b_ora, atol=1e-13)
    sol = solve_ensemble(co, h, boundary, extra_rhs=extra)
    x_ora = np.linalg.solve(A_ora, b_ora).reshape(n, 4)
    np.testing.assert_allclose(sol.phi_bar, x_ora[:, 0], atol=1e-12)
    np.testing.assert_allclose(sol.J_bar, x_ora[:, 2], atol=1e-12)


def test_infinite_medium_flux_is_source_over_absorption():
    n, h = 30, 0.4
    sa, st, q = 0.5, 1.4, 0.9
    phi = q / sa
    co = isotropic_coefficients(n, sa, st, q)
    boundary = EnsembleBoundary(
        J_pos=phi / 4.0, K_pos=phi / 6.0, J_neg=-phi / 4.0, K_neg=phi / 6.0
    )
    sol = solve_ensemble(co, h, boundary)
    np.testing.assert_allclose(sol.phi_bar, phi, atol=1e-12)
    assert np.max(np.abs(sol.phi_hat)) < 1e-12
    assert np.max(np.abs(sol.J_bar)) < 1e-12
    assert np.max(np.abs(sol.J_hat)) < 1e-12


def ensemble_state(seed=3, n_cells=8):
    prob = two_material_problem(seed=seed, n_cells=n_cells)
    quad = prob.quadrature()
    bar, hat = coupled_solution(prob, quad)
    moms = [
        material_moments(quad, bar[l], hat[l], prob.inflow[l]) for l in (0, 1)
    ]
    p = mixing_probabilities(prob.materials[0].chord, prob.materials[1].chord)
    co = build_ensemble_coefficients(p, prob.materials, moms)
    bounds = [boundary_from_moments(m) for m in moms]
    eb = ensemble_boundary(p, bounds)
    return prob, p, moms, co, eb


def test_solution_reproduces_ensemble_transport_moments():
    # the assembled rows are mixture averages of the per-direction balance
    # rows, so the ensemble moments of the transport answer solve them
    prob, p, moms, co, eb = ensemble_state(seed=3)
    sol = solve_ensemble(co, prob.dx, eb)
    scale = max(1.0, float(np.max(np.abs(co.pass_phi_bar))))
    assert np.max(np.abs(sol.phi_bar - co.pass_phi_bar)) <= 1e-11 * scale
    assert np.max(np.abs(sol.phi_hat - co.pass_phi_hat)) <= 1e-11 * scale
    assert np.max(np.abs(sol.J_bar - co.pass_J_bar)) <= 1e-11 * scale
    assert np.max(np.abs(sol.J_hat - co.pass_J_hat)) <= 1e-11 * scale

    j = edge_currents(co, eb, sol)
    j_pass = np.zeros(prob.n_cells + 1)
    for l in (0, 1):
        j_pass += p[l] * (moms[l].edge_pos[1] + moms[l].edge_neg[1])
    assert np.max(np.abs(j - j_pass)) <= 1e-11 * scale


def test_fixed_point_many_random_problems():
    for seed in range(20):
        prob, p, moms, co, eb = ensemble_state(seed=300 + seed, n_cells=6)
        sol = solve_ensemble(co, prob.dx, eb)
        scale = max(1.0, float(np.max(np.abs(co.pass_phi_bar))))
        err = max(
            np.max(np.abs(sol.phi_bar - co.pass_phi_bar)),
            np.max(np.abs(sol.phi_hat - co.pass_phi_hat)),
            np.max(np.abs(sol.J_bar - co.pass_J_bar)),
            np.max(np.abs(sol.J_hat - co.pass_J_hat)),
        )
        assert err <= 1e-10 * scale, f"seed {seed}: err {err:.3e}"


def test_per_cell_particle_balance_holds_at_round_off():
    prob, p, moms, co, eb = ensemble_state(seed=9)
    sol = solve_ensemble(co, prob.dx, eb)
    j = edge_currents(co, eb, sol)
    balance = (j[1:] - j[:-1]) / prob.dx + co.sa_bar(sol.phi_bar) - co.q_bar
    assert np.max(np.abs(balance)) <= 1e-12 * max(1.0, np.max(np.abs(co.q_bar)))


def test_boundary_rows_have_robin_form():
    # left face: J(0) = C_neg * (phi_face(0) - phi_in) + J_in, and mirrored
    # on the right, with the affine face closures supplying the constants
    prob, p, moms, co, eb = ensemble_state(seed=12)
    sol = solve_ensemble(co, prob.dx, eb)
    j = edge_currents(co, eb, sol)
    pos, neg = edge_half_densities(co, eb, sol)
    n = prob.n_cells
    left = eb.J_pos + co.c_edge[1].factor[0] * neg[0] + co.c_edge[1].residual[0]
    right = eb.J_neg + co.c_edge[0].factor[n] * pos[n] + co.c_edge[0].residual[n]
    phi_face_0 = eb.phi_pos + neg[0]
    phi_face_n = eb.phi_neg + pos[n]
    assert abs(j[0] - left) <= 1e-12
    assert abs(j[n] - right) <= 1e-12
    # the same identity written against the face scalar flux
    lhs0 = j[0] - eb.J_pos - co.c_edge[1].residual[0]
    assert abs(lhs0 - co.c_edge[1].factor[0] * (phi_face_0 - eb.phi_pos)) <= 1e-12
    lhsn = j[n] - eb.J_neg - co.c_edge[0].residual[n]
    assert abs(lhsn - co.c_edge[0].factor[n] * (phi_face_n - eb.phi_neg)) <= 1e-12


def manufactured_case(n):
    """Quadratic flux, linear current, isotropic factors.

    The linear-current anisotropy rides in the face closure residuals; all
    factors stay constant.  Sources come from the continuum moment
    equations, cell-averaged exactly; the slope rows get the manufactured
    residuals of their own discrete form.
    """
    width = 2.0
    sa, st = 0.7, 1.0
    a, b, c = 2.0, 0.5, -0.1
    d, e = 0.3, -0.15

    def phi(x):
        return a + b * x + c * x * x

    def cur(x):
        return d + e * x

    h = width / n
    edges = np.linspace(0.0, width, n + 1)
    centers = 0.5 * (edges[:-1] + edges[1:])

    j_res = 0.5 * cur(edges)
    k_res_pos = 0.375 * cur(edges)
    k_res_neg = -0.375 * cur(edges)
    co = isotropic_coefficients(
        n, sa, st, 0.0, j_res=j_res, k_res_pos=k_res_pos, k_res_neg=k_res_neg
    )

    # exact cell averages via antiderivative differences
    def avg(f_int):
        return (f_int(edges[1:]) - f_int(edges[:-1])) / h

    phi_int = lambda x: a * x + b * x * x / 2.0 + c * x**3 / 3.0
    phi_avg = avg(phi_int)
    cur_avg = avg(lambda x: d * x + e * x * x / 2.0)
    # balance source: dJ/dx + sa * phi
    co.q_bar[:] = e + sa * phi_avg
    phi_hat_man = 0.5 * h * (b + 2.0 * c * centers)
    J_hat_man = 0.5 * h * e
    extra = np.zeros((n, 4))
    extra[:, 1] = sa * phi_hat_man
    # first-moment source: d(phi/3)/dx + st * J
    extra[:, 2] = (phi(edges[1:]) - phi(edges[:-1])) / (3.0 * h) + st * cur_avg
    extra[:, 3] = c * h / 3.0 + st * J_hat_man
    boundary = EnsembleBoundary(
        J_pos=0.25 * phi(0.0) + 0.5 * cur(0.0),
        K_pos=phi(0.0) / 6.0 + 0.375 * cur(0.0),
        J_neg=-0.25 * phi(width) + 0.5 * cur(width),
        K_neg=phi(width) / 6.0 - 0.375 * cur(width),
    )
    sol = solve_ensemble(co, h, boundary, extra_rhs=extra)
    err_phi = np.max(np.abs(sol.phi_bar - phi_avg))
    err_J = np.max(np.abs(sol.J_bar - cur_avg))
    return err_phi, err_J


def test_manufactured_solution_converges_at_second_order():
    errs = [manufactured_case(n) for n in (16, 32, 64)]
    for k in (0, 1):
        r1 = np.log2(errs[0][k] / errs[1][k])
        r2 = np.log2(errs[1][k] / errs[2][k])
        assert r1 >= 1.9, f"component {k}: first ratio {r1:.2f}"
        assert r2 >= 1.9, f"component {k}: second ratio {r2:.2f}"
