"""Half-range moment system: dense-oracle match and consistency checks."""

import numpy as np
import pytest

from bsmt.closures import (
    AffineClosure,
    MaterialClosure,
    build_material_closure,
    closure_ratio,
)
from bsmt.problem import MaterialSpec, ProblemSpec, mixing_probabilities
from bsmt.quadrature import NEGATIVE, POSITIVE, build_double_gauss_legendre
from bsmt.transport import material_moments
from bsmt.yvon_mertens import (
    BoundaryMoments,
    HalfRangeSolution,
    TransitionSources,
    assemble_material,
    boundary_from_moments,
    ensemble_driven_solve,
    gauss_seidel_pass,
    solution_moments,
    solve_material,
    transition_from_solution,
)
from bsmt._blocktri import block_tridiagonal_residual, solve_block_tridiagonal

from oracles import coupled_solution, dp1_system


def isotropic_closure(n):
    """Constant isotropic factors with zero residuals."""

    def const(v, m):
        return AffineClosure(factor=np.full(m, v), residual=np.zeros(m))

    return MaterialClosure(
        c_bar=(const(0.5, n), const(-0.5, n)),
        e_bar=(const(1.0 / 3.0, n), const(1.0 / 3.0, n)),
        c_hat=(const(0.5, n), const(-0.5, n)),
        e_hat=(const(1.0 / 3.0, n), const(1.0 / 3.0, n)),
        c_edge=(const(0.5, n + 1), const(-0.5, n + 1)),
        e_edge=(const(1.0 / 3.0, n + 1), const(1.0 / 3.0, n + 1)),
    )


def blocks_to_dense(L, D, U, rhs):
    n = D.shape[0]
    A = np.zeros((4 * n, 4 * n))
    for i in range(n):
        A[4 * i : 4 * i + 4, 4 * i : 4 * i + 4] = D[i]
        if i > 0:
            A[4 * i : 4 * i + 4, 4 * (i - 1) : 4 * i] = L[i]
        if i + 1 < n:
            A[4 * i : 4 * i + 4, 4 * (i + 1) : 4 * (i + 2)] = U[i]
    return A, rhs.reshape(-1)


def two_material_problem(seed=0, n_cells=8, width=4.0):
    rng = np.random.default_rng(seed)
    mats = []
    for _ in range(2):
        st = rng.uniform(0.3, 2.0)
        mats.append(
            MaterialSpec(
                sigma_t=st,
                sigma_s=st * rng.uniform(0.0, 0.9),
                chord=rng.uniform(0.5, 4.0),
                q=rng.uniform(0.2, 1.0),
            )
        )
    inflow = rng.uniform(0.0, 1.0, size=(2, 2, 2))
    return ProblemSpec(
        materials=tuple(mats),
        width=width,
        n_cells=n_cells,
        n_per_half=2,
        inflow=inflow,
    )


def transport_state(prob):
    """Dense coupled transport answer plus its per-material moment bundles."""
    quad = prob.quadrature()
    bar, hat = coupled_solution(prob, quad)
    moms = [
        material_moments(quad, bar[l], hat[l], prob.inflow[l]) for l in (0, 1)
    ]
    return quad, bar, hat, moms


def test_isotropic_assembly_matches_dense_oracle():
    rng = np.random.default_rng(11)
    n, h = 10, 0.37
    sa, st = 0.4, 1.3
    kappa = 0.8
    q = 0.9
    trans_rows = rng.standard_normal((n, 4))
    jp, kp = 0.6, 0.3
    jn, kn = -0.5, 0.25
    mat = MaterialSpec(sigma_t=st, sigma_s=st - sa, chord=1.0, q=q)
    closure = isotropic_closure(n)
    trans = TransitionSources(
        bar=trans_rows[:, 0],
        hat=trans_rows[:, 1],
        k_bar=trans_rows[:, 2],
        k_hat=trans_rows[:, 3],
    )
    boundary = BoundaryMoments(J_pos=jp, K_pos=kp, J_neg=jn, K_neg=kn)
    L, D, U, rhs = assemble_material(mat, h, closure, kappa, boundary, trans, q=q)
    A_pkg, b_pkg = blocks_to_dense(L, D, U, rhs)
    A_ora, b_ora = dp1_system(n, h, sa, st, kappa, q, trans_rows, jp, kp, jn, kn)
    np.testing.assert_allclose(A_pkg, A_ora, atol=1e-13)
    np.testing.assert_allclose(b_pkg, b_ora, atol=1e-13)
    x_pkg = solve_block_tridiagonal(L, D, U, rhs).reshape(-1)
    x_ora = np.linalg.solve(A_ora, b_ora)
    np.testing.assert_allclose(x_pkg, x_ora, atol=1e-12)


def test_pure_absorber_interior_reaches_infinite_medium_level():
    # uniform source, absorption-only, inflow set to the infinite-medium
    # half-range moments: the uniform state solves the system exactly
    n, h = 40, 0.5
    mat = MaterialSpec(sigma_t=1.0, sigma_s=0.0, chord=1.0, q=1.0)
    closure = isotropic_closure(n)
    phi_half = mat.q / (2.0 * mat.sigma_a)
    boundary = BoundaryMoments(
        J_pos=0.5 * phi_half,
        K_pos=phi_half / 3.0,
        J_neg=-0.5 * phi_half,
        K_neg=phi_half / 3.0,
    )
    sol = solve_material(
        mat, h, closure, 0.0, boundary, TransitionSources.zeros(n)
    )
    mid = slice(n // 3, 2 * n // 3)
    assert np.all(np.abs(sol.phi_bar[:, mid] - phi_half) <= 0.01 * phi_half)
    # the discrete solution is in fact uniform to round-off
    assert np.max(np.abs(sol.phi_bar - phi_half)) < 1e-10
    assert np.max(np.abs(sol.phi_hat)) < 1e-10


def test_gauss_seidel_pass_reproduces_transport_moments():
    prob = two_material_problem(seed=3)
    quad, bar, hat, moms = transport_state(prob)
    closures = [build_material_closure(m) for m in moms]
    boundaries = [boundary_from_moments(m) for m in moms]
    sol0, sol1 = gauss_seidel_pass(
        prob.materials, prob.dx, closures, boundaries, moms
    )
    for sol, mom in ((sol0, moms[0]), (sol1, moms[1])):
        scale = max(1.0, np.max(np.abs(mom.cell_bar[0])))
        assert np.max(np.abs(sol.phi_bar - mom.cell_bar[0])) <= 1e-11 * scale
        assert np.max(np.abs(sol.phi_hat - mom.cell_hat[0])) <= 1e-11 * scale


def test_transport_moments_satisfy_material_rows():
    # residual-level variant of the fixed-point check, localizes assembly bugs
    prob = two_material_problem(seed=5)
    quad, bar, hat, moms = transport_state(prob)
    closures = [build_material_closure(m) for m in moms]
    boundaries = [boundary_from_moments(m) for m in moms]
    from bsmt.yvon_mertens import transition_from_raw_moments

    for l, other in ((0, 1), (1, 0)):
        mat = prob.materials[l]
        trans = transition_from_raw_moments(moms[other], 1.0 / mat.chord)
        L, D, U, rhs = assemble_material(
            mat, prob.dx, closures[l], 1.0 / mat.chord, boundaries[l], trans
        )
        x = HalfRangeSolution(
            phi_bar=moms[l].cell_bar[0], phi_hat=moms[l].cell_hat[0]
        ).as_vector()
        res = block_tridiagonal_residual(L, D, U, rhs, x)
        scale = max(1.0, np.max(np.abs(rhs)))
        assert np.max(np.abs(res)) <= 1e-12 * scale


def test_gauss_seidel_pass_fixed_point_many_random_problems():
    for seed in range(25):
        prob = two_material_problem(seed=100 + seed, n_cells=6, width=3.0)
        quad, bar, hat, moms = transport_state(prob)
        closures = [build_material_closure(m) for m in moms]
        boundaries = [boundary_from_moments(m) for m in moms]
        sol0, sol1 = gauss_seidel_pass(
            prob.materials, prob.dx, closures, boundaries, moms
        )
        for sol, mom in ((sol0, moms[0]), (sol1, moms[1])):
            scale = max(1.0, np.max(np.abs(mom.cell_bar[0])))
            err = max(
                np.max(np.abs(sol.phi_bar - mom.cell_bar[0])),
                np.max(np.abs(sol.phi_hat - mom.cell_hat[0])),
            )
            assert err <= 1e-10 * scale, f"seed {seed}: err {err:.3e}"


def coupled_half_range_solution(prob, closures, boundaries):
    """Dense solve of the two-material system with live exchange coupling."""
    n = prob.n_cells
    h = prob.dx
    empty = TransitionSources.zeros(n)
    size = 8 * n
    A = np.zeros((size, size))
    b = np.zeros(size)
    for l, other in ((0, 1), (1, 0)):
        mat = prob.materials[l]
        L, D, U, rhs = assemble_material(
            mat, h, closures[l], 1.0 / mat.chord, boundaries[l], empty
        )
        Ad, bd = blocks_to_dense(L, D, U, rhs)
        sl = slice(4 * n * l, 4 * n * (l + 1))
        A[sl, sl] = Ad
        b[sl] += bd
        # exchange: own row picks up the other material's closured moments
        rate = 1.0 / mat.chord
        off = 4 * n * other
        co = closures[other]
        pairs = [
            (0, co.c_bar, 0, 2),
            (1, co.c_hat, 1, 3),
            (2, co.e_bar, 0, 2),
            (3, co.e_hat, 1, 3),
        ]
        for i in range(n):
            for row, cl, cp, cn in pairs:
                r = 4 * n * l + 4 * i + row
                A[r, off + 4 * i + cp] -= rate * cl[POSITIVE].factor[i]
                A[r, off + 4 * i + cn] += rate * cl[NEGATIVE].factor[i]
                b[r] += rate * (cl[POSITIVE].residual[i] - cl[NEGATIVE].residual[i])
    x = np.linalg.solve(A, b)
    return [
        HalfRangeSolution.from_vector(x[4 * n * l : 4 * n * (l + 1)].reshape(n, 4))
        for l in (0, 1)
    ]


def test_ensemble_driven_solve_keeps_coupled_solution_fixed():
    # feeding the ensemble system data assembled from the coupled two-material
    # answer must hand the same answer back
    prob = two_material_problem(seed=8)
    quad, bar, hat, moms = transport_state(prob)
    closures = [build_material_closure(m) for m in moms]
    boundaries = [boundary_from_moments(m) for m in moms]
    sols = coupled_half_range_solution(prob, closures, boundaries)
    p = mixing_probabilities(prob.materials[0].chord, prob.materials[1].chord)

    phi_bar = np.zeros((2, prob.n_cells))
    phi_hat = np.zeros((2, prob.n_cells))
    J_bar = np.zeros((2, prob.n_cells))
    J_hat = np.zeros((2, prob.n_cells))
    K_bar = np.zeros((2, prob.n_cells))
    K_hat = np.zeros((2, prob.n_cells))
    for l in (0, 1):
        for half in (POSITIVE, NEGATIVE):
            phi_bar[half] += p[l] * sols[l].phi_bar[half]
            phi_hat[half] += p[l] * sols[l].phi_hat[half]
            J_bar[half] += p[l] * closures[l].c_bar[half](sols[l].phi_bar[half])
            J_hat[half] += p[l] * closures[l].c_hat[half](sols[l].phi_hat[half])
            K_bar[half] += p[l] * closures[l].e_bar[half](sols[l].phi_bar[half])
            K_hat[half] += p[l] * closures[l].e_hat[half](sols[l].phi_hat[half])

    from bsmt.closures import MappedPartials

    mapped = MappedPartials(
        phi_bar=phi_bar, J_bar=J_bar, phi_hat=phi_hat, J_hat=J_hat
    )
    edd_bar = tuple(
        closure_ratio(K_bar[hh], phi_bar[hh], 1.0 / 3.0, 0.0, 1.0)
        for hh in (POSITIVE, NEGATIVE)
    )
    edd_hat = tuple(
        closure_ratio(K_hat[hh], phi_hat[hh], 1.0 / 3.0, -1.0, 1.0)
        for hh in (POSITIVE, NEGATIVE)
    )
    out = ensemble_driven_solve(
        prob.materials, prob.dx, closures, boundaries, mapped, edd_bar, edd_hat
    )
    for l in (0, 1):
        scale = max(1.0, np.max(np.abs(sols[l].phi_bar)))
        assert np.max(np.abs(out[l].phi_bar - sols[l].phi_bar)) <= 1e-11 * scale
        assert np.max(np.abs(out[l].phi_hat - sols[l].phi_hat)) <= 1e-11 * scale


def test_identical_materials_same_data_give_identical_fields():
    prob = two_material_problem(seed=13)
    mat = MaterialSpec(sigma_t=1.1, sigma_s=0.6, chord=1.5, q=0.7)
    prob = ProblemSpec(
        materials=(mat, mat),
        width=prob.width,
        n_cells=prob.n_cells,
        n_per_half=2,
        inflow=np.broadcast_to(prob.inflow[0], (2, 2, 2)).copy(),
    )
    quad, bar, hat, moms = transport_state(prob)
    closures = [build_material_closure(m) for m in moms]
    boundaries = [boundary_from_moments(m) for m in moms]
    sol0, sol1 = gauss_seidel_pass(
        prob.materials, prob.dx, closures, boundaries, moms
    )
    np.testing.assert_allclose(sol0.phi_bar, sol1.phi_bar, atol=1e-11)
    np.testing.assert_allclose(sol0.phi_hat, sol1.phi_hat, atol=1e-11)


def test_solution_moments_round_trip():
    prob = two_material_problem(seed=21)
    quad, bar, hat, moms = transport_state(prob)
    closures = [build_material_closure(m) for m in moms]
    boundaries = [boundary_from_moments(m) for m in moms]
    sol = HalfRangeSolution(
        phi_bar=moms[0].cell_bar[0].copy(), phi_hat=moms[0].cell_hat[0].copy()
    )
    built = solution_moments(closures[0], sol, boundaries[0])
    # closured moments of the pass state are the raw pass moments
    np.testing.assert_allclose(built.cell_bar, moms[0].cell_bar, atol=1e-12)
    np.testing.assert_allclose(built.cell_hat, moms[0].cell_hat, atol=1e-12)
    np.testing.assert_allclose(built.edge_pos, moms[0].edge_pos, atol=1e-12)
    np.testing.assert_allclose(built.edge_neg, moms[0].edge_neg, atol=1e-12)


def test_singular_block_names_the_cell():
    n = 4

    def const(v, m):
        return AffineClosure(factor=np.full(m, v), residual=np.zeros(m))

    dead = MaterialClosure(
        c_bar=(const(0.0, n), const(0.0, n)),
        e_bar=(const(0.0, n), const(0.0, n)),
        c_hat=(const(0.0, n), const(0.0, n)),
        e_hat=(const(0.0, n), const(0.0, n)),
        c_edge=(const(0.0, n + 1), const(0.0, n + 1)),
        e_edge=(const(0.0, n + 1), const(0.0, n + 1)),
    )
    mat = MaterialSpec(sigma_t=1.0, sigma_s=1.0, chord=1.0, q=0.0)
    boundary = BoundaryMoments(0.0, 0.0, 0.0, 0.0)
    with pytest.raises(np.linalg.LinAlgError, match="cell 0"):
        solve_material(
            mat, 1.0, dead, 0.0, boundary, TransitionSources.zeros(n)
        )
