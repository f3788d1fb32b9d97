"""Moment closures connecting the transport level to the low-order solvers.

Every closure here is affine: value = factor * unknown + residual.  The
factor is a bounded ratio of reference ("pass") moments, falling back to a
physically sensible default wherever the denominator is too small to trust.
The residual is always computed against the same pass moments, so evaluating
the closure at the pass values reproduces the reference numerator exactly no
matter which branch chose the factor.  That keeps the low-order systems
consistent with the transport fixed point while their matrices stay bounded.
"""

from dataclasses import dataclass

import numpy as np

from .quadrature import NEGATIVE, POSITIVE


@dataclass
class AffineClosure:
    factor: np.ndarray
    residual: np.ndarray

    def __call__(self, x):
        return self.factor * x + self.residual


def closure_ratio(num, den, default, lo, hi, rel=1e-13):
    """Affine closure of num against den frozen at the given pass values.

    Elements where |den| <= rel * max|den| (or the whole array when it is
    identically zero) take the default factor; everything else takes num/den
    clipped to [lo, hi].
    """
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    scale = np.max(np.abs(den)) if den.size else 0.0
    if scale > 0.0:
        ok = np.abs(den) > rel * scale
    else:
        ok = np.zeros(den.shape, dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore"):
        raw = np.where(ok, num / np.where(ok, den, 1.0), default)
    factor = np.clip(raw, lo, hi)
    return AffineClosure(factor=factor, residual=num - factor * den)


@dataclass
class MaterialClosure:
    """Half-range closure factors of one material field, indexed [half].

    c_bar / e_bar close the cell-average first and second moments against
    the cell-average density; c_hat / e_hat do the same for the slope
    moments; c_edge / e_edge close the face-trace moments against the
    face-trace density (edge index 0..N).
    """

    c_bar: tuple
    e_bar: tuple
    c_hat: tuple
    e_hat: tuple
    c_edge: tuple
    e_edge: tuple


def build_material_closure(mom):
    cb = mom.cell_bar
    ch = mom.cell_hat
    ep = mom.edge_pos
    en = mom.edge_neg
    return MaterialClosure(
        c_bar=(
            closure_ratio(cb[1, POSITIVE], cb[0, POSITIVE], 0.5, 0.0, 1.0),
            closure_ratio(cb[1, NEGATIVE], cb[0, NEGATIVE], -0.5, -1.0, 0.0),
        ),
        e_bar=(
            closure_ratio(cb[2, POSITIVE], cb[0, POSITIVE], 1 / 3, 0.0, 1.0),
            closure_ratio(cb[2, NEGATIVE], cb[0, NEGATIVE], 1 / 3, 0.0, 1.0),
        ),
        # slope fields change sign, so their ratios are only loosely bounded
        c_hat=(
            closure_ratio(ch[1, POSITIVE], ch[0, POSITIVE], 0.5, -1.0, 1.0),
            closure_ratio(ch[1, NEGATIVE], ch[0, NEGATIVE], -0.5, -1.0, 1.0),
        ),
        e_hat=(
            closure_ratio(ch[2, POSITIVE], ch[0, POSITIVE], 1 / 3, -1.0, 1.0),
            closure_ratio(ch[2, NEGATIVE], ch[0, NEGATIVE], 1 / 3, -1.0, 1.0),
        ),
        c_edge=(
            closure_ratio(ep[1], ep[0], 0.5, 0.0, 1.0),
            closure_ratio(en[1], en[0], -0.5, -1.0, 0.0),
        ),
        e_edge=(
            closure_ratio(ep[2], ep[0], 1 / 3, 0.0, 1.0),
            closure_ratio(en[2], en[0], 1 / 3, 0.0, 1.0),
        ),
    )


@dataclass
class EnsembleCoefficients:
    """Mixture-averaged closure data for the ensemble low-order system.

    Cross-section closures act on the ensemble scalar flux and current;
    st_bar / st_hat are current-weighted total cross sections whose drift
    corrections (eta_bar, eta_hat) absorb whatever a single factor cannot
    represent.  Edge closures chain: the half-range face density is closed
    against the adjacent cell's face trace (f_edge), and face current /
    second moment against that density (c_edge, e_edge).  edd_cell_* feed
    the ensemble-driven per-material solve.
    """

    sa_bar: AffineClosure
    sa_hat: AffineClosure
    st_bar: np.ndarray
    eta_bar: AffineClosure
    st_hat: np.ndarray
    eta_hat: AffineClosure
    edd_bar: AffineClosure
    f_edge: tuple
    c_edge: tuple
    e_edge: tuple
    edd_cell_bar: tuple
    edd_cell_hat: tuple
    q_bar: np.ndarray
    pass_phi_bar: np.ndarray
    pass_phi_hat: np.ndarray
    pass_J_bar: np.ndarray
    pass_J_hat: np.ndarray


def _psum(p, a0, a1):
    return p[0] * a0 + p[1] * a1


def build_ensemble_coefficients(p, materials, moms):
    sig_t = np.array([m.sigma_t for m in materials])
    sig_a = np.array([m.sigma_a for m in materials])
    st_avg = float(_psum(p, sig_t[0], sig_t[1]))
    sa_avg = float(_psum(p, sig_a[0], sig_a[1]))

    def cells(k, comp, half=None):
        # p-weighted sum of one cell moment, full range unless a half is given
        out = []
        for l in range(2):
            arr = moms[l].cell_bar if comp == "bar" else moms[l].cell_hat
            if half is None:
                out.append(arr[k, POSITIVE] + arr[k, NEGATIVE])
            else:
                out.append(arr[k, half])
        return _psum(p, out[0], out[1])

    phi_bar = cells(0, "bar")
    phi_hat = cells(0, "hat")
    J_bar = cells(1, "bar")
    J_hat = cells(1, "hat")
    K_bar = cells(2, "bar")

    sa_bar = closure_ratio(
        _psum(p, sig_a[0] * (moms[0].cell_bar[0, 0] + moms[0].cell_bar[0, 1]),
              sig_a[1] * (moms[1].cell_bar[0, 0] + moms[1].cell_bar[0, 1])),
        phi_bar, sa_avg, sig_a.min(), sig_a.max(),
    )
    sa_hat = closure_ratio(
        _psum(p, sig_a[0] * (moms[0].cell_hat[0, 0] + moms[0].cell_hat[0, 1]),
              sig_a[1] * (moms[1].cell_hat[0, 0] + moms[1].cell_hat[0, 1])),
        phi_hat, sa_avg, sig_a.min(), sig_a.max(),
    )

    def weighted_sigma_t(J_l0, J_l1, J_ens, phi_ens):
        num = _psum(p, sig_t[0] * J_l0, sig_t[1] * J_l1)
        absden = _psum(p, np.abs(J_l0), np.abs(J_l1))
        absnum = _psum(p, sig_t[0] * np.abs(J_l0), sig_t[1] * np.abs(J_l1))
        st = closure_ratio(
            absnum, absden, st_avg, sig_t.min(), sig_t.max()
        ).factor
        eta = closure_ratio(
            num - st * J_ens, phi_ens, 0.0, -sig_t.max(), sig_t.max()
        )
        return st, eta

    Jm = [moms[l].cell_bar[1, POSITIVE] + moms[l].cell_bar[1, NEGATIVE] for l in range(2)]
    Jh = [moms[l].cell_hat[1, POSITIVE] + moms[l].cell_hat[1, NEGATIVE] for l in range(2)]
    st_bar, eta_bar = weighted_sigma_t(Jm[0], Jm[1], J_bar, phi_bar)
    st_hat, eta_hat = weighted_sigma_t(Jh[0], Jh[1], J_hat, phi_hat)

    edd_bar = closure_ratio(K_bar, phi_bar, 1 / 3, 0.0, 1.0)

    # face chains: density against the upwind cell's full-range face trace,
    # then current and second moment against the density
    n_cells = phi_bar.shape[0]
    t_left = np.ones(n_cells + 1)
    t_left[1:] = (phi_bar + phi_hat)  # right-face trace of cell e-1
    t_right = np.ones(n_cells + 1)
    t_right[:n_cells] = (phi_bar - phi_hat)  # left-face trace of cell e
    ep = [_psum(p, moms[0].edge_pos[k], moms[1].edge_pos[k]) for k in range(3)]
    en = [_psum(p, moms[0].edge_neg[k], moms[1].edge_neg[k]) for k in range(3)]
    f_edge = (
        closure_ratio(ep[0], t_left, 0.5, 0.0, 1.0),
        closure_ratio(en[0], t_right, 0.5, 0.0, 1.0),
    )
    c_edge = (
        closure_ratio(ep[1], ep[0], 0.5, 0.0, 1.0),
        closure_ratio(en[1], en[0], -0.5, -1.0, 0.0),
    )
    e_edge = (
        closure_ratio(ep[2], ep[0], 1 / 3, 0.0, 1.0),
        closure_ratio(en[2], en[0], 1 / 3, 0.0, 1.0),
    )

    edd_cell_bar = tuple(
        closure_ratio(cells(2, "bar", h), cells(0, "bar", h), 1 / 3, 0.0, 1.0)
        for h in (POSITIVE, NEGATIVE)
    )
    edd_cell_hat = tuple(
        closure_ratio(cells(2, "hat", h), cells(0, "hat", h), 1 / 3, -1.0, 1.0)
        for h in (POSITIVE, NEGATIVE)
    )

    q_bar = np.full(n_cells, float(_psum(p, materials[0].q, materials[1].q)))
    return EnsembleCoefficients(
        sa_bar=sa_bar,
        sa_hat=sa_hat,
        st_bar=st_bar,
        eta_bar=eta_bar,
        st_hat=st_hat,
        eta_hat=eta_hat,
        edd_bar=edd_bar,
        f_edge=f_edge,
        c_edge=c_edge,
        e_edge=e_edge,
        edd_cell_bar=edd_cell_bar,
        edd_cell_hat=edd_cell_hat,
        q_bar=q_bar,
        pass_phi_bar=phi_bar,
        pass_phi_hat=phi_hat,
        pass_J_bar=J_bar,
        pass_J_hat=J_hat,
    )


@dataclass
class MappedPartials:
    """Ensemble half-range moments recovered from full-range unknowns."""

    phi_bar: np.ndarray  # (2, N), indexed [half]
    J_bar: np.ndarray
    phi_hat: np.ndarray
    J_hat: np.ndarray


@dataclass
class ProlongationMap:
    """Affine recovery of half-range ensemble moments.

    For the positive half the driving combination is J - ctilde_minus * phi,
    which by construction of ctilde removes every negative-half contribution
    from the pass data; beta and gamma rescale it into the half-range density
    and current.  The negative half mirrors this with ctilde_plus.  Slope
    moments reuse the same factors with their own anchoring residuals.
    """

    beta: np.ndarray  # (2, N)
    gamma: np.ndarray
    ctilde: np.ndarray  # (2, N): flux-weighted average of C+ and C-
    r_phi_bar: np.ndarray
    r_J_bar: np.ndarray
    r_phi_hat: np.ndarray
    r_J_hat: np.ndarray

    def apply(self, phi_bar, J_bar, phi_hat, J_hat):
        n = phi_bar.shape[0]
        out = MappedPartials(
            phi_bar=np.empty((2, n)),
            J_bar=np.empty((2, n)),
            phi_hat=np.empty((2, n)),
            J_hat=np.empty((2, n)),
        )
        for half, opp in ((POSITIVE, NEGATIVE), (NEGATIVE, POSITIVE)):
            u_bar = J_bar - self.ctilde[opp] * phi_bar
            u_hat = J_hat - self.ctilde[opp] * phi_hat
            out.phi_bar[half] = self.beta[half] * u_bar + self.r_phi_bar[half]
            out.J_bar[half] = self.gamma[half] * u_bar + self.r_J_bar[half]
            out.phi_hat[half] = self.beta[half] * u_hat + self.r_phi_hat[half]
            out.J_hat[half] = self.gamma[half] * u_hat + self.r_J_hat[half]
        return out


def build_prolongation_map(p, c_factors, phi_bar, J_bar, phi_hat, J_hat):
    """Factors and residuals anchored at per-material pass moments.

    c_factors[l][half] are the cell closure factors of each material;
    phi_bar[l, half, i] etc. are the pass half-range moments.  The residuals
    make apply() exact when later fed the pass values' full-range sums.
    """
    n_cells = phi_bar.shape[2]
    C = np.array([[c_factors[l][h].factor for h in range(2)] for l in range(2)])
    phi_ens = np.zeros(n_cells)
    for l in range(2):
        phi_ens += p[l] * (phi_bar[l, POSITIVE] + phi_bar[l, NEGATIVE])

    beta = np.empty((2, n_cells))
    gamma = np.empty((2, n_cells))
    ctilde = np.empty((2, n_cells))
    for half, opp in ((POSITIVE, NEGATIVE), (NEGATIVE, POSITIVE)):
        halfsum = np.zeros(n_cells)
        diffsum = np.zeros(n_cells)
        cursum = np.zeros(n_cells)
        csum = np.zeros(n_cells)
        for l in range(2):
            ph = phi_bar[l, half]
            halfsum += p[l] * ph
            diffsum += p[l] * (C[l, half] - C[l, opp]) * ph
            cursum += p[l] * C[l, half] * ph
            csum += p[l] * C[l, half] * (phi_bar[l, POSITIVE] + phi_bar[l, NEGATIVE])
        sgn = 1.0 if half == POSITIVE else -1.0
        beta[half] = closure_ratio(
            halfsum, diffsum, sgn, min(0.0, sgn * 1e6), max(0.0, sgn * 1e6)
        ).factor
        gamma[half] = closure_ratio(cursum, diffsum, 0.5, -1e6, 1e6).factor
        ctilde[half] = closure_ratio(
            csum, phi_ens, sgn * 0.5, min(0.0, sgn), max(0.0, sgn)
        ).factor

    # anchoring: full-range pass sums drive the map back to its half sums
    ens = {}
    for name, arr in (("pb", phi_bar), ("jb", J_bar), ("ph", phi_hat), ("jh", J_hat)):
        ens[name] = sum(
            p[l] * (arr[l, POSITIVE] + arr[l, NEGATIVE]) for l in range(2)
        )
    r_phi_bar = np.empty((2, n_cells))
    r_J_bar = np.empty((2, n_cells))
    r_phi_hat = np.empty((2, n_cells))
    r_J_hat = np.empty((2, n_cells))
    for half, opp in ((POSITIVE, NEGATIVE), (NEGATIVE, POSITIVE)):
        u_bar = ens["jb"] - ctilde[opp] * ens["pb"]
        u_hat = ens["jh"] - ctilde[opp] * ens["ph"]
        halfsum = sum(p[l] * phi_bar[l, half] for l in range(2))
        cursum = sum(p[l] * J_bar[l, half] for l in range(2))
        r_phi_bar[half] = halfsum - beta[half] * u_bar
        r_J_bar[half] = cursum - gamma[half] * u_bar
        r_phi_hat[half] = (
            sum(p[l] * phi_hat[l, half] for l in range(2)) - beta[half] * u_hat
        )
        r_J_hat[half] = (
            sum(p[l] * J_hat[l, half] for l in range(2)) - gamma[half] * u_hat
        )
    return ProlongationMap(
        beta=beta,
        gamma=gamma,
        ctilde=ctilde,
        r_phi_bar=r_phi_bar,
        r_J_bar=r_J_bar,
        r_phi_hat=r_phi_hat,
        r_J_hat=r_J_hat,
    )
