"""Problem definitions: materials, slab, boundary data, benchmark catalog.

A problem is a homogeneous binary Markov mixture on a slab [0, X]: two
materials with constant cross sections and mean chord lengths lambda_l.
The volume fraction of material l is p_l = lambda_l / (lambda_1 + lambda_2).
Angular inflow may be prescribed per material at each boundary; all-zero
inflow is vacuum.
"""

import enum
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .quadrature import build_double_gauss_legendre


@dataclass(frozen=True)
class MaterialSpec:
    """One material: total / scattering cross sections, chord length, source."""

    sigma_t: float
    sigma_s: float
    chord: float
    q: float = 0.0

    def __post_init__(self):
        if not self.sigma_t > 0.0:
            raise ValueError("sigma_t must be positive")
        if self.sigma_s < 0.0 or self.sigma_s > self.sigma_t:
            raise ValueError("sigma_s must lie in [0, sigma_t]")
        if not self.chord > 0.0:
            raise ValueError("chord length must be positive")
        if self.q < 0.0:
            raise ValueError("source must be nonnegative")

    @property
    def sigma_a(self):
        return self.sigma_t - self.sigma_s


def mixing_probabilities(chord_1, chord_2):
    """Volume fractions (p_1, p_2) of a homogeneous Markov mixture."""
    if not (chord_1 > 0.0 and chord_2 > 0.0):
        raise ValueError("chord lengths must be positive")
    total = chord_1 + chord_2
    return chord_1 / total, chord_2 / total


@dataclass(frozen=True)
class ProblemSpec:
    """Complete slab problem: material pair, mesh, quadrature size, inflow.

    inflow[l, side, m] holds the prescribed angular inflow for material l at
    the left (side 0, directions +mu_m) or right (side 1, directions -mu_m)
    boundary.  Values are intensities at the quadrature nodes.
    """

    materials: tuple
    width: float
    n_cells: int
    n_per_half: int = 2
    inflow: np.ndarray | None = None
    name: str = ""

    def __post_init__(self):
        if len(self.materials) != 2:
            raise ValueError("exactly two materials required")
        if not self.width > 0.0:
            raise ValueError("slab width must be positive")
        if self.n_cells < 1:
            raise ValueError("need at least one cell")
        if self.n_per_half < 1:
            raise ValueError("need at least one direction per half")
        if self.inflow is None:
            object.__setattr__(
                self, "inflow", np.zeros((2, 2, self.n_per_half))
            )
        else:
            arr = np.asarray(self.inflow, dtype=float)
            if arr.shape != (2, 2, self.n_per_half):
                raise ValueError(
                    f"inflow must have shape (2, 2, {self.n_per_half})"
                )
            if np.any(arr < 0.0):
                raise ValueError("inflow intensities must be nonnegative")
            object.__setattr__(self, "inflow", arr)

    @property
    def p(self):
        return np.array(
            mixing_probabilities(self.materials[0].chord, self.materials[1].chord)
        )

    @property
    def dx(self):
        return self.width / self.n_cells

    @property
    def cell_centers(self):
        return (np.arange(self.n_cells) + 0.5) * self.dx

    def quadrature(self):
        return build_double_gauss_legendre(self.n_per_half)


class TestId(enum.Enum):
    __test__ = False  # not a pytest class, despite the name

    A1 = "A1"
    A2 = "A2"
    A3 = "A3"
    B1 = "B1"
    B2 = "B2"
    B3 = "B3"
    C1 = "C1"
    C2 = "C2"
    C3 = "C3"
    D1 = "D1"
    D2 = "D2"
    D3 = "D3"


# Benchmark suite: twelve fixed-source mixing configurations on X = 100 with
# vacuum boundaries and unit source in both materials.  Cross sections and
# chord lengths are exact rationals; the products chord * sigma_t below are
# the defining optical parameters of each family.
#
#   family A: chord*sigma_t = (0.1, 1),  chords (99/100, 11/100)
#   family B: chord*sigma_t = (1, 10),   chords (99/10, 11/10)
#   family C: chord*sigma_t = (0.1, 10), chords (101/20, 101/20)
#   family D: chord*sigma_t = (0.01, 1), chords (99/100, 11/10)
#
# Within each family the scattering ratios (c_1, c_2) cycle through
# (0, 1), (1, 0), (0.9, 0.9) for variants 1, 2, 3.
_FAMILY = {
    "A": (Fraction(10, 99), Fraction(100, 11), Fraction(99, 100), Fraction(11, 100)),
    "B": (Fraction(10, 99), Fraction(100, 11), Fraction(99, 10), Fraction(11, 10)),
    "C": (Fraction(2, 101), Fraction(200, 101), Fraction(101, 20), Fraction(101, 20)),
    "D": (Fraction(1, 99), Fraction(10, 11), Fraction(99, 100), Fraction(11, 10)),
}
_VARIANT_C = {
    "1": (Fraction(0), Fraction(1)),
    "2": (Fraction(1), Fraction(0)),
    "3": (Fraction(9, 10), Fraction(9, 10)),
}


def catalog_fractions(test):
    """Exact rational data for one catalog entry.

    Returns a dict with sigma_t, sigma_s, chord (each a pair of Fractions)
    plus q, width.
    """
    test = TestId(test)
    fam, var = test.value[0], test.value[1]
    st1, st2, ch1, ch2 = _FAMILY[fam]
    c1, c2 = _VARIANT_C[var]
    return {
        "sigma_t": (st1, st2),
        "sigma_s": (c1 * st1, c2 * st2),
        "chord": (ch1, ch2),
        "q": (Fraction(1), Fraction(1)),
        "width": Fraction(100),
    }


def build_test(test, n_cells=100, n_per_half=2):
    """Materialize one benchmark problem at the given resolution."""
    test = TestId(test)
    data = catalog_fractions(test)
    mats = tuple(
        MaterialSpec(
            sigma_t=float(data["sigma_t"][l]),
            sigma_s=float(data["sigma_s"][l]),
            chord=float(data["chord"][l]),
            q=float(data["q"][l]),
        )
        for l in range(2)
    )
    return ProblemSpec(
        materials=mats,
        width=float(data["width"]),
        n_cells=n_cells,
        n_per_half=n_per_half,
        name=test.value,
    )
