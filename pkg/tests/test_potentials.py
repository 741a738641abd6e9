import numpy as np
import pytest

from gibbslab.errors import DomainError, ValidationError
from gibbslab.lattice import ALL_PLUS, FREE, Configuration, cube
from gibbslab.potentials import (
    IsingPotential,
    LongRangePairPotential,
    PottsPotential,
    fphi_oscillation_bound,
    interaction_range,
    mean_energy,
    potential_difference_norm,
    triple_norm,
    with_beta,
)


def brute_triple_norm_nn(phi):
    """Enumerate the 1 + 2d terms containing the origin and sum their sup norms."""
    d = phi.dimension
    total = 0.0
    # singleton {0}
    total += max(abs(phi.field_term(s)) for s in phi.alphabet)
    # nearest-neighbor pairs {0, y}
    for off in phi.pair_offsets():
        total += max(
            abs(phi.pair_term(s1, s2, off)) for s1 in phi.alphabet for s2 in phi.alphabet
        )
    return total


def test_triple_norm_ising_examples():
    assert triple_norm(IsingPotential(1.0, 1.0, 0.0, 2)) == pytest.approx(4.0)
    assert triple_norm(IsingPotential(1.0, 1.0, 2.0, 2)) == pytest.approx(6.0)
    assert triple_norm(PottsPotential(1.0, 1.0, 3, 2)) == pytest.approx(4.0)


def test_triple_norm_matches_term_enumeration():
    for phi in [
        IsingPotential(0.7, 1.3, -0.4, 2),
        IsingPotential(0.2, 2.0, 0.0, 3),
        PottsPotential(0.9, 1.5, 5, 2),
    ]:
        assert triple_norm(phi) == pytest.approx(brute_triple_norm_nn(phi), abs=1e-12)


def test_triple_norm_beta_homogeneous():
    base = IsingPotential(1.0, 1.0, 0.5, 2)
    for beta in [0.0, 0.3, 1.7]:
        assert triple_norm(with_beta(base, beta)) == pytest.approx(beta * triple_norm(base))


def test_long_range_triple_norm_and_tail():
    phi = LongRangePairPotential(beta=1.0, dimension=1, truncation_radius=4, amplitude=1.0, decay=2.0)
    # d=1 shell k has 2 sites: truncated sum = 2 * sum_{k<=4} k^-2
    expect = 2 * sum(k**-2.0 for k in range(1, 5))
    assert triple_norm(phi) == pytest.approx(expect)
    # certified tail dominates the true remainder 2 * sum_{k>4} k^-2
    true_tail = 2 * sum(k**-2.0 for k in range(5, 100000))
    assert phi.triple_norm_tail() >= true_tail
    assert interaction_range(phi) == 4
    assert phi.is_truncated()


def test_long_range_divergent_rejected():
    with pytest.raises(ValidationError):
        LongRangePairPotential(beta=1.0, dimension=2, truncation_radius=3, decay=1.5)


def test_long_range_table_must_be_even():
    with pytest.raises(ValidationError):
        LongRangePairPotential(
            beta=1.0, dimension=1, truncation_radius=2,
            decay=None, table=(((1,), 0.5),),
        )
    ok = LongRangePairPotential(
        beta=1.0, dimension=1, truncation_radius=2,
        decay=None, table=(((1,), 0.5), ((-1,), 0.5)),
    )
    assert triple_norm(ok) == pytest.approx(1.0)
    assert ok.triple_norm_tail() == 0.0


def test_mean_energy_examples():
    w = cube(1, 2)
    plus = Configuration(w, (1,) * 9, ALL_PLUS)
    ising = IsingPotential(1.0, 1.0, 0.0, 2)
    assert mean_energy(ising, plus) == pytest.approx(-2.0)
    assert mean_energy(with_beta(ising, 0.0), plus) == 0.0

    potts = PottsPotential(1.0, 1.0, 3, 2)
    ones = Configuration(w, (1,) * 9, FREE)
    assert mean_energy(potts, ones) == pytest.approx(2.0)


def test_mean_energy_needs_neighborhood():
    w = cube(0, 2)
    lone = Configuration(w, (1,), FREE)
    with pytest.raises(DomainError):
        mean_energy(IsingPotential(1.0), lone)


def test_mean_energy_ising_flip_symmetry_h0():
    rng = np.random.default_rng(3)
    w = cube(1, 2)
    phi = IsingPotential(0.8, 1.0, 0.0, 2)
    for _ in range(20):
        vals = rng.choice([-1, 1], size=9)
        c = Configuration(w, tuple(int(v) for v in vals), FREE)
        flipped = Configuration(w, tuple(int(-v) for v in vals), FREE)
        assert mean_energy(phi, c) == pytest.approx(mean_energy(phi, flipped))


def test_mean_energy_single_flip_bounded_by_term_oscillation():
    # |f(w) - f(w')| for a flip at x within range, vs the term-by-term bound
    rng = np.random.default_rng(4)
    w = cube(1, 2)
    phi = IsingPotential(0.6, 1.0, 0.3, 2)
    # flip at origin: bound = field osc + 2d pair osc, each /|A| handled by formula
    bound_origin = 2 * phi.beta * abs(phi.field) + 2 * phi.dimension * phi.beta * abs(phi.coupling)
    for _ in range(30):
        vals = list(rng.choice([-1, 1], size=9))
        c = Configuration(w, tuple(int(v) for v in vals), FREE)
        vals2 = list(vals)
        vals2[w.index_of((0, 0))] *= -1
        c2 = Configuration(w, tuple(int(v) for v in vals2), FREE)
        assert abs(mean_energy(phi, c) - mean_energy(phi, c2)) <= bound_origin + 1e-12


def test_fphi_oscillation_bound():
    assert fphi_oscillation_bound(IsingPotential(1.0, 1.0, 0.0, 2)) == pytest.approx(8.0)
    assert fphi_oscillation_bound(with_beta(IsingPotential(1.0), 0.0)) == 0.0
    assert fphi_oscillation_bound(PottsPotential(1.0, 1.0, 3, 2)) == pytest.approx(8.0)


def test_interaction_range_nearest_neighbor():
    assert interaction_range(IsingPotential(1.0)) == 1
    assert interaction_range(PottsPotential(1.0, 1.0, 9, 2)) == 1


def test_potential_difference_norm():
    a = IsingPotential(0.10, 1.0, 0.0, 2)
    b = IsingPotential(0.15, 1.0, 0.0, 2)
    assert potential_difference_norm(a, b) == pytest.approx(4 * 0.05)
    assert potential_difference_norm(a, a) == 0.0
