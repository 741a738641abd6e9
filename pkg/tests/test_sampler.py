import math

import numpy as np
import pytest
from scipy.stats import chi2

from gibbslab.errors import DomainError, ValidationError
from gibbslab.lattice import ALL_PLUS, FREE, Configuration, cube, rect_window
from gibbslab.potentials import IsingPotential, PottsPotential
from gibbslab.sampler import (
    ChainConfig,
    exact_sample,
    glauber_sweep,
    plus_phase_sampler,
    replica_rng,
    sample_measure,
)
from gibbslab.specification import finite_volume_measure, single_site_kernel


def collect(phi, cfg, emit):
    return [state for _, state in sample_measure(phi, cfg, emit_per_replica=emit)]


def test_beta_zero_sweep_is_iid_uniform():
    phi = IsingPotential(0.0, 1.0, 0.0, 2)
    w = cube(1, 2)
    rng = replica_rng(0, 0)
    state = Configuration(w, (-1,) * 9, FREE)
    sums = np.zeros(9)
    prods = []
    n = 3000
    for _ in range(n):
        state = glauber_sweep(state, phi, rng)
        v = np.array(state.values)
        sums += v
        prods.append(v[0] * v[4])
    means = sums / n
    assert np.all(np.abs(means) < 4 / math.sqrt(n))
    assert abs(np.mean(prods)) < 4 / math.sqrt(n)


def test_deterministic_replay():
    phi = IsingPotential(0.25, 1.0, 0.0, 2)
    w = cube(1, 2)
    for order in ["systematic", "random-site"]:
        a = Configuration(w, (1,) * 9, ALL_PLUS)
        b = Configuration(w, (1,) * 9, ALL_PLUS)
        ra, rb = replica_rng(42, 0), replica_rng(42, 0)
        for _ in range(10):
            a = glauber_sweep(a, phi, ra, order)
            b = glauber_sweep(b, phi, rb, order)
        assert a.values == b.values


def test_sample_measure_deterministic_and_stable_across_replica_count():
    phi = IsingPotential(0.3, 1.0, 0.0, 2)
    cfg3 = ChainConfig(window=cube(1, 2), boundary=FREE, burn_in_sweeps=20,
                       master_seed=7, replica_count=3)
    cfg5 = ChainConfig(window=cube(1, 2), boundary=FREE, burn_in_sweeps=20,
                       master_seed=7, replica_count=5)
    runs3 = {r: s.values for r, s in sample_measure(phi, cfg3, emit_per_replica=1)}
    runs3b = {r: s.values for r, s in sample_measure(phi, cfg3, emit_per_replica=1)}
    runs5 = {r: s.values for r, s in sample_measure(phi, cfg5, emit_per_replica=1)}
    assert runs3 == runs3b
    for r in runs3:
        assert runs3[r] == runs5[r]


def test_detailed_balance_single_site():
    beta = 0.2
    phi = IsingPotential(beta, 1.0, 0.0, 2)
    w = cube(0, 2)
    cond = Configuration(w, (1,), ALL_PLUS)
    kernel = single_site_kernel(phi, (0, 0), cond)
    p_plus = float(kernel.weights[list(kernel.support).index(1.0)])

    cfg = ChainConfig(window=w, boundary=ALL_PLUS, burn_in_sweeps=10,
                      master_seed=3, replica_count=1)
    states = collect(phi, cfg, emit=20000)
    freq = np.mean([s.values[0] == 1 for s in states])
    se = math.sqrt(p_plus * (1 - p_plus) / len(states))
    assert abs(freq - p_plus) < 3 * se


def chi_square_stat(counts, probs, n):
    expected = probs * n
    return float(((counts - expected) ** 2 / expected).sum())


def atom_index_map(mu):
    return {tuple(map(int, row)): i for i, row in enumerate(mu.support)}


@pytest.mark.parametrize("order", ["checkerboard", "systematic"])
def test_stationarity_two_by_two_chi_square(order):
    phi = IsingPotential(0.3, 1.0, 0.0, 2)
    w = rect_window((0, 0), (1, 1))
    mu = finite_volume_measure(phi, w, FREE)
    lookup = atom_index_map(mu)
    cfg = ChainConfig(window=w, boundary=FREE, sweep_order=order,
                      burn_in_sweeps=50, thin_sweeps=5, master_seed=11,
                      replica_count=20)
    emit = 1000 if order == "checkerboard" else 120
    counts = np.zeros(mu.size)
    total = 0
    for _, state in sample_measure(phi, cfg, emit_per_replica=emit):
        counts[lookup[tuple(state.values)]] += 1
        total += 1
    stat = chi_square_stat(counts, mu.weights, total)
    assert stat < chi2.ppf(0.99, mu.size - 1)


def test_exact_sample_point_mass_and_uniform():
    phi = IsingPotential(0.0, 1.0, 0.0, 2)
    w = rect_window((0, 0), (1, 1))
    mu = finite_volume_measure(phi, w, FREE)
    rng = replica_rng(5, 0)

    from gibbslab.specification import FiniteMeasure

    point = FiniteMeasure(mu.support[3:4], np.array([1.0]), window=w)
    for _ in range(10):
        assert exact_sample(point, rng).values == tuple(int(v) for v in mu.support[3])

    two = FiniteMeasure(mu.support[:2], np.array([0.5, 0.5]), window=w)
    n = 4000
    hits = sum(exact_sample(two, rng).values == tuple(int(v) for v in mu.support[0]) for _ in range(n))
    se = math.sqrt(0.25 / n)
    assert abs(hits / n - 0.5) < 3 * se


def test_exact_sample_matches_chain_distribution():
    phi = IsingPotential(0.3, 1.0, 0.0, 2)
    w = rect_window((0, 0), (1, 1))
    mu = finite_volume_measure(phi, w, FREE)
    lookup = atom_index_map(mu)
    rng = replica_rng(9, 0)
    n = 20000
    counts = np.zeros(mu.size)
    for _ in range(n):
        counts[lookup[exact_sample(mu, rng).values]] += 1
    stat = chi_square_stat(counts, mu.weights, n)
    assert stat < chi2.ppf(0.99, mu.size - 1)


def test_plus_phase_ground_state_dominance():
    states = list(plus_phase_sampler(1.5, 2, cube(1, 2), margin=2, master_seed=1,
                                     replica_count=2, emit_per_replica=5,
                                     burn_in_sweeps=60, thin_sweeps=3))
    vals = np.array([s.values for s in states])
    assert vals.mean() > 0.98
    assert states[0].window == cube(1, 2)


def test_plus_phase_margin_requirement():
    with pytest.raises(ValidationError):
        list(plus_phase_sampler(0.5, 2, cube(1, 2), margin=0))
    with pytest.raises(ValidationError):
        list(plus_phase_sampler(0.0, 2, cube(1, 2), margin=1))


def test_checkerboard_engine_requires_box_and_nn():
    phi = IsingPotential(0.3, 1.0, 0.0, 2)
    from gibbslab.lattice import general_window

    bad_window = general_window([(0, 0), (1, 1)])
    cfg = ChainConfig(window=bad_window, boundary=FREE, master_seed=0)
    with pytest.raises(DomainError):
        list(sample_measure(phi, cfg))


def test_potts_chain_emits_valid_colors_and_symmetry():
    phi = PottsPotential(0.8, 1.0, 3, 2)
    w = rect_window((0, 0), (3, 3))
    cfg = ChainConfig(window=w, boundary=FREE, burn_in_sweeps=40, thin_sweeps=2,
                      master_seed=2, replica_count=4)
    vals = []
    for _, state in sample_measure(phi, cfg, emit_per_replica=200):
        v = np.array(state.values)
        assert v.min() >= 1 and v.max() <= 3
        vals.append(v)
    freq = np.bincount(np.concatenate(vals), minlength=4)[1:] / (len(vals) * 16)
    # free boundary is exactly color symmetric
    assert np.all(np.abs(freq - 1 / 3) < 0.02)


def test_chain_config_validation():
    with pytest.raises(ValidationError):
        ChainConfig(window=cube(1, 2), thin_sweeps=0)
    with pytest.raises(ValidationError):
        ChainConfig(window=cube(1, 2), replica_count=0)
    with pytest.raises(ValidationError):
        ChainConfig(window=cube(1, 2), sweep_order="bogus")
    assert ChainConfig(window=cube(2, 2)).resolved_burn_in() == 500


def test_periodic_ring_matches_exact_distribution():
    # exact oracle: 1-D periodic Ising ring of 4 sites, H = -b sum s_i s_{i+1 mod 4}
    import itertools as it

    from gibbslab.lattice import PERIODIC, rect_window

    beta = 0.4
    phi = IsingPotential(beta, 1.0, 0.0, 1)
    w = rect_window((0,), (3,))
    states = list(it.product([-1, 1], repeat=4))
    weights = []
    for s in states:
        h = -beta * sum(s[i] * s[(i + 1) % 4] for i in range(4))
        weights.append(math.exp(-h))
    probs = np.array(weights) / sum(weights)
    lookup = {s: i for i, s in enumerate(states)}

    for order, emit in [("systematic", 150), ("checkerboard", 1200)]:
        cfg = ChainConfig(window=w, boundary=PERIODIC, sweep_order=order,
                          burn_in_sweeps=50, thin_sweeps=4, master_seed=13,
                          replica_count=16)
        counts = np.zeros(16)
        total = 0
        for _, state in sample_measure(phi, cfg, emit_per_replica=emit):
            counts[lookup[state.values]] += 1
            total += 1
        stat = chi_square_stat(counts, probs, total)
        assert stat < chi2.ppf(0.99, 15), (order, stat)


def test_periodic_checkerboard_needs_even_sides():
    from gibbslab.lattice import PERIODIC

    phi = IsingPotential(0.3, 1.0, 0.0, 2)
    cfg = ChainConfig(window=cube(1, 2), boundary=PERIODIC, burn_in_sweeps=5)
    with pytest.raises(DomainError):
        list(sample_measure(phi, cfg))
    # systematic order handles odd periodic boxes
    cfg2 = ChainConfig(window=cube(1, 2), boundary=PERIODIC,
                       sweep_order="systematic", burn_in_sweeps=5, master_seed=1)
    states = collect(phi, cfg2, emit=3)
    assert len(states) == 3


def test_periodic_rejected_by_exact_enumeration():
    from gibbslab.lattice import PERIODIC, rect_window

    phi = IsingPotential(0.3, 1.0, 0.0, 2)
    with pytest.raises(DomainError):
        finite_volume_measure(phi, rect_window((0, 0), (1, 1)), PERIODIC)
