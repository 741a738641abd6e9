import itertools
import math

import numpy as np
import pytest
from scipy.optimize import linprog

from gibbslab.errors import DomainError, SizeError
from gibbslab.lattice import FREE, Configuration, cube
from gibbslab.potentials import IsingPotential
from gibbslab.specification import FiniteMeasure, finite_volume_measure
from gibbslab.transport import (
    config_distance_matrix,
    dbar_hamming,
    discretize_gaussian,
    empirical_measure,
    fatten,
    kantorovich_config,
    kantorovich_real,
    min_cost_transport,
    real_measure,
)


def transport_lp_oracle(a, b, cost):
    """Independent LP oracle (HiGHS) for the transportation optimum."""
    n, m = cost.shape
    A_eq = []
    b_eq = []
    for i in range(n):
        row = np.zeros(n * m)
        row[i * m : (i + 1) * m] = 1.0
        A_eq.append(row)
        b_eq.append(a[i])
    for j in range(m):
        row = np.zeros(n * m)
        row[j::m] = 1.0
        A_eq.append(row)
        b_eq.append(b[j])
    res = linprog(cost.ravel(), A_eq=np.array(A_eq), b_eq=np.array(b_eq), method="highs")
    assert res.success
    return res.fun


def coupling_vertex_oracle(a, b, cost):
    """Enumerate basic feasible couplings of tiny transportation polytopes."""
    n, m = cost.shape
    best = math.inf
    edges = list(itertools.product(range(n), range(m)))
    for basis in itertools.combinations(edges, n + m - 1):
        flow = np.zeros((n, m))
        # solve the tree system by elimination
        rem_a = np.array(a, float)
        rem_b = np.array(b, float)
        chosen = set(basis)
        progress = True
        ok = True
        active = set(chosen)
        while active and progress:
            progress = False
            for (i, j) in sorted(active):
                row_others = [e for e in active if e[0] == i and e != (i, j)]
                col_others = [e for e in active if e[1] == j and e != (i, j)]
                if not row_others:
                    flow[i, j] = rem_a[i]
                    rem_b[j] -= rem_a[i]
                    rem_a[i] = 0.0
                    active.discard((i, j))
                    progress = True
                elif not col_others:
                    flow[i, j] = rem_b[j]
                    rem_a[i] -= rem_b[j]
                    rem_b[j] = 0.0
                    active.discard((i, j))
                    progress = True
        if active or np.any(np.abs(rem_a) > 1e-12) or np.any(np.abs(rem_b) > 1e-12):
            ok = False
        if ok and np.all(flow > -1e-12):
            best = min(best, float(np.sum(flow * cost)))
    return best


def test_min_cost_transport_against_lp_and_vertices():
    rng = np.random.default_rng(0)
    for trial in range(8):
        n, m = rng.integers(2, 5, size=2)
        a = rng.random(n)
        a /= a.sum()
        b = rng.random(m)
        b /= b.sum()
        cost = rng.integers(0, 10, size=(n, m)).astype(float)
        value, flow = min_cost_transport(a, b, cost)
        assert np.allclose(flow.sum(axis=1), a, atol=1e-10)
        assert np.allclose(flow.sum(axis=0), b, atol=1e-10)
        assert value == pytest.approx(transport_lp_oracle(a, b, cost), abs=1e-9)
        if n <= 3 and m <= 3:
            assert value == pytest.approx(coupling_vertex_oracle(a, b, cost), abs=1e-9)


def test_kantorovich_identity_and_diracs():
    phi = IsingPotential(0.2, 1.0, 0.0, 2)
    lam = cube(1, 2)
    mu = finite_volume_measure(phi, lam, FREE)
    assert kantorovich_config(mu, mu) == pytest.approx(0.0, abs=1e-12)

    a = FiniteMeasure(mu.support[5:6], np.array([1.0]), window=lam)
    b = FiniteMeasure(mu.support[77:78], np.array([1.0]), window=lam)
    from gibbslab.lattice import config_distance

    ca = Configuration(lam, tuple(int(v) for v in mu.support[5]))
    cb = Configuration(lam, tuple(int(v) for v in mu.support[77]))
    assert kantorovich_config(a, b) == pytest.approx(config_distance(ca, cb))


def test_kantorovich_three_atoms_vs_vertex_oracle():
    lam = cube(1, 1)
    rows = np.array([[1, 1, 1], [1, -1, 1], [-1, 1, -1]], dtype=np.int8)
    mu = FiniteMeasure(rows, np.array([0.5, 0.3, 0.2]), window=lam)
    nu = FiniteMeasure(rows, np.array([0.1, 0.2, 0.7]), window=lam)
    cost = config_distance_matrix(mu.support, nu.support, lam)
    got = kantorovich_config(mu, nu)
    assert got == pytest.approx(coupling_vertex_oracle(mu.weights, nu.weights, cost), abs=1e-9)
    assert got == pytest.approx(transport_lp_oracle(mu.weights, nu.weights, cost), abs=1e-9)


def test_kantorovich_dual_lp_oracle():
    # LP duality: primal flow value equals the best 1-Lipschitz potential gap
    lam = cube(1, 1)
    rows = np.array([[1, 1, 1], [1, -1, 1], [-1, 1, -1], [-1, -1, -1]], dtype=np.int8)
    mu = FiniteMeasure(rows, np.array([0.4, 0.1, 0.3, 0.2]), window=lam)
    nu = FiniteMeasure(rows, np.array([0.25, 0.25, 0.25, 0.25]), window=lam)
    cost = config_distance_matrix(rows, rows, lam)
    primal = kantorovich_config(mu, nu)
    # dual: maximize sum (mu-nu) phi subject to phi_i - phi_j <= d_ij
    n = len(rows)
    A_ub = []
    b_ub = []
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            row = np.zeros(n)
            row[i], row[j] = 1.0, -1.0
            A_ub.append(row)
            b_ub.append(cost[i, j])
    res = linprog(
        -(mu.weights - nu.weights), A_ub=np.array(A_ub), b_ub=np.array(b_ub),
        bounds=[(None, None)] * n, method="highs",
    )
    assert res.success
    assert primal == pytest.approx(-res.fun, abs=1e-9)


def test_transport_cap():
    lam = cube(1, 2)
    phi = IsingPotential(0.0, 1.0, 0.0, 2)
    mu = finite_volume_measure(phi, lam, FREE)
    with pytest.raises(SizeError):
        kantorovich_config(mu, mu, cap=100)


def test_dbar_examples():
    lam = cube(1, 1)
    rows = np.array([[1, 1, 1], [-1, -1, -1]], dtype=np.int8)
    mu = FiniteMeasure(rows, np.array([0.7, 0.3]), window=lam)
    nu = FiniteMeasure(rows, np.array([0.4, 0.6]), window=lam)
    assert dbar_hamming(mu, mu) == pytest.approx(0.0, abs=1e-12)
    # two-atom closed form: move |p-q| mass across hamming distance 3
    assert dbar_hamming(mu, nu) == pytest.approx(0.3 * 3.0)

    a = FiniteMeasure(rows[:1], np.array([1.0]), window=lam)
    b = FiniteMeasure(rows[1:], np.array([1.0]), window=lam)
    assert dbar_hamming(a, b) == pytest.approx(3.0)
    assert dbar_hamming(a, b) <= lam.size


def test_dbar_triangle_inequality():
    phi = IsingPotential(0.15, 1.0, 0.0, 2)
    lam = cube(1, 1)
    rng = np.random.default_rng(2)
    rows = np.array(list(itertools.product([-1, 1], repeat=3)), dtype=np.int8)
    def rand_measure():
        w = rng.random(len(rows))
        return FiniteMeasure(rows, w / w.sum(), window=lam)
    for _ in range(5):
        m1, m2, m3 = rand_measure(), rand_measure(), rand_measure()
        d12 = dbar_hamming(m1, m2)
        d23 = dbar_hamming(m2, m3)
        d13 = dbar_hamming(m1, m3)
        assert d13 <= d12 + d23 + 1e-9


def test_empirical_measure_examples():
    w = cube(2, 2)
    const = Configuration(w, (1,) * w.size, FREE)
    lam = cube(1, 2)
    out = cube(0, 2)
    emp = empirical_measure(const, lam, out)
    assert emp.size == 1
    assert emp.weights[0] == pytest.approx(1.0)

    vals = [1] * w.size
    vals[w.index_of((0, 0))] = -1
    mixed = Configuration(w, tuple(vals), FREE)
    emp2 = empirical_measure(mixed, lam, out)
    assert emp2.size == 2
    assert sorted(emp2.weights) == pytest.approx([1 / 9, 8 / 9])
    assert emp2.weights.sum() == pytest.approx(1.0)


def test_empirical_measure_coverage_error():
    w = cube(1, 2)
    c = Configuration(w, (1,) * 9, FREE)
    with pytest.raises(DomainError):
        empirical_measure(c, cube(1, 2), cube(1, 2))


def test_kantorovich_real_examples():
    assert kantorovich_real(real_measure([0.0]), real_measure([2.5])) == pytest.approx(2.5)
    mu = real_measure([0.0, 1.0, 3.0])
    assert kantorovich_real(mu, mu) == 0.0
    # empirical standard normal sample vs the discretized Gaussian
    rng = np.random.default_rng(7)
    sample = real_measure(rng.normal(size=100000))
    g = discretize_gaussian(1.0, points=2048)
    assert kantorovich_real(sample, g.measure) < 0.02
    assert g.w1_error < 1e-3


def test_gaussian_discretization_error_shrinks():
    e1 = discretize_gaussian(1.0, points=256).w1_error
    e2 = discretize_gaussian(1.0, points=1024).w1_error
    assert e2 < e1 / 2
    # exact scale: W1 error of sigma-scaled grid scales with sigma
    a = discretize_gaussian(4.0, points=256).w1_error
    assert a == pytest.approx(2 * e1, rel=1e-10)


def test_fattening_basics_and_monotone():
    phi = IsingPotential(0.0, 1.0, 0.0, 2)
    lam = cube(1, 2)
    mu = finite_volume_measure(phi, lam, FREE)
    mags = mu.support.astype(int).sum(axis=1)
    base = mu.support[mags >= 1]

    assert fatten(lam, base, 1.0).measure(mu) == pytest.approx(1.0)
    assert fatten(lam, base, 0.0).measure(mu) == pytest.approx(0.5)

    last = 0.0
    for eps in [0.0, 1 / 9, 2 / 9, 3 / 9, 1.0]:
        m = fatten(lam, base, eps).measure(mu)
        assert m >= last - 1e-15
        last = m

    # exact enumeration oracle at eps = 1/9: flipping one site fixes M = -1
    got = fatten(lam, base, 1 / 9).measure(mu)
    want = float(np.mean(mags >= -1))
    assert got == pytest.approx(want)


def test_fattening_membership_predicate():
    lam = cube(1, 1)
    base = np.array([[1, 1, 1]], dtype=np.int8)
    f = fatten(lam, base, 1 / 3)
    assert f.contains_values((1, 1, 1))
    assert f.contains_values((1, -1, 1))
    assert not f.contains_values((-1, -1, 1))


def test_sigma_zero_gaussian_convention():
    # sigma = 0 degenerates to a point mass at 0 (Dirac convention)
    g = discretize_gaussian(0.0)
    assert g.measure.size == 1
    assert float(g.measure.support[0]) == 0.0
    assert g.w1_error == 0.0
    zero = real_measure([0.0])
    assert kantorovich_real(zero, g.measure) == 0.0
