"""Observables carrying certified oscillation data.

An observable is a local function given by its dependence window and an
evaluator on value tuples; its oscillation vector stores certified upper
bounds on the single-site oscillations (exact values where closed forms
exist, exhaustive enumeration on request for small dependence sets).

Translates are evaluated with the pull-back convention (tau_x w)_y = w_{y+x},
so that summing the spin-at-origin observable over a window gives the usual
magnetization sum_{x in window} w_x.  Oscillation norms are insensitive to
the direction convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, Mapping, Sequence, Tuple

import numpy as np

from .errors import DomainError, ValidationError
from .lattice import Configuration, Site, Window, cube, site_add
from .specification import FiniteMeasure


@dataclass(frozen=True)
class OscillationVector:
    """Sparse site -> certified oscillation bound, with l^p seminorms."""

    entries: Tuple[Tuple[Site, float], ...]

    @staticmethod
    def from_dict(d: Mapping[Site, float]) -> "OscillationVector":
        items = tuple(sorted((s, float(v)) for s, v in d.items() if v != 0.0))
        return OscillationVector(items)

    def as_dict(self) -> Dict[Site, float]:
        return dict(self.entries)

    def norm(self, p: int) -> float:
        if p == 1:
            return float(sum(v for _, v in self.entries))
        if p == 2:
            return math.sqrt(sum(v * v for _, v in self.entries))
        raise ValidationError("only l1 and l2 norms are used")

    def value_at(self, site: Site) -> float:
        return dict(self.entries).get(site, 0.0)


def osc_norm(v: OscillationVector, p: int) -> float:
    return v.norm(p)


@dataclass(frozen=True)
class Observable:
    """A local function with a certified oscillation vector.

    `evaluate_values` receives the spins on `dependence.sites` in canonical
    order.  `oscillation[x]` bounds |F(w) - F(w')| over pairs differing only
    at x; `sup_bound` bounds |F|.
    """

    label: str
    dependence: Window
    evaluate_values: Callable[[Tuple[int, ...]], float]
    oscillation: OscillationVector
    sup_bound: float

    def __call__(self, config: Configuration) -> float:
        vals = tuple(config.value(s) for s in self.dependence.sites)
        return self.evaluate_values(vals)

    def at_translate(self, config: Configuration, x: Site) -> float:
        vals = []
        for y in self.dependence.sites:
            v = config.value_or_boundary(site_add(y, x))
            if v is None:
                raise DomainError(f"observable needs a value at {site_add(y, x)}")
            vals.append(v)
        return self.evaluate_values(tuple(vals))


def spin_at_origin(d: int = 2) -> Observable:
    w = cube(0, d)
    return Observable(
        label="s0",
        dependence=w,
        evaluate_values=lambda vals: float(vals[0]),
        oscillation=OscillationVector.from_dict({(0,) * d: 2.0}),
        sup_bound=1.0,
    )


def from_table(
    label: str,
    dependence: Window,
    table: np.ndarray,
    alphabet: Sequence[int],
) -> Observable:
    """Observable from a dense value table indexed in mixed-radix order of the
    alphabet indices (matching `enumerate_spins`).  Oscillations are computed
    exactly from the table."""
    q = len(alphabet)
    k = dependence.size
    table = np.asarray(table, dtype=float)
    if table.size != q**k:
        raise ValidationError("table size must be |alphabet|^|dependence|")
    index_of = {int(a): i for i, a in enumerate(alphabet)}
    powers = [q ** (k - 1 - j) for j in range(k)]

    def evaluate(vals: Tuple[int, ...]) -> float:
        idx = 0
        for j, v in enumerate(vals):
            idx += index_of[int(v)] * powers[j]
        return float(table[idx])

    grid = table.reshape((q,) * k) if k > 0 else table
    osc = {}
    for j, site in enumerate(dependence.sites):
        hi = grid.max(axis=j)
        lo = grid.min(axis=j)
        osc[site] = float(np.max(hi - lo))
    return Observable(
        label=label,
        dependence=dependence,
        evaluate_values=evaluate,
        oscillation=OscillationVector.from_dict(osc),
        sup_bound=float(np.max(np.abs(table))),
    )


def mean_energy_observable(phi) -> Observable:
    """f_Phi with per-site oscillation bounds from the term-by-term formula."""
    r = phi.interaction_range()
    d = phi.dimension
    dep = cube(r, d)
    o = (0,) * d
    offsets = phi.pair_offsets()

    def evaluate(vals: Tuple[int, ...]) -> float:
        lookup = dict(zip(dep.sites, vals))
        s0 = lookup[o]
        total = phi.field_term(s0)
        for off in offsets:
            total += phi.pair_term(s0, lookup[off], off) / 2.0
        return total

    def pair_sup(off) -> float:
        return max(
            abs(phi.pair_term(a, b, off)) for a in phi.alphabet for b in phi.alphabet
        )

    field_sup = max(abs(phi.field_term(s)) for s in phi.alphabet)
    osc = {}
    osc[o] = 2.0 * (field_sup + sum(pair_sup(off) / 2.0 for off in offsets))
    for off in offsets:
        osc[off] = 2.0 * pair_sup(off) / 2.0
    return Observable(
        label="mean_energy",
        dependence=dep,
        evaluate_values=evaluate,
        oscillation=OscillationVector.from_dict(osc),
        sup_bound=field_sup + sum(pair_sup(off) / 2.0 for off in offsets),
    )


@dataclass(frozen=True)
class SumResult:
    value: float
    oscillation: OscillationVector
    young_bound_l2_sq: float  # |Lambda| * ||delta f||_1^2 (or the lemma variant)


def _convolved_oscillation(osc: OscillationVector, shifts: Iterable[Site]) -> Dict[Site, float]:
    out: Dict[Site, float] = {}
    for x in shifts:
        for y, v in osc.entries:
            z = site_add(y, x)
            out[z] = out.get(z, 0.0) + v
    return out


def ergodic_sum(f: Observable, lam: Window, omega: Configuration) -> SumResult:
    """S_Lambda f = sum over x in Lambda of the translate of f, with the exact
    convolved oscillation vector and the Young bound |Lambda| ||delta f||_1^2."""
    value = 0.0
    for x in lam.sites:
        value += f.at_translate(omega, x)
    osc = OscillationVector.from_dict(_convolved_oscillation(f.oscillation, lam.sites))
    bound = lam.size * f.oscillation.norm(1) ** 2
    return SumResult(value, osc, bound)


def magnetization(lam: Window, omega: Configuration) -> SumResult:
    """M_Lambda = sum of spins over Lambda; oscillation entry exactly 2 per site."""
    value = float(sum(omega.value(s) for s in lam.sites))
    osc = OscillationVector.from_dict({s: 2.0 for s in lam.sites})
    return SumResult(value, osc, 4.0 * lam.size)


def pair_correlation_sum(
    f: Observable, n: int, x: Site, omega: Configuration
) -> SumResult:
    """sum over y in C_n of f(tau_y w) f(tau_{y+x} w).

    The certified l2^2 bound is 4 (2n+1)^d ||f||_inf^2 ||delta f||_1^2: the
    product rule gives delta_z <= ||f||_inf [(1_C * df)_z + (1_{C+x} * df)_z]
    and Young's inequality bounds each convolution by sqrt(|C|) ||df||_1, so
    the squared norm carries (1+1)^2 = 4 (a factor-2 version fails already for
    the spin observable at n = 1: the exact norm is 120 > 2*9*4 = 72).
    """
    d = len(x)
    lam = cube(n, d)
    value = 0.0
    for y in lam.sites:
        value += f.at_translate(omega, y) * f.at_translate(omega, site_add(y, x))
    part1 = _convolved_oscillation(f.oscillation, lam.sites)
    part2 = _convolved_oscillation(f.oscillation, [site_add(y, x) for y in lam.sites])
    osc: Dict[Site, float] = {}
    for src in (part1, part2):
        for z, v in src.items():
            osc[z] = osc.get(z, 0.0) + f.sup_bound * v
    bound = 4.0 * lam.size * f.sup_bound**2 * f.oscillation.norm(1) ** 2
    return SumResult(value, OscillationVector.from_dict(osc), bound)


def neg_log_cylinder(
    cylinder_prob: Callable[[Tuple[int, ...]], float],
    omega: Configuration,
    n: int,
    triple_norm_value: float,
) -> SumResult:
    """-log mu(C_n(w)) with certified oscillation 2 |||Phi||| at every site of C_n.

    `cylinder_prob` maps the value tuple on C_n (canonical order) to the exact
    cylinder probability; with Monte Carlo estimates the plug-in log is biased
    and callers must carry that caveat.
    """
    d = omega.window.dimension
    cn = cube(n, d)
    vals = tuple(omega.value(s) for s in cn.sites)
    p = cylinder_prob(vals)
    if not 0.0 < p <= 1.0:
        raise DomainError(f"cylinder probability {p} outside (0, 1]")
    osc = OscillationVector.from_dict({s: 2.0 * triple_norm_value for s in cn.sites})
    return SumResult(-math.log(p), osc, cn.size * (2.0 * triple_norm_value) ** 2)


def neglog_observable_from_measure(mu: FiniteMeasure, triple_norm_value: float) -> Observable:
    """-log mu(atom) as a table observable on mu's window (exact-enumeration mode)."""
    lookup = {tuple(map(int, row)): float(w) for row, w in zip(mu.support, mu.weights)}

    def evaluate(vals: Tuple[int, ...]) -> float:
        return -math.log(lookup[tuple(int(v) for v in vals)])

    osc = {s: 2.0 * triple_norm_value for s in mu.window.sites}
    sup = float(np.max(-np.log(mu.weights)))
    return Observable(
        label="neg_log_cylinder",
        dependence=mu.window,
        evaluate_values=evaluate,
        oscillation=OscillationVector.from_dict(osc),
        sup_bound=sup,
    )


@dataclass(frozen=True)
class VarianceReport:
    sigma2: float
    sigma2_raw: float
    centering: float
    radius: int
    tail_heuristic: float  # |outermost-shell sum|, a truncation health check


def variance_sigma2_exact(f: Observable, mu: FiniteMeasure, radius: int) -> VarianceReport:
    """sigma_f^2 truncated to ||x||_inf <= radius under an exact measure.

    Terms are empirically centered covariances E[(f_0 - m)(f_x - m)].
    """
    d = mu.window.dimension
    shifts = cube(radius, d).sites
    evals: Dict[Site, np.ndarray] = {}
    for x in shifts:
        col = np.empty(mu.size)
        for i in range(mu.size):
            col[i] = f.at_translate(mu.atom_config(i), x)
        evals[x] = col
    m = float(np.dot(evals[(0,) * d], mu.weights))
    total = 0.0
    shell_sum = 0.0
    from .lattice import norm_inf

    for x in shifts:
        cov = float(np.dot((evals[(0,) * d] - m) * (evals[x] - m), mu.weights))
        total += cov
        if norm_inf(x) == radius and radius > 0:
            shell_sum += cov
    return VarianceReport(max(total, 0.0), total, m, radius, abs(shell_sum))


def variance_sigma2_samples(
    f: Observable, samples: Sequence[Configuration], radius: int
) -> VarianceReport:
    """Truncated sigma_f^2 from Monte Carlo samples (empirically centered)."""
    if not samples:
        raise ValidationError("need at least one sample")
    d = samples[0].window.dimension
    shifts = cube(radius, d).sites
    n = len(samples)
    evals = {x: np.empty(n) for x in shifts}
    for i, w in enumerate(samples):
        for x in shifts:
            evals[x][i] = f.at_translate(w, x)
    m = float(np.mean(evals[(0,) * d]))
    total = 0.0
    shell_sum = 0.0
    from .lattice import norm_inf

    for x in shifts:
        cov = float(np.mean((evals[(0,) * d] - m) * (evals[x] - m)))
        total += cov
        if norm_inf(x) == radius and radius > 0:
            shell_sum += cov
    return VarianceReport(max(total, 0.0), total, m, radius, abs(shell_sum))


def luxemburg_norm_estimate(zs: Sequence[float], rho: float, rel_tol: float = 1e-6) -> float:
    """Empirical Luxemburg norm for the stretched-exponential Young function:
    the smallest lambda with mean M_rho(Z/lambda) <= 1, found by bisection."""
    if not (0.0 < rho < 1.0):
        raise ValidationError("rho must lie in (0, 1)")
    z = np.abs(np.asarray(zs, dtype=float))
    if len(z) == 0:
        raise ValidationError("need samples")
    if np.all(z == 0.0):
        return 0.0
    h = ((1.0 - rho) / rho) ** (1.0 / rho)
    base = math.exp(h**rho)

    def mean_young(lam: float) -> float:
        with np.errstate(over="ignore"):
            vals = np.exp((z / lam + h) ** rho) - base
        return float(np.mean(vals))

    hi = max(float(np.max(z)), 1e-300)
    while mean_young(hi) > 1.0:
        hi *= 2.0
    lo = hi
    while mean_young(lo) <= 1.0 and lo > 1e-300:
        lo /= 2.0
    # invariant: mean_young(lo) > 1 >= mean_young(hi)
    while (hi - lo) / hi > rel_tol:
        mid = 0.5 * (lo + hi)
        if mean_young(mid) <= 1.0:
            hi = mid
        else:
            lo = mid
    return hi


def exhaustive_oscillation(f: Observable, alphabet: Sequence[int]) -> OscillationVector:
    """Exact single-site oscillations by enumerating the whole dependence set."""
    from .specification import enumerate_spins

    k = f.dependence.size
    q = len(alphabet)
    if q**k > (1 << 22):
        raise DomainError("dependence set too large for exhaustive oscillation")
    spins = enumerate_spins(alphabet, k)
    vals = np.array([f.evaluate_values(tuple(int(v) for v in row)) for row in spins])
    grid = vals.reshape((q,) * k)
    osc = {}
    for j, site in enumerate(f.dependence.sites):
        hi = grid.max(axis=j)
        lo = grid.min(axis=j)
        osc[site] = float(np.max(hi - lo))
    return OscillationVector.from_dict(osc)


def exhaustive_sup(f: Observable, alphabet: Sequence[int]) -> float:
    from .specification import enumerate_spins

    spins = enumerate_spins(alphabet, f.dependence.size)
    return float(
        max(abs(f.evaluate_values(tuple(int(v) for v in row))) for row in spins)
    )
