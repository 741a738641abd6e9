"""Finite-volume Hamiltonians, specification kernels, exact Gibbs measures by
enumeration, and the DLR / ratio-bound property checks.

All exact enumeration accumulates in log space (log-sum-exp) so that large
beta times many bonds cannot overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from .errors import DomainError, SizeError
from .lattice import (
    FREE,
    Boundary,
    Configuration,
    Pattern,
    Site,
    Window,
    site_add,
)

DEFAULT_ATOM_CAP = 1 << 20
SPLIT_ATOM_CAP = 1 << 26


def enumerate_spins(alphabet: Sequence[int], k: int) -> np.ndarray:
    """All |S|^k assignments as an (N, k) int8 array, site 0 varying slowest.

    Row order is the mixed-radix order of alphabet indices, which matches
    lexicographic order of value tuples when the alphabet is sorted.
    """
    q = len(alphabet)
    n = q**k
    idx = np.arange(n)
    cols = []
    for j in range(k):
        power = q ** (k - 1 - j)
        cols.append((idx // power) % q)
    digits = np.stack(cols, axis=1)
    alph = np.asarray(alphabet, dtype=np.int8)
    return alph[digits]


@dataclass
class FiniteMeasure:
    """A finitely supported probability measure.

    Configuration-valued measures store their support as an (N, k) int8 array
    aligned with `window.sites`; real-valued measures store a (N,) float array
    and leave `window` unset.
    """

    support: np.ndarray
    weights: np.ndarray
    window: Optional[Window] = None
    boundary: Optional[Boundary] = None
    log_z: Optional[float] = None

    def __post_init__(self):
        self.support = np.asarray(self.support)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.ndim != 1 or len(self.weights) != len(self.support):
            raise DomainError("weights must be a vector matching the support")
        if np.any(self.weights < -1e-15):
            raise DomainError("weights must be nonnegative")
        total = float(self.weights.sum())
        if abs(total - 1.0) > 1e-12:
            raise DomainError(f"weights must sum to 1 (got {total!r})")
        if self.window is not None and (
            self.support.ndim != 2 or self.support.shape[1] != self.window.size
        ):
            raise DomainError("configuration support must be (N, |window|)")

    @property
    def size(self) -> int:
        return len(self.weights)

    def validate_distinct(self) -> None:
        if self.window is None:
            if len(np.unique(self.support)) != len(self.support):
                raise DomainError("atoms must be distinct")
        else:
            uniq = np.unique(self.support, axis=0)
            if len(uniq) != len(self.support):
                raise DomainError("atoms must be distinct")

    def atom_config(self, i: int) -> Configuration:
        if self.window is None:
            raise DomainError("not a configuration-valued measure")
        return Configuration(
            self.window, tuple(int(v) for v in self.support[i]), self.boundary or FREE
        )

    def expectation(self, values: np.ndarray) -> float:
        return float(np.dot(np.asarray(values, dtype=float), self.weights))

    def marginal(self, sub: Window) -> "FiniteMeasure":
        """Exact projection onto a sub-window (atoms merged with multiplicity)."""
        if self.window is None:
            raise DomainError("not a configuration-valued measure")
        cols = [self.window.index_of(s) for s in sub.sites]
        reduced = np.ascontiguousarray(self.support[:, cols])
        uniq, inverse = np.unique(reduced, axis=0, return_inverse=True)
        w = np.zeros(len(uniq))
        np.add.at(w, inverse, self.weights)
        return FiniteMeasure(uniq, w / w.sum(), window=sub, boundary=self.boundary)

    def argmax_atom(self) -> int:
        return int(np.argmax(self.weights))


def _pair_index_terms(phi, lam: Window, boundary: Boundary):
    """Split interaction terms touching `lam` into interior pairs and
    site-to-boundary contributions.

    Returns (interior, exterior) where interior is a list of (i, j, offset)
    index pairs counted once, and exterior is a list of (i, boundary_value,
    offset) with free-boundary terms dropped.
    """
    interior = []
    exterior = []
    for i, x in enumerate(lam.sites):
        for off in phi.pair_offsets():
            y = site_add(x, off)
            if y in lam:
                j = lam.index_of(y)
                if i < j:
                    interior.append((i, j, off))
            else:
                b = boundary.value_at(y)
                if b is not None:
                    exterior.append((i, int(b), off))
    return interior, exterior


def hamiltonian(phi, lam: Window, omega: Configuration, boundary: Boundary) -> float:
    """H_Lambda(omega | eta): all potential terms meeting Lambda, with exterior
    spins read from the boundary (free boundary drops cross terms)."""
    if not omega.window.contains_window(lam):
        raise DomainError("configuration must cover Lambda")
    interior, exterior = _pair_index_terms(phi, lam, boundary)
    vals = [omega.value(s) for s in lam.sites]
    h = sum(phi.field_term(v) for v in vals)
    for i, j, off in interior:
        h += phi.pair_term(vals[i], vals[j], off)
    for i, b, off in exterior:
        h += phi.pair_term(vals[i], b, off)
    return h


def hamiltonian_batch(phi, lam: Window, boundary: Boundary, spins: np.ndarray) -> np.ndarray:
    """Vectorized H_Lambda over an (N, |lam|) array of spin rows."""
    spins = np.asarray(spins)
    n = spins.shape[0]
    h = np.zeros(n)
    interior, exterior = _pair_index_terms(phi, lam, boundary)
    if phi.kind in ("ising", "long_range"):
        beta_field = phi.beta * getattr(phi, "field", 0.0)
        if beta_field:
            h -= beta_field * spins.sum(axis=1)
        for i, j, off in interior:
            c = phi.beta * phi.pair_coupling(off)
            if c:
                h -= c * (spins[:, i] * spins[:, j]).astype(float)
        ext_field = np.zeros(lam.size)
        for i, b, off in exterior:
            ext_field[i] += phi.beta * phi.pair_coupling(off) * b
        if np.any(ext_field):
            h -= spins.astype(float) @ ext_field
    elif phi.kind == "potts":
        bj = phi.beta * phi.coupling
        for i, j, off in interior:
            h += bj * (spins[:, i] == spins[:, j])
        for i, b, off in exterior:
            h += bj * (spins[:, i] == b)
    else:  # pragma: no cover - unknown family
        raise DomainError(f"unsupported potential kind {phi.kind!r}")
    return h


def finite_volume_measure(
    phi,
    lam: Window,
    boundary: Boundary,
    atom_cap: int = DEFAULT_ATOM_CAP,
) -> FiniteMeasure:
    """Exact Boltzmann measure exp(-H)/Z on S^Lambda, plus log Z."""
    q = len(phi.alphabet)
    n_atoms = q**lam.size
    if n_atoms > atom_cap:
        raise SizeError(f"{n_atoms} atoms exceed the enumeration cap {atom_cap}")
    spins = enumerate_spins(phi.alphabet, lam.size)
    h = hamiltonian_batch(phi, lam, boundary, spins)
    log_z = float(logsumexp(-h))
    w = np.exp(-h - log_z)
    w = w / w.sum()
    return FiniteMeasure(spins, w, window=lam, boundary=boundary, log_z=log_z)


def single_site_kernel(phi, x: Site, conditioning: Configuration) -> FiniteMeasure:
    """The one-site specification kernel gamma_x(. | conditioning).

    The conditioning configuration (window + boundary) must cover the
    interaction neighborhood of x; with a free boundary, uncovered terms are
    dropped.  Returns an exactly normalized measure over the alphabet.
    """
    energies = []
    for s in phi.alphabet:
        h = phi.field_term(s)
        for off in phi.pair_offsets():
            y = site_add(x, off)
            v = conditioning.value_or_boundary(y)
            if v is None:
                continue
            h += phi.pair_term(s, v, off)
        energies.append(h)
    e = np.array(energies)
    log_z = float(logsumexp(-e))
    w = np.exp(-e - log_z)
    return FiniteMeasure(
        np.asarray(phi.alphabet, dtype=float), w / w.sum(), log_z=log_z
    )


def kernel_probabilities(phi, x: Site, conditioning: Configuration) -> np.ndarray:
    return single_site_kernel(phi, x, conditioning).weights


def cylinder_probability(mu: FiniteMeasure, pattern: Pattern) -> float:
    """Total weight of atoms agreeing with the pattern on its support."""
    if mu.window is None:
        raise DomainError("cylinder_probability needs a configuration-valued measure")
    if not mu.window.contains_window(pattern.support):
        raise DomainError("pattern support must lie inside the measure's window")
    cols = [mu.window.index_of(s) for s in pattern.support.sites]
    target = np.asarray(pattern.values, dtype=mu.support.dtype)
    match = np.all(mu.support[:, cols] == target, axis=1)
    return float(mu.weights[match].sum())


@dataclass
class ConsistencyReport:
    max_discrepancy: float
    tolerance: float
    passed: bool
    lam_size: int
    sub_size: int


def _conditional_kernel_matrix(
    phi, lam: Window, sub: Window, boundary: Boundary, atoms: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """For each atom row w on lam, the multi-site kernel gamma_sub(a | w, eta)
    over all sub-patterns a.  Returns (patterns, kernel) with kernel shape
    (n_atoms, n_patterns)."""
    sub_cols = np.array([lam.index_of(s) for s in sub.sites])
    patterns = enumerate_spins(phi.alphabet, sub.size)
    energies = []
    for a in patterns:
        modified = atoms.copy()
        modified[:, sub_cols] = a
        energies.append(hamiltonian_batch(phi, lam, boundary, modified))
    e = np.stack(energies, axis=1)  # (n_atoms, n_patterns)
    e -= e.min(axis=1, keepdims=True)
    w = np.exp(-e)
    w /= w.sum(axis=1, keepdims=True)
    return patterns, w


def dlr_consistency_check(
    phi,
    sub: Window,
    lam: Window,
    boundary: Boundary,
    tolerance: float = 1e-12,
    atom_cap: int = DEFAULT_ATOM_CAP,
) -> ConsistencyReport:
    """Verify mu_Lambda(A) = int gamma_sub(.|.) dmu_Lambda for every cylinder A
    on `sub`, both sides computed by exact enumeration."""
    if not lam.contains_window(sub):
        raise DomainError("sub-window must be contained in Lambda")
    mu = finite_volume_measure(phi, lam, boundary, atom_cap=atom_cap)
    patterns, kernel = _conditional_kernel_matrix(phi, lam, sub, boundary, mu.support)
    rhs = mu.weights @ kernel
    sub_cols = [lam.index_of(s) for s in sub.sites]
    reduced = np.ascontiguousarray(mu.support[:, sub_cols])
    uniq, inverse = np.unique(reduced, axis=0, return_inverse=True)
    lhs_by_pattern = np.zeros(len(uniq))
    np.add.at(lhs_by_pattern, inverse, mu.weights)
    # align: patterns enumerates the same lexicographic order as np.unique rows
    lookup = {tuple(int(v) for v in row): i for i, row in enumerate(uniq)}
    lhs = np.array([lhs_by_pattern[lookup[tuple(int(v) for v in a)]] for a in patterns])
    max_disc = float(np.max(np.abs(lhs - rhs)))
    return ConsistencyReport(max_disc, tolerance, max_disc <= tolerance, lam.size, sub.size)


@dataclass
class RatioBoundReport:
    max_log_ratio: float
    log_bound: float
    slack: float
    passed: bool


def ratio_bound_check(
    phi,
    lam: Window,
    sub: Window,
    boundary: Boundary,
    atom_cap: int = DEFAULT_ATOM_CAP,
) -> RatioBoundReport:
    """Check gamma_Lambda(w|eta)/gamma_Lambda(w'|eta) <= exp(2 |sub| |||Phi|||)
    over all pairs w, w' equal off `sub` (exhaustive scan)."""
    if not lam.contains_window(sub):
        raise DomainError("sub-window must be contained in Lambda")
    spins = enumerate_spins(phi.alphabet, lam.size)
    h = hamiltonian_batch(phi, lam, boundary, spins)
    off_cols = [i for i, s in enumerate(lam.sites) if s not in sub]
    if off_cols:
        reduced = np.ascontiguousarray(spins[:, off_cols])
        _, inverse = np.unique(reduced, axis=0, return_inverse=True)
    else:
        inverse = np.zeros(len(spins), dtype=int)
    n_groups = int(inverse.max()) + 1
    hi = np.full(n_groups, -np.inf)
    lo = np.full(n_groups, np.inf)
    np.maximum.at(hi, inverse, -h)
    np.minimum.at(lo, inverse, -h)
    max_log_ratio = float(np.max(hi - lo))
    log_bound = 2.0 * sub.size * phi.triple_norm()
    slack = log_bound - max_log_ratio
    return RatioBoundReport(max_log_ratio, log_bound, slack, slack >= -1e-12)


def entropy_and_relative_entropy(
    nu: FiniteMeasure, mu: FiniteMeasure
) -> Tuple[float, float]:
    """Shannon entropy of nu (nats) and H(nu|mu) over aligned atoms.

    Returns +inf for the relative entropy when nu charges an atom of mu-mass
    zero.  Atom supports need not be in the same order but must live on the
    same window.
    """
    if (nu.window is None) != (mu.window is None):
        raise DomainError("measures must be of the same kind")
    if nu.window is not None and nu.window != mu.window:
        raise DomainError("measures must share a window")

    def keyed(m: FiniteMeasure) -> Dict[tuple, float]:
        out: Dict[tuple, float] = {}
        for i in range(m.size):
            atom = m.support[i]
            key = tuple(atom.tolist()) if m.window is not None else (float(atom),)
            out[key] = out.get(key, 0.0) + float(m.weights[i])
        return out

    nu_map, mu_map = keyed(nu), keyed(mu)
    ent = 0.0
    rel = 0.0
    diverged = False
    for key, p in nu_map.items():
        if p <= 0.0:
            continue
        ent -= p * math.log(p)
        q = mu_map.get(key, 0.0)
        if q <= 0.0:
            diverged = True
        else:
            rel += p * math.log(p / q)
    return ent, (math.inf if diverged else rel)


def pressure_estimate(
    phi,
    n: int,
    boundary: Boundary = FREE,
    atom_cap: int = DEFAULT_ATOM_CAP,
) -> float:
    """Finite-volume pressure proxy log Z_{C_n}(boundary) / (2n+1)^d.

    The infinite-volume limit is boundary-independent; at desk scale the
    boundary and n are part of the record.
    """
    from .lattice import cube

    lam = cube(n, phi.dimension)
    mu = finite_volume_measure(phi, lam, boundary, atom_cap=atom_cap)
    return float(mu.log_z) / lam.size


def box_window(inner: Window, margin: int) -> Window:
    """The centered cube exactly `margin` layers beyond an inner cube."""
    if inner.kind != "cube" or inner.radius is None:
        raise DomainError("box_window expects a centered cube")
    from .lattice import cube

    return cube(inner.radius + margin, inner.dimension)


def marginal_via_split(
    phi,
    inner: Window,
    box: Window,
    boundary: Boundary,
    atom_cap: int = SPLIT_ATOM_CAP,
    chunk: int = 128,
) -> FiniteMeasure:
    """Exact marginal of the finite-volume measure on `box` restricted to
    `inner`, computed without materializing |S|^|box| atoms.

    Works for plus/minus-one pair families (Ising, truncated long range),
    whose cross energies are bilinear in the spins.  The total work is
    |S|^|inner| * |S|^|box \\ inner| energy evaluations, chunked.
    """
    if phi.kind == "potts":
        raise DomainError("split marginalization implemented for spin-pair families only")
    if not box.contains_window(inner):
        raise DomainError("inner window must lie inside the box")
    ext_sites = tuple(s for s in box.sites if s not in inner)
    n_in = len(phi.alphabet) ** inner.size
    n_ext = len(phi.alphabet) ** len(ext_sites)
    if n_in * n_ext > atom_cap:
        raise SizeError(f"split enumeration of {n_in}x{n_ext} exceeds cap {atom_cap}")
    ext = Window(box.dimension, ext_sites)

    a_spins = enumerate_spins(phi.alphabet, inner.size).astype(np.float64)
    b_spins = enumerate_spins(phi.alphabet, len(ext_sites)).astype(np.float64)

    # Interior-only and exterior-only energies (each sees the box boundary for
    # its own cross terms; inner<->ext bonds handled bilinearly below).
    h_a = _partial_energy(phi, box, boundary, inner, a_spins)
    h_b = _partial_energy(phi, box, boundary, ext, b_spins)

    # Bilinear inner<->ext coupling matrix.
    cmat = np.zeros((inner.size, len(ext_sites)))
    ext_index = {s: j for j, s in enumerate(ext_sites)}
    for i, x in enumerate(inner.sites):
        for off in phi.pair_offsets():
            y = site_add(x, off)
            if y in ext_index:
                cmat[i, ext_index[y]] += phi.beta * phi.pair_coupling(off)

    log_w = np.empty(n_in)
    for start in range(0, n_in, chunk):
        stop = min(start + chunk, n_in)
        cross = -(a_spins[start:stop] @ cmat) @ b_spins.T
        total = -(h_a[start:stop, None] + h_b[None, :] + cross)
        log_w[start:stop] = logsumexp(total, axis=1)
    log_z = float(logsumexp(log_w))
    w = np.exp(log_w - log_z)
    return FiniteMeasure(
        enumerate_spins(phi.alphabet, inner.size),
        w / w.sum(),
        window=inner,
        boundary=boundary,
        log_z=log_z,
    )


def _partial_energy(phi, box: Window, boundary: Boundary, part: Window, spins: np.ndarray) -> np.ndarray:
    """Field terms, pair terms inside `part`, and `part`-to-boundary terms
    (bonds leaving the box), for rows of spins on `part`."""
    n = spins.shape[0]
    h = np.zeros(n)
    beta_field = phi.beta * getattr(phi, "field", 0.0)
    if beta_field:
        h -= beta_field * spins.sum(axis=1)
    ext_field = np.zeros(part.size)
    for i, x in enumerate(part.sites):
        for off in phi.pair_offsets():
            y = site_add(x, off)
            if y in part:
                j = part.index_of(y)
                if i < j:
                    c = phi.beta * phi.pair_coupling(off)
                    if c:
                        h -= c * spins[:, i] * spins[:, j]
            elif y not in box:
                b = boundary.value_at(y)
                if b is not None:
                    ext_field[i] += phi.beta * phi.pair_coupling(off) * b
    if np.any(ext_field):
        h -= spins @ ext_field
    return h
