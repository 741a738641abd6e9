"""Dobrushin matrix entries and coefficient, regime conditions, and evaluators
for the Gaussian / moment / stretched-exponential concentration bounds.

Entry semantics.  For a spin-pair kernel the total-variation sensitivity to a
single neighbor is a function of the residual field t contributed by the other
neighbors: TV(t) = (tanh(t + a) - tanh(t - a))/2 with a = beta*|J(y)|.  The
certified entry reported here maximizes TV over the closed convex hull of
attainable residual fields (a one-dimensional exact maximization).  On the
integer lattice the attainable set is a strict subset of its hull, so the
certified entry upper-bounds the pattern-attained supremum; for a symmetric
hull it evaluates in closed form to tanh(beta*|J(y)|), which reproduces the
classical nearest-neighbor values and the beta < 0.5*ln(5/3) threshold in two
dimensions.  The strictly attained supremum is also exposed for cross-checks
(`dobrushin_entry_attained`).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import DomainError, RegimeError, SizeError, ValidationError
from .lattice import Site, norm_1

ATTAINED_PATTERN_CAP = 1 << 16


@dataclass(frozen=True)
class RegimeReport:
    """Dobrushin coefficient (value or certified upper bound) with provenance."""

    coefficient: float
    method: str  # exact-enumeration | oscillation-bound | tanh-bound | potts-bound
    truncation_error: float = 0.0
    in_uniqueness: bool = False

    def __post_init__(self):
        if self.coefficient < 0:
            raise ValidationError("coefficient must be nonnegative")

    @property
    def total(self) -> float:
        return self.coefficient + self.truncation_error


@dataclass(frozen=True)
class BoundParams:
    """Parameters of a concentration bound, with provenance."""

    kind: str  # gaussian | moment | stretched
    provenance: str = "user-supplied"  # derived-from-coefficient | user-supplied | fitted
    D: Optional[float] = None
    p: Optional[int] = None
    C2p: Optional[float] = None
    rho: Optional[float] = None
    c_rho: Optional[float] = None
    K_rho: Optional[float] = None

    def __post_init__(self):
        if self.kind == "gaussian":
            if self.D is None or self.D <= 0:
                raise ValidationError("gaussian bound needs D > 0")
        elif self.kind == "moment":
            if self.p is None or self.p < 1 or self.C2p is None or self.C2p <= 0:
                raise ValidationError("moment bound needs p >= 1 and C2p > 0")
        elif self.kind == "stretched":
            if self.rho is None or not (0 < self.rho < 1):
                raise ValidationError("stretched bound needs 0 < rho < 1")
            if self.c_rho is None or self.c_rho <= 0:
                raise ValidationError("stretched bound needs c_rho > 0")
        else:
            raise ValidationError(f"unknown bound kind {self.kind!r}")


def _pair_tv(t: float, a: float) -> float:
    return 0.5 * abs(math.tanh(t + a) - math.tanh(t - a))


def _hull_max_tv(a: float, lo: float, hi: float) -> float:
    """Maximize TV(t) over t in [lo, hi].  TV is even in t, increasing on
    (-inf, 0] and decreasing on [0, inf), so the max sits at the point of the
    interval closest to 0."""
    if lo <= 0.0 <= hi:
        t_star = 0.0
    elif lo > 0.0:
        t_star = lo
    else:
        t_star = hi
    return _pair_tv(t_star, a)


def _pair_residual_interval(phi, y_off: Tuple[int, ...]) -> Tuple[float, float]:
    other = sum(
        abs(phi.pair_coupling(o)) for o in phi.pair_offsets() if o != y_off
    )
    h = phi.beta * getattr(phi, "field", 0.0)
    m = phi.beta * other
    return (h - m, h + m)


def dobrushin_entry(phi, y: Site) -> float:
    """Certified Dobrushin matrix entry C_{0,y} (see module docstring).

    Returns 0 outside the interaction range.  For spin-pair families this is
    the hull-maximized kernel TV; for the Potts antiferromagnet it is the
    pattern-attained supremum (the neighborhood is small and enumerable).
    """
    if all(c == 0 for c in y):
        return 0.0
    if phi.kind in ("ising", "long_range"):
        j = phi.pair_coupling(tuple(y))
        if j == 0.0:
            return 0.0
        a = phi.beta * abs(j)
        lo, hi = _pair_residual_interval(phi, tuple(y))
        return _hull_max_tv(a, lo, hi)
    if phi.kind == "potts":
        if norm_1(y) != 1:
            return 0.0
        return _potts_entry(phi)
    raise DomainError(f"unsupported potential kind {phi.kind!r}")


def dobrushin_entry_attained(phi, y: Site) -> float:
    """The strictly pattern-attained supremum of the kernel TV at offset y.

    Enumerates all assignments of the remaining neighbors (falls back to the
    certified entry with a SizeError if the neighborhood is too large).  Always
    <= dobrushin_entry(phi, y).
    """
    if all(c == 0 for c in y):
        return 0.0
    if phi.kind == "potts":
        return _potts_entry(phi) if norm_1(y) == 1 else 0.0
    j = phi.pair_coupling(tuple(y))
    if j == 0.0:
        return 0.0
    a = phi.beta * abs(j)
    others = [o for o in phi.pair_offsets() if o != tuple(y)]
    if 2 ** len(others) > ATTAINED_PATTERN_CAP:
        raise SizeError("neighborhood too large to enumerate; use dobrushin_entry")
    couplings = np.array([phi.beta * phi.pair_coupling(o) for o in others])
    h = phi.beta * getattr(phi, "field", 0.0)
    best = 0.0
    for signs in itertools.product((-1.0, 1.0), repeat=len(others)):
        t = h + float(np.dot(couplings, signs))
        best = max(best, _pair_tv(t, a))
    return best


def _potts_entry(phi) -> float:
    """Exact sup over neighbor patterns of the Potts single-site kernel TV.

    Only the color counts of the other 2d-1 neighbors matter; enumerate the
    compositions and all ordered recolorings of the distinguished neighbor.
    """
    q = phi.colors
    deg = 2 * phi.dimension
    bj = phi.beta * phi.coupling
    best = 0.0
    for counts in _compositions(deg - 1, q):
        base = np.array(counts, dtype=float)
        for ca in range(q):
            for cb in range(q):
                if ca == cb:
                    continue
                n1 = base.copy()
                n1[ca] += 1
                n2 = base.copy()
                n2[cb] += 1
                w1 = np.exp(-bj * n1)
                w2 = np.exp(-bj * n2)
                p1 = w1 / w1.sum()
                p2 = w2 / w2.sum()
                best = max(best, 0.5 * float(np.abs(p1 - p2).sum()))
    return best


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for rest in _compositions(total - head, parts - 1):
            yield (head,) + rest


def dobrushin_coefficient(phi) -> RegimeReport:
    """c(gamma) = sum over offsets of the matrix entries, with the method and
    any truncation slack recorded.

    Ising: exact per-entry evaluation summed over the 2d neighbors.
    Long range: the tanh bound over the truncated ball plus a certified tail.
    Potts antiferromagnet: the closed-form bound 2d/(q-2d) (infinite if
    q <= 2d, where that bound says nothing).
    At beta = 0 every kernel is uniform, so all entries vanish exactly.
    """
    if phi.beta == 0.0:
        return RegimeReport(0.0, "exact-enumeration", 0.0, True)
    if phi.kind == "ising":
        entry = dobrushin_entry(phi, _first_nn(phi.dimension))
        c = 2 * phi.dimension * entry
        return RegimeReport(c, "exact-enumeration", 0.0, c < 1.0)
    if phi.kind == "long_range":
        c = sum(
            math.tanh(phi.beta * abs(phi.pair_coupling(o))) for o in phi.pair_offsets()
        )
        # tanh(u) <= u bounds the discarded tail.
        tail = phi.beta * phi.coupling_l1_tail()
        return RegimeReport(c, "tanh-bound", tail, c + tail < 1.0)
    if phi.kind == "potts":
        d, q = phi.dimension, phi.colors
        if q > 2 * d:
            c = (2.0 * d) / (q - 2 * d)
        else:
            c = math.inf
        return RegimeReport(c if math.isfinite(c) else float("inf"), "potts-bound", 0.0, c < 1.0)
    raise DomainError(f"unsupported potential kind {phi.kind!r}")


def dobrushin_coefficient_attained(phi) -> float:
    """Sum of the strictly pattern-attained entries over the interaction ball."""
    total = 0.0
    for off in phi.pair_offsets():
        total += dobrushin_entry_attained(phi, off)
    return total


def _first_nn(d: int) -> Site:
    return tuple([1] + [0] * (d - 1))


def oscillation_sufficient_condition(phi) -> Tuple[float, float, bool]:
    """(half_sum, raw_sum, in_regime): half_sum = 0.5 sum (|A|-1) delta(Phi(A,.))
    compared against 1 (equivalently raw_sum against 2)."""
    if phi.kind == "ising":
        half = 0.5 * (2 * phi.dimension) * (2 * phi.beta * abs(phi.coupling))
    elif phi.kind == "potts":
        half = 0.5 * (2 * phi.dimension) * (phi.beta * phi.coupling)
    elif phi.kind == "long_range":
        half = phi.beta * (phi.coupling_l1_truncated() + phi.coupling_l1_tail())
    else:
        raise DomainError(f"unsupported potential kind {phi.kind!r}")
    return half, 2.0 * half, half < 1.0


def field_uniqueness_condition(phi) -> Tuple[float, float, bool]:
    """Large-field sufficient condition: field strength must exceed
    half the pair-term oscillation sum plus log of the weighted sum.

    Returns (lhs, rhs, holds) with lhs = beta*|h|.
    """
    if phi.kind != "ising":
        raise DomainError("field condition implemented for the Ising family")
    lhs = phi.beta * abs(phi.field)
    pair_delta_sum = (2 * phi.dimension) * (2 * phi.beta * abs(phi.coupling))
    weighted = (2 * phi.dimension) * (2 * phi.beta * abs(phi.coupling))
    if weighted <= 0:
        return lhs, -math.inf, True
    rhs = 0.5 * pair_delta_sum + math.log(weighted)
    return lhs, rhs, lhs > rhs


def uniqueness_threshold(
    phi_at, lo: float, hi: float, tol: float = 1e-6
) -> float:
    """Bisect for the beta where the coefficient of phi_at(beta) crosses 1.

    `phi_at` maps beta to a potential; requires a sign change on [lo, hi].
    """

    def excess(beta: float) -> float:
        return dobrushin_coefficient(phi_at(beta)).total - 1.0

    f_lo, f_hi = excess(lo), excess(hi)
    if f_lo > 0 or f_hi < 0:
        raise DomainError("threshold bisection needs coefficient crossing 1 on [lo, hi]")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if excess(mid) <= 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def gcb_constant(c: float) -> float:
    """Gaussian concentration constant D = 1/(2(1-c)^2) from a coefficient c < 1."""
    if not 0.0 <= c:
        raise ValidationError("coefficient must be nonnegative")
    if c >= 1.0:
        raise RegimeError(f"Dobrushin coefficient {c} is not below 1")
    return 1.0 / (2.0 * (1.0 - c) ** 2)


def gaussian_tail(D: float, osc_l2: float, u: float, clamp: bool = True) -> float:
    """Two-sided tail bound 2 exp(-u^2 / (4 D ||delta F||_2^2))."""
    if D <= 0 or osc_l2 <= 0:
        raise ValidationError("gaussian_tail needs D > 0 and osc_l2 > 0")
    raw = 2.0 * math.exp(-(u * u) / (4.0 * D * osc_l2 * osc_l2))
    return min(raw, 1.0) if clamp else raw


def moment_tail(C2p: float, p: int, osc_l2: float, u: float, clamp: bool = True) -> float:
    """Markov tail C_2p ||delta F||_2^(2p) / u^(2p)."""
    if u <= 0:
        raise ValidationError("moment_tail needs u > 0")
    raw = C2p * osc_l2 ** (2 * p) / u ** (2 * p)
    return min(raw, 1.0) if clamp else raw


def stretched_tail(rho: float, c_rho: float, osc_l2: float, u: float, clamp: bool = True) -> float:
    """Stretched-exponential tail 4 exp(-c_rho u^rho / ||delta F||_2^rho)."""
    if not (0.0 < rho < 1.0):
        raise ValidationError("stretched_tail needs 0 < rho < 1")
    if c_rho <= 0:
        raise ValidationError("stretched_tail needs c_rho > 0")
    raw = 4.0 * math.exp(-c_rho * (u**rho) / (osc_l2**rho))
    return min(raw, 1.0) if clamp else raw


def moments_to_gaussian(K: float):
    """From E[Z^{2p}] <= p! K^p for all p, the exponential-moment bound
    lambda -> exp(2 K lambda^2)."""
    if K <= 0:
        raise ValidationError("K must be positive")
    return lambda lam: math.exp(2.0 * K * lam * lam)


def gaussian_to_moments(K: float):
    """From a sub-Gaussian tail exp(-u^2/(2K)), the moment sequence
    p -> p! (4K)^p."""
    if K <= 0:
        raise ValidationError("K must be positive")
    return lambda p: math.factorial(p) * (4.0 * K) ** p


def gcb_moment_sequence(D: float, osc_l2: float):
    """The GCB -> MCB chain: K = 2 D ||delta F||_2^2, C_2p = p! (8D)^p ||d F||^{2p}.

    Returns p -> C_2p for the normalized variable (osc_l2 = 1 gives p!(8D)^p).
    """
    trans = gaussian_to_moments(2.0 * D * osc_l2 * osc_l2)
    return trans
