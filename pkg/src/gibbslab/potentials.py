"""The three interaction families: nearest-neighbor Ising, truncated long-range
pair couplings, and the Potts antiferromagnet.

Sign convention: potential terms enter the Hamiltonian with a plus sign and
Boltzmann weights are exp(-H).  The inverse temperature beta multiplies every
term, so e.g. the Ising pair term evaluates to -beta*J*s1*s2.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Tuple

from .errors import DomainError, ValidationError
from .lattice import norm_1, norm_inf

Offset = Tuple[int, ...]


def _nn_offsets(d: int) -> Tuple[Offset, ...]:
    offs = []
    for i in range(d):
        for sgn in (+1, -1):
            o = [0] * d
            o[i] = sgn
            offs.append(tuple(o))
    return tuple(offs)


@dataclass(frozen=True)
class IsingPotential:
    """Nearest-neighbor Ising model: pair term -J s_x s_y, field term -h s_x."""

    beta: float
    coupling: float = 1.0
    field: float = 0.0
    dimension: int = 2

    def __post_init__(self):
        if self.beta < 0:
            raise ValidationError("beta must be nonnegative")
        if self.dimension < 1:
            raise ValidationError("dimension must be >= 1")

    kind = "ising"

    @property
    def alphabet(self) -> Tuple[int, ...]:
        return (-1, +1)

    def interaction_range(self) -> int:
        return 1

    def is_truncated(self) -> bool:
        return False

    def pair_offsets(self) -> Tuple[Offset, ...]:
        return _nn_offsets(self.dimension)

    def pair_coupling(self, offset: Offset) -> float:
        return self.coupling if norm_1(offset) == 1 else 0.0

    def pair_term(self, s1: int, s2: int, offset: Offset) -> float:
        return -self.beta * self.coupling * s1 * s2

    def field_term(self, s: int) -> float:
        return -self.beta * self.field * s

    def triple_norm(self) -> float:
        return self.beta * (abs(self.field) + 2 * self.dimension * abs(self.coupling))

    def triple_norm_tail(self) -> float:
        return 0.0


@dataclass(frozen=True)
class PottsPotential:
    """Potts antiferromagnet: pair term +J 1{s_x == s_y} on nearest neighbors."""

    beta: float
    coupling: float = 1.0
    colors: int = 3
    dimension: int = 2

    def __post_init__(self):
        if self.beta < 0:
            raise ValidationError("beta must be nonnegative")
        if self.colors < 2:
            raise ValidationError("Potts needs q >= 2")
        if self.coupling <= 0:
            raise ValidationError("Potts coupling J must be positive")

    kind = "potts"

    @property
    def alphabet(self) -> Tuple[int, ...]:
        return tuple(range(1, self.colors + 1))

    def interaction_range(self) -> int:
        return 1

    def is_truncated(self) -> bool:
        return False

    def pair_offsets(self) -> Tuple[Offset, ...]:
        return _nn_offsets(self.dimension)

    def pair_coupling(self, offset: Offset) -> float:
        return self.coupling if norm_1(offset) == 1 else 0.0

    def pair_term(self, s1: int, s2: int, offset: Offset) -> float:
        return self.beta * self.coupling if s1 == s2 else 0.0

    def field_term(self, s: int) -> float:
        return 0.0

    def triple_norm(self) -> float:
        return self.beta * 2 * self.dimension * self.coupling

    def triple_norm_tail(self) -> float:
        return 0.0


@dataclass(frozen=True)
class LongRangePairPotential:
    """Spin pair potential -J(x-y) s_x s_y truncated at ||x||_inf <= truncation_radius.

    The coupling is either a power-law family J(x) = amplitude * ||x||_inf^(-decay)
    (requires decay > d for summability) or an explicit even table.  All
    Hamiltonian and kernel computations use the truncated coupling; the
    discarded l1 tail is certified analytically for the power-law family and
    is zero for finite tables.
    """

    beta: float
    dimension: int = 1
    truncation_radius: int = 4
    amplitude: float = 1.0
    decay: Optional[float] = None  # power-law exponent s; None => table
    table: Optional[Tuple[Tuple[Offset, float], ...]] = None

    def __post_init__(self):
        if self.beta < 0:
            raise ValidationError("beta must be nonnegative")
        if self.truncation_radius < 1:
            raise ValidationError("truncation_radius must be >= 1")
        if self.decay is None and self.table is None:
            raise ValidationError("long-range potential needs a decay family or a table")
        if self.decay is not None and self.decay <= self.dimension:
            raise ValidationError(
                f"power-law decay s={self.decay} is not summable in d={self.dimension} (needs s > d)"
            )
        if self.table is not None:
            lookup = dict(self.table)
            for off, val in self.table:
                if norm_1(off) == 0 and val != 0.0:
                    raise ValidationError("J(0) must vanish")
                neg = tuple(-c for c in off)
                if lookup.get(neg, None) != val:
                    raise ValidationError("coupling table must be even")

    kind = "long_range"

    @property
    def alphabet(self) -> Tuple[int, ...]:
        return (-1, +1)

    def interaction_range(self) -> int:
        return self.truncation_radius

    def is_truncated(self) -> bool:
        return self.decay is not None

    def raw_coupling(self, offset: Offset) -> float:
        if all(c == 0 for c in offset):
            return 0.0
        if self.table is not None:
            return dict(self.table).get(offset, 0.0)
        return self.amplitude * float(norm_inf(offset)) ** (-self.decay)

    def pair_offsets(self) -> Tuple[Offset, ...]:
        r = self.truncation_radius
        offs = []
        for off in itertools.product(range(-r, r + 1), repeat=self.dimension):
            if any(c != 0 for c in off) and self.raw_coupling(off) != 0.0:
                offs.append(off)
        return tuple(offs)

    def pair_coupling(self, offset: Offset) -> float:
        if norm_inf(offset) > self.truncation_radius:
            return 0.0
        return self.raw_coupling(offset)

    def pair_term(self, s1: int, s2: int, offset: Offset) -> float:
        return -self.beta * self.pair_coupling(offset) * s1 * s2

    def field_term(self, s: int) -> float:
        return 0.0

    def _shell_count(self, k: int) -> int:
        d = self.dimension
        return (2 * k + 1) ** d - (2 * k - 1) ** d

    def coupling_l1_truncated(self) -> float:
        """sum of |J(x)| over 0 < ||x||_inf <= truncation_radius."""
        return sum(abs(self.raw_coupling(off)) for off in self.pair_offsets())

    def coupling_l1_tail(self) -> float:
        """Certified upper bound on sum of |J(x)| over ||x||_inf > truncation_radius."""
        if self.decay is None:
            return 0.0
        d, s, R = self.dimension, self.decay, self.truncation_radius
        # shell(k) <= 2d(2k+1)^(d-1) <= 2d 3^(d-1) k^(d-1), then an integral bound.
        c = abs(self.amplitude) * 2 * d * 3 ** (d - 1)
        return c * R ** (d - s) / (s - d)

    def triple_norm(self) -> float:
        return self.beta * self.coupling_l1_truncated()

    def triple_norm_tail(self) -> float:
        return self.beta * self.coupling_l1_tail()


def triple_norm(phi) -> float:
    """|||Phi||| = sum over finite sets containing the origin of sup |Phi|.

    For truncated long-range families this is the truncated value; the
    certified remainder is available via `triple_norm_tail`.
    """
    return phi.triple_norm()


def triple_norm_tail(phi) -> float:
    return phi.triple_norm_tail()


def interaction_range(phi) -> int:
    """1 for the nearest-neighbor families, the truncation radius otherwise."""
    return phi.interaction_range()


def mean_energy(phi, config) -> float:
    """Mean energy per site f_Phi(w) = sum over sets containing 0 of Phi/|set|.

    Requires window-plus-boundary coverage of the origin's interaction
    neighborhood.  Pair terms contribute with weight 1/2.
    """
    d = phi.dimension
    o = (0,) * d
    s0 = config.value_or_boundary(o)
    if s0 is None:
        raise DomainError("mean_energy needs a value at the origin")
    total = phi.field_term(s0)
    for off in phi.pair_offsets():
        sy = config.value_or_boundary(off)
        if sy is None:
            raise DomainError(f"mean_energy needs a value at {off} (free boundary insufficient)")
        total += phi.pair_term(s0, sy, off) / 2.0
    return total


def fphi_oscillation_bound(phi) -> float:
    """Certified l1 bound on the oscillation of f_Phi: 2 |||Phi|||."""
    return 2.0 * phi.triple_norm()


def with_beta(phi, beta: float):
    """Same interaction shape at a different inverse temperature."""
    if phi.kind == "ising":
        return IsingPotential(beta, phi.coupling, phi.field, phi.dimension)
    if phi.kind == "potts":
        return PottsPotential(beta, phi.coupling, phi.colors, phi.dimension)
    return LongRangePairPotential(
        beta, phi.dimension, phi.truncation_radius, phi.amplitude, phi.decay, phi.table
    )


def potential_difference_norm(phi, psi) -> float:
    """|||Phi - Psi||| for two potentials of the same family and shape."""
    if phi.kind != psi.kind or phi.dimension != psi.dimension:
        raise DomainError("potential difference norm needs matching families")
    if phi.kind == "ising":
        dh = abs(phi.beta * phi.field - psi.beta * psi.field)
        dj = abs(phi.beta * phi.coupling - psi.beta * psi.coupling)
        return dh + 2 * phi.dimension * dj
    if phi.kind == "potts":
        dj = abs(phi.beta * phi.coupling - psi.beta * psi.coupling)
        return 2 * phi.dimension * dj
    offs = set(phi.pair_offsets()) | set(psi.pair_offsets())
    return sum(
        abs(phi.beta * phi.pair_coupling(o) - psi.beta * psi.pair_coupling(o)) for o in offs
    )
