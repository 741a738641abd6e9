"""Sites, windows, configurations, patterns, and the 2^-k metric.

Everything here is an immutable value; operations are pure. All metric
computations act on a fixed finite window: two configurations that agree on
their common window are at distance zero (finite-window convention).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Iterable, Mapping, Optional, Tuple

from .errors import DomainError, SizeError

Site = Tuple[int, ...]

# Guard against accidentally materializing astronomically large windows.
DEFAULT_SITE_LIMIT = 1 << 27


def norm_inf(x: Site) -> int:
    return max(abs(c) for c in x)


def norm_1(x: Site) -> int:
    return sum(abs(c) for c in x)


def site_add(x: Site, y: Site) -> Site:
    return tuple(a + b for a, b in zip(x, y))


def site_sub(x: Site, y: Site) -> Site:
    return tuple(a - b for a, b in zip(x, y))


def origin(d: int) -> Site:
    return (0,) * d


@dataclass(frozen=True)
class Window:
    """An ordered finite set of lattice sites.

    Sites are kept in canonical (lexicographic) order; serialization and
    enumeration rely on that order being stable.
    """

    dimension: int
    sites: Tuple[Site, ...]
    kind: str = "general"  # "cube" for centered cubes, else "general"
    radius: Optional[int] = None  # n for kind == "cube"

    def __post_init__(self):
        if self.dimension < 1:
            raise DomainError("window dimension must be >= 1")
        if len(set(self.sites)) != len(self.sites):
            raise DomainError("window contains duplicate sites")
        index = {s: i for i, s in enumerate(self.sites)}
        object.__setattr__(self, "_index", index)

    @property
    def size(self) -> int:
        return len(self.sites)

    def __contains__(self, site: Site) -> bool:
        return site in self._index

    def index_of(self, site: Site) -> int:
        try:
            return self._index[site]
        except KeyError:
            raise DomainError(f"site {site} not in window")

    def contains_window(self, other: "Window") -> bool:
        return all(s in self._index for s in other.sites)

    def diameter(self) -> int:
        return max(norm_inf(s) for s in self.sites)


@lru_cache(maxsize=None)
def cube(n: int, d: int, limit: int = DEFAULT_SITE_LIMIT) -> Window:
    """The centered cube C_n = {x : ||x||_inf <= n} in canonical order."""
    if n < 0 or d < 1:
        raise DomainError("cube requires n >= 0 and d >= 1")
    count = (2 * n + 1) ** d
    if count > limit:
        raise SizeError(f"cube(n={n}, d={d}) has {count} sites, above limit {limit}")
    sites = tuple(itertools.product(range(-n, n + 1), repeat=d))
    return Window(dimension=d, sites=sites, kind="cube", radius=n)


def general_window(sites: Iterable[Site]) -> Window:
    sites = tuple(sites)
    if not sites:
        raise DomainError("window must be nonempty")
    d = len(sites[0])
    return Window(dimension=d, sites=tuple(sorted(sites)))


def rect_window(mins: Site, maxs: Site, limit: int = DEFAULT_SITE_LIMIT) -> Window:
    """Axis-aligned box {x : mins_i <= x_i <= maxs_i} in canonical order."""
    if len(mins) != len(maxs):
        raise DomainError("mins and maxs must have the same dimension")
    if any(a > b for a, b in zip(mins, maxs)):
        raise DomainError("rect_window needs mins <= maxs")
    count = 1
    for a, b in zip(mins, maxs):
        count *= b - a + 1
    if count > limit:
        raise SizeError(f"rect_window would hold {count} sites, above limit {limit}")
    sites = tuple(itertools.product(*[range(a, b + 1) for a, b in zip(mins, maxs)]))
    d = len(mins)
    return Window(dimension=d, sites=sites, kind="rect")


def centered_rect(side: int, d: int) -> Window:
    """A side^d box as close to centered as possible (exact cube for odd side)."""
    lo = -(side - 1) // 2 if side % 2 == 1 else -(side // 2 - 1)
    hi = lo + side - 1
    return rect_window((lo,) * d, (hi,) * d)


def bounding_box(window: Window) -> Tuple[Site, Site]:
    mins = tuple(min(s[i] for s in window.sites) for i in range(window.dimension))
    maxs = tuple(max(s[i] for s in window.sites) for i in range(window.dimension))
    return mins, maxs


def is_full_box(window: Window) -> bool:
    mins, maxs = bounding_box(window)
    count = 1
    for a, b in zip(mins, maxs):
        count *= b - a + 1
    return count == window.size


def pad_box(window: Window, margin: int) -> Window:
    """The bounding box of `window` grown by `margin` layers on every side."""
    if margin < 0:
        raise DomainError("margin must be nonnegative")
    mins, maxs = bounding_box(window)
    return rect_window(
        tuple(a - margin for a in mins), tuple(b + margin for b in maxs)
    )


@dataclass(frozen=True)
class Boundary:
    """Boundary condition outside a configuration's window.

    kind "constant" fills every exterior site with `value`; "fixed" reads
    from an explicit pattern (missing sites are an error); "free" supplies
    nothing, so callers must drop cross terms.
    """

    kind: str
    value: Optional[int] = None
    pattern: Optional[Tuple[Tuple[Site, int], ...]] = None

    def value_at(self, site: Site) -> Optional[int]:
        if self.kind == "constant":
            return self.value
        if self.kind == "free":
            return None
        if self.kind == "periodic":
            raise DomainError(
                "periodic boundaries are a sampler-only approximation mode; "
                "exact finite-volume computations use free or fixed boundaries"
            )
        lookup = dict(self.pattern or ())
        if site not in lookup:
            raise DomainError(f"fixed boundary has no value at {site}")
        return lookup[site]

    def shifted(self, x: Site) -> "Boundary":
        if self.kind != "fixed":
            return self
        return Boundary("fixed", pattern=tuple((site_add(s, x), v) for s, v in self.pattern))

    def label(self) -> str:
        if self.kind == "constant":
            return "all_plus" if self.value == 1 else ("all_minus" if self.value == -1 else f"constant({self.value})")
        return self.kind


ALL_PLUS = Boundary("constant", value=+1)
ALL_MINUS = Boundary("constant", value=-1)
FREE = Boundary("free")
PERIODIC = Boundary("periodic")


def fixed_boundary(pattern: Mapping[Site, int]) -> Boundary:
    return Boundary("fixed", pattern=tuple(sorted(pattern.items())))


def constant_boundary(value: int) -> Boundary:
    return Boundary("constant", value=value)


@dataclass(frozen=True)
class Configuration:
    """Spin values on a window plus a boundary descriptor.

    `values` is aligned with `window.sites` (canonical order).
    """

    window: Window
    values: Tuple[int, ...]
    boundary: Boundary = FREE

    def __post_init__(self):
        if len(self.values) != self.window.size:
            raise DomainError("values must cover every window site")

    def value(self, site: Site) -> int:
        """Spin at a window site (boundary is not consulted)."""
        return self.values[self.window.index_of(site)]

    def value_or_boundary(self, site: Site) -> Optional[int]:
        """Spin at any site, reading the boundary outside the window."""
        if site in self.window:
            return self.values[self.window.index_of(site)]
        return self.boundary.value_at(site)

    def as_dict(self) -> Dict[Site, int]:
        return dict(zip(self.window.sites, self.values))

    def restrict(self, sub: Window) -> "Configuration":
        vals = tuple(self.value(s) for s in sub.sites)
        return Configuration(sub, vals, self.boundary)


@dataclass(frozen=True)
class Pattern:
    """A fully specified assignment of spins on a support window."""

    support: Window
    values: Tuple[int, ...]

    def __post_init__(self):
        if self.support.size == 0:
            raise DomainError("pattern support must be nonempty")
        if len(self.values) != self.support.size:
            raise DomainError("pattern values must be total on the support")

    def value(self, site: Site) -> int:
        return self.values[self.support.index_of(site)]


def pattern_from_config(c: Configuration, support: Window) -> Pattern:
    return Pattern(support, tuple(c.value(s) for s in support.sites))


def config_distance(a: Configuration, b: Configuration) -> float:
    """2^-k with k the smallest ||x||_inf over disagreement sites; 0 if equal."""
    if a.window is not b.window and a.window != b.window:
        raise DomainError("config_distance requires a common window")
    k = None
    for site, va, vb in zip(a.window.sites, a.values, b.values):
        if va != vb:
            n = norm_inf(site)
            if k is None or n < k:
                k = n
    if k is None:
        return 0.0
    return 2.0 ** (-k)


def hamming(a: Configuration, b: Configuration, window: Window) -> int:
    """Number of sites of `window` where a and b disagree."""
    if not (a.window.contains_window(window) and b.window.contains_window(window)):
        raise DomainError("hamming window must be contained in both configurations")
    return sum(1 for s in window.sites if a.value(s) != b.value(s))


def shift(c: Configuration, x: Site) -> Configuration:
    """(T_x w)_y = w_{y-x}; sites pulled from outside the window read the boundary."""
    if len(x) != c.window.dimension:
        raise DomainError("shift vector dimension mismatch")
    vals = []
    for y in c.window.sites:
        src = site_sub(y, x)
        v = c.value_or_boundary(src)
        if v is None:
            raise DomainError(f"shift by {x} needs a value at {src} but the boundary is free")
        vals.append(v)
    return Configuration(c.window, tuple(vals), c.boundary.shifted(x))


def occurs_at(pattern: Pattern, config: Configuration, x: Site) -> bool:
    """Does a translate of `pattern` by x occur in `config` (window values only)?"""
    for y in pattern.support.sites:
        target = site_add(y, x)
        if target not in config.window:
            return False
        if config.value(target) != pattern.value(y):
            return False
    return True


def waiting_time(pattern: Pattern, omega: Configuration, k_max: int) -> Optional[int]:
    """First-occurrence volume W_n = (2k+1)^d for the smallest cube C_k of
    `omega` containing a congruent copy of `pattern`; None if absent up to k_max.

    The pattern support must be a centered cube C_n.  Scans k = n..k_max and all
    translates whose support fits inside C_k (direct comparison, desk scale).
    """
    if pattern.support.kind != "cube" or pattern.support.radius is None:
        raise DomainError("waiting_time requires a pattern supported on a cube C_n")
    n = pattern.support.radius
    d = pattern.support.dimension
    if k_max < n:
        return None
    needed = cube(k_max, d)
    if not omega.window.contains_window(needed):
        raise DomainError(f"omega must cover C_{k_max}")
    for k in range(n, k_max + 1):
        r = k - n
        for x in itertools.product(range(-r, r + 1), repeat=d):
            if r > 0 and norm_inf(x) < r:
                continue  # already tested at a smaller k
            if occurs_at(pattern, omega, x):
                return (2 * k + 1) ** d
    return None
