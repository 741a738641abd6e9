"""Hierarchically ordered epsilon-nets on S^{C_n}, their counting data, and
the expected-Kantorovich-distance bound obtained from them.

The net at depth n is all of S^{C_n}, anchored at a reference pattern and
partitioned by the first-disagreement shell: list k (1-based, k = 1..n+1)
holds the patterns that agree with the anchor on C_{n-k} and differ somewhere
on the shell of radius n-k+1 (C_j is empty for j < 0, so list n+1 collects the
patterns that differ at the origin).  With zero-based labels g = k-1 and the
anchor carrying label 0, any two patterns with distinct labels are at distance
exactly 2^-(n - max(g, g')); within one label the distance can only be
smaller, except at label 0 where it is exactly 2^-n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import DomainError, SizeError, ValidationError
from .lattice import Pattern, Window, cube, norm_inf
from .specification import enumerate_spins

NET_ENUM_CAP = 1 << 16


def cube_size(n: int, d: int) -> int:
    return (2 * n + 1) ** d if n >= 0 else 0


@dataclass(frozen=True)
class NetLevelCounts:
    """Counting data for the depth-n net.

    P[k-1] = |S|^(|C_n| - |C_{n-k}|) for k = 1..n are the paper-style
    cumulative level bounds entering the function-count product; log_F_eps is
    the standard upper bound K_eps = (n+1) + sum_k (k+1) P(n,k); log_F_exact is
    the exact logarithm of the product (2^n + 1) prod_k (2^k + 1)^{P(n,k)};
    group_sizes are the exact partition sizes by first-disagreement shell
    (outermost first), which satisfy sum(group_sizes) + 1 = |S|^|C_n|.
    """

    n: int
    alphabet_size: int
    dimension: int
    epsilon: float
    P: Tuple[int, ...]
    log_F_eps: float
    log_F_exact: float
    group_sizes: Tuple[int, ...]


def net_counts(n: int, alphabet_size: int, d: int) -> NetLevelCounts:
    if n < 0 or alphabet_size < 2 or d < 1:
        raise ValidationError("net_counts needs n >= 0, |S| >= 2, d >= 1")
    s = alphabet_size
    cn = cube_size(n, d)
    P = tuple(s ** (cn - cube_size(n - k, d)) for k in range(1, n + 1))
    log_f_eps = (n + 1) + sum((k + 1) * P[k - 1] for k in range(1, n + 1))
    log_f_exact = math.log(2**n + 1) + sum(
        P[k - 1] * math.log(2**k + 1) for k in range(1, n + 1)
    )
    groups = []
    for m in range(n, -1, -1):  # first-disagreement shell, outermost first
        shell = cube_size(m, d) - cube_size(m - 1, d)
        above = cn - cube_size(m, d)
        groups.append((s**shell - 1) * s**above)
    return NetLevelCounts(
        n=n,
        alphabet_size=s,
        dimension=d,
        epsilon=2.0**-n,
        P=P,
        log_F_eps=float(log_f_eps),
        log_F_exact=float(log_f_exact),
        group_sizes=tuple(groups),
    )


@dataclass(frozen=True)
class EpsilonNet:
    """The ordered net: anchor first, then the first-disagreement groups."""

    n: int
    window: Window
    anchor: Pattern
    lists: Tuple[Tuple[Pattern, ...], ...]  # index k-1 <-> list k (k = 1..n+1)

    @property
    def size(self) -> int:
        return 1 + sum(len(l) for l in self.lists)

    def all_patterns(self) -> List[Pattern]:
        out = [self.anchor]
        for l in self.lists:
            out.extend(l)
        return out


def build_epsilon_net(
    n: int,
    alphabet: Sequence[int],
    d: int,
    anchor_values: Optional[Sequence[int]] = None,
    cap: int = NET_ENUM_CAP,
) -> EpsilonNet:
    """Enumerate S^{C_n} grouped by first disagreement with the anchor."""
    window = cube(n, d)
    q = len(alphabet)
    total = q**window.size
    if total > cap:
        raise SizeError(f"net of {total} patterns exceeds cap {cap}")
    spins = enumerate_spins(alphabet, window.size)
    if anchor_values is None:
        anchor_arr = np.full(window.size, alphabet[0], dtype=spins.dtype)
    else:
        anchor_arr = np.asarray(anchor_values, dtype=spins.dtype)
        if anchor_arr.shape != (window.size,):
            raise DomainError("anchor must assign every site of C_n")
    norms = np.array([norm_inf(s) for s in window.sites])
    lists: List[List[Pattern]] = [[] for _ in range(n + 1)]
    anchor = Pattern(window, tuple(int(v) for v in anchor_arr))
    for row in spins:
        diff = row != anchor_arr
        if not diff.any():
            continue
        m = int(norms[diff].min())  # first-disagreement shell
        k = n - m + 1  # list index, 1-based
        lists[k - 1].append(Pattern(window, tuple(int(v) for v in row)))
    return EpsilonNet(n, window, anchor, tuple(tuple(l) for l in lists))


@dataclass(frozen=True)
class ExpectedDistanceBound:
    value: float
    epsilon: float
    depth: int
    p: Optional[int]  # moment order when applicable
    asymptotic_value: float
    kind: str  # gaussian | moment


def _asymptotic_gaussian(card: int, alphabet_size: int, d: int) -> float:
    if d == 1:
        return card ** (-0.5 / (1.0 + math.log(alphabet_size)))
    return math.exp(-0.5 * (math.log(card) / math.log(alphabet_size)) ** (1.0 / d))


def _asymptotic_moment(card: int, alphabet_size: int, d: int, kappa: float) -> float:
    alpha = (2**d) * math.log(alphabet_size)
    if d == 1:
        return card ** (-1.0 / (2.0 * (alpha * kappa + 1.0)))
    return math.exp(-((math.log(card) / (2.0 * alpha * kappa)) ** (1.0 / d)))


def expected_distance_bound(
    card_lambda: int,
    D1: float,
    alphabet_size: int,
    d: int,
    n_max: int = 40,
) -> ExpectedDistanceBound:
    """Gaussian-case bound B = 2 inf over dyadic eps of
    (eps + sqrt(D1 K_eps / |Lambda|)), minimized over net depths."""
    if D1 <= 0:
        raise ValidationError("D1 must be positive")
    if card_lambda < 1:
        raise ValidationError("card_lambda must be positive")
    best = None
    for n in range(0, n_max + 1):
        k_eps = net_counts(n, alphabet_size, d).log_F_eps
        val = 2.0 * (2.0**-n + math.sqrt(D1 * k_eps / card_lambda))
        if best is None or val < best[0]:
            best = (val, n)
        if k_eps > 50 * card_lambda:  # terms only grow from here
            break
    value, n_star = best
    return ExpectedDistanceBound(
        value=value,
        epsilon=2.0**-n_star,
        depth=n_star,
        p=None,
        asymptotic_value=_asymptotic_gaussian(card_lambda, alphabet_size, d),
        kind="gaussian",
    )


def expected_distance_bound_moment(
    card_lambda: int,
    kappa: float,
    alphabet_size: int,
    d: int,
    n_max: int = 40,
    p_max: int = 60,
) -> ExpectedDistanceBound:
    """Moment-case bound: eps + |F_eps|^(1/2p) (eps + C_2p^(1/2p)/sqrt(|Lambda|))
    with C_2p = p^(2 kappa p), minimized over dyadic eps and p."""
    if kappa < 0.5:
        raise ValidationError("kappa must be >= 1/2")
    best = None
    sqrt_card = math.sqrt(card_lambda)
    for n in range(0, n_max + 1):
        log_f = net_counts(n, alphabet_size, d).log_F_eps
        eps = 2.0**-n
        for p in range(1, p_max + 1):
            log_blowup = log_f / (2.0 * p)
            if log_blowup > 700:
                continue
            c2p_root = p ** kappa  # (p^{2 kappa p})^{1/2p}
            val = eps + math.exp(log_blowup) * (eps + c2p_root / sqrt_card)
            if best is None or val < best[0]:
                best = (val, n, p)
        if net_counts(n, alphabet_size, d).log_F_eps > 1400 * p_max:
            break
    value, n_star, p_star = best
    return ExpectedDistanceBound(
        value=value,
        epsilon=2.0**-n_star,
        depth=n_star,
        p=p_star,
        asymptotic_value=_asymptotic_moment(card_lambda, alphabet_size, d, kappa),
        kind="moment",
    )
