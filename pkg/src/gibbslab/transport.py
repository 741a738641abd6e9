"""Optimal transport on configuration space and on the real line.

Kantorovich distances between finitely supported measures are solved as exact
min-cost transportation problems (successive shortest augmenting paths with
node potentials; dense Dijkstra).  Costs are exact machine numbers (dyadic
2^-k values or integer Hamming counts), so the optimum carries no LP-solver
tolerance, and the final potentials certify optimality through nonnegative
reduced costs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import norm

from .errors import DomainError, GibbsLabError, SizeError, ValidationError
from .lattice import Configuration, Window, norm_inf, site_add
from .specification import FiniteMeasure

TRANSPORT_ATOM_CAP = 2000


def min_cost_transport(
    supply: np.ndarray,
    demand: np.ndarray,
    cost: np.ndarray,
    certify: bool = True,
) -> Tuple[float, np.ndarray]:
    """Exact transportation optimum: returns (total cost, flow matrix).

    Successive shortest augmenting paths with potentials; terminates when the
    supply is exhausted.  With `certify`, complementary slackness is checked
    on exit.
    """
    a = np.asarray(supply, dtype=float).copy()
    b = np.asarray(demand, dtype=float).copy()
    cost = np.asarray(cost, dtype=float)
    n, m = cost.shape
    if len(a) != n or len(b) != m:
        raise DomainError("cost matrix shape must match supply/demand lengths")
    if abs(a.sum() - b.sum()) > 1e-9:
        raise DomainError("supply and demand must balance")
    if np.any(cost < 0):
        raise DomainError("costs must be nonnegative")

    flow = np.zeros((n, m))
    pot_u = np.zeros(n)
    pot_v = np.zeros(m)
    rem_a = a.copy()
    rem_b = b.copy()
    eps = 1e-15
    stop_mass = 1e-12 * max(1.0, float(a.sum()))
    max_phases = 200 * (n + m)
    phases = 0

    while rem_a.sum() > stop_mass:
        phases += 1
        if phases > max_phases:
            raise GibbsLabError("transport solver exceeded its phase budget")
        dist_u = np.where(rem_a > eps, 0.0, np.inf)
        dist_v = np.full(m, np.inf)
        done_u = np.zeros(n, dtype=bool)
        done_v = np.zeros(m, dtype=bool)
        par_v = np.full(m, -1, dtype=int)  # sink's parent source
        par_u = np.full(n, -1, dtype=int)  # source's parent sink (backward arc)
        target = -1
        while True:
            du_masked = np.where(done_u, np.inf, dist_u)
            dv_masked = np.where(done_v, np.inf, dist_v)
            iu = int(np.argmin(du_masked))
            iv = int(np.argmin(dv_masked))
            du, dv = du_masked[iu], dv_masked[iv]
            if not np.isfinite(min(du, dv)):
                break
            if du <= dv:
                done_u[iu] = True
                nd = du + cost[iu, :] + pot_u[iu] - pot_v
                upd = (~done_v) & (nd < dist_v - 1e-15)
                dist_v[upd] = nd[upd]
                par_v[upd] = iu
            else:
                done_v[iv] = True
                if rem_b[iv] > eps:
                    target = iv
                    break
                col = flow[:, iv]
                nd = dv - cost[:, iv] + pot_v[iv] - pot_u
                upd = (~done_u) & (col > eps) & (nd < dist_u - 1e-15)
                dist_u[upd] = nd[upd]
                par_u[upd] = iv
        if target < 0:
            raise GibbsLabError("transport solver found no augmenting path")
        dt = dist_v[target]
        pot_u += np.minimum(dist_u, dt)
        pot_v += np.minimum(dist_v, dt)

        # trace the path back to a root source, collecting the bottleneck
        path: List[Tuple[int, int, bool]] = []  # (source, sink, forward?)
        theta = rem_b[target]
        v = target
        while True:
            u = par_v[v]
            path.append((u, v, True))
            prev_sink = par_u[u]
            if prev_sink < 0:
                theta = min(theta, rem_a[u])
                root = u
                break
            theta = min(theta, flow[u, prev_sink])
            path.append((u, prev_sink, False))
            v = prev_sink
        if theta <= 0:
            raise GibbsLabError("degenerate augmentation in transport solver")
        for u, v, forward in path:
            if forward:
                flow[u, v] += theta
            else:
                flow[u, v] -= theta
        rem_a[root] -= theta
        rem_b[target] -= theta

    if certify:
        rc = cost + pot_u[:, None] - pot_v[None, :]
        if float(rc.min()) < -1e-8:
            raise GibbsLabError("optimality certificate failed (negative reduced cost)")
    return float(np.sum(flow * cost)), flow


def _site_norms(window: Window) -> np.ndarray:
    return np.array([norm_inf(s) for s in window.sites], dtype=float)


def config_distance_matrix(
    support_a: np.ndarray, support_b: np.ndarray, window: Window, chunk: int = 256
) -> np.ndarray:
    """Pairwise 2^-k distances between two support arrays on a common window."""
    norms = _site_norms(window)
    n, m = len(support_a), len(support_b)
    out = np.empty((n, m))
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        neq = support_a[start:stop, None, :] != support_b[None, :, :]
        masked = np.where(neq, norms[None, None, :], np.inf)
        kmin = masked.min(axis=2)
        out[start:stop] = np.where(np.isfinite(kmin), 2.0**-kmin, 0.0)
    return out


def hamming_distance_matrix(
    support_a: np.ndarray, support_b: np.ndarray, chunk: int = 256
) -> np.ndarray:
    n, m = len(support_a), len(support_b)
    out = np.empty((n, m))
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        neq = support_a[start:stop, None, :] != support_b[None, :, :]
        out[start:stop] = neq.sum(axis=2)
    return out


def _check_transport_pair(mu: FiniteMeasure, nu: FiniteMeasure, cap: int):
    if mu.window is None or nu.window is None:
        raise DomainError("transport needs configuration-valued measures")
    if mu.window != nu.window:
        raise DomainError("transport needs measures on a common window")
    if mu.size > cap or nu.size > cap:
        raise SizeError(f"support sizes {mu.size}, {nu.size} exceed cap {cap}")


def kantorovich_config(
    mu: FiniteMeasure, nu: FiniteMeasure, cap: int = TRANSPORT_ATOM_CAP
) -> float:
    """Exact Kantorovich distance with the 2^-k ground metric."""
    _check_transport_pair(mu, nu, cap)
    cost = config_distance_matrix(mu.support, nu.support, mu.window)
    value, _ = min_cost_transport(mu.weights, nu.weights, cost)
    return value


def dbar_hamming(
    mu: FiniteMeasure, nu: FiniteMeasure, cap: int = TRANSPORT_ATOM_CAP
) -> float:
    """Min-cost transport with (non-normalized) Hamming cost over all
    couplings.  This lower-bounds the shift-invariant-coupling distance, so
    transport-entropy upper bounds apply to it a fortiori."""
    _check_transport_pair(mu, nu, cap)
    cost = hamming_distance_matrix(mu.support, nu.support)
    value, _ = min_cost_transport(mu.weights, nu.weights, cost)
    return value


def empirical_measure(
    omega: Configuration, lam: Window, window_out: Window
) -> FiniteMeasure:
    """Uniform atoms at the window_out restrictions of the |Lambda| pull-back
    translates of omega, merged with multiplicity."""
    rows = []
    for x in lam.sites:
        vals = []
        for y in window_out.sites:
            v = omega.value_or_boundary(site_add(y, x))
            if v is None:
                raise DomainError("omega does not cover Lambda + window_out extent")
            vals.append(v)
        rows.append(vals)
    arr = np.asarray(rows, dtype=np.int8)
    uniq, counts = np.unique(arr, axis=0, return_counts=True)
    w = counts.astype(float) / counts.sum()
    return FiniteMeasure(uniq, w, window=window_out)


def real_measure(values: Sequence[float], weights: Optional[Sequence[float]] = None) -> FiniteMeasure:
    values = np.asarray(values, dtype=float)
    if weights is None:
        weights = np.full(len(values), 1.0 / len(values))
    # merge duplicates so the atom-distinctness invariant can hold
    uniq, inverse = np.unique(values, return_inverse=True)
    w = np.zeros(len(uniq))
    np.add.at(w, inverse, np.asarray(weights, dtype=float))
    return FiniteMeasure(uniq, w / w.sum())


@dataclass(frozen=True)
class GaussianDiscretization:
    measure: FiniteMeasure
    sigma: float
    points: int
    w1_error: float  # exact W1 distance to the continuous Gaussian


def discretize_gaussian(sigma2: float, points: int = 2048) -> GaussianDiscretization:
    """Equal-mass quantile discretization of G_{0, sigma^2} with its exact
    W1 discretization error."""
    if sigma2 < 0:
        raise ValidationError("variance must be nonnegative")
    sigma = math.sqrt(sigma2)
    if sigma == 0.0:
        return GaussianDiscretization(real_measure([0.0]), 0.0, 1, 0.0)
    qs = (np.arange(points) + 0.5) / points
    z_atoms = norm.ppf(qs)
    z_edges = norm.ppf(np.arange(points + 1) / points)
    # exact cellwise integral of |x - q| dG over [a, b] with atom q:
    # int x dG = sigma (pdf(z_lo) - pdf(z_hi)), int dG = cdf gap
    pdf_e = norm.pdf(z_edges)
    pdf_q = norm.pdf(z_atoms)
    cdf_e = norm.cdf(z_edges)
    cdf_q = norm.cdf(z_atoms)
    m_left = sigma * (pdf_e[:-1] - pdf_q)
    p_left = cdf_q - cdf_e[:-1]
    m_right = sigma * (pdf_q - pdf_e[1:])
    p_right = cdf_e[1:] - cdf_q
    q = z_atoms * sigma
    err = float(np.sum((q * p_left - m_left) + (m_right - q * p_right)))
    mu = FiniteMeasure(q, np.full(points, 1.0 / points))
    return GaussianDiscretization(mu, sigma, points, err)


def kantorovich_real(mu: FiniteMeasure, nu: FiniteMeasure) -> float:
    """Exact 1-D Wasserstein-1 distance: the integral of |F_mu - F_nu|."""
    if mu.window is not None or nu.window is not None:
        raise DomainError("kantorovich_real expects real-valued measures")
    pts = np.concatenate([mu.support, nu.support])
    w1 = np.concatenate([mu.weights, np.zeros(nu.size)])
    w2 = np.concatenate([np.zeros(mu.size), nu.weights])
    order = np.argsort(pts, kind="mergesort")
    pts, w1, w2 = pts[order], w1[order], w2[order]
    cdf_gap = np.cumsum(w1 - w2)[:-1]
    return float(np.sum(np.abs(cdf_gap) * np.diff(pts)))


@dataclass
class FatteningSet:
    """Hamming epsilon-fattening of a base pattern set on a window."""

    window: Window
    base: np.ndarray  # (M, |window|) int8
    epsilon: float

    @property
    def radius(self) -> int:
        return int(math.floor(self.epsilon * self.window.size + 1e-9))

    def min_distance(self, support: np.ndarray, chunk: int = 512) -> np.ndarray:
        n = len(support)
        out = np.empty(n)
        for start in range(0, n, chunk):
            stop = min(start + chunk, n)
            neq = support[start:stop, None, :] != self.base[None, :, :]
            out[start:stop] = neq.sum(axis=2).min(axis=1)
        return out

    def contains_values(self, values: Sequence[int]) -> bool:
        row = np.asarray(values, dtype=self.base.dtype)[None, :]
        return bool(self.min_distance(row)[0] <= self.radius)

    def measure(self, mu: FiniteMeasure) -> float:
        if mu.window != self.window:
            raise DomainError("measure window mismatch")
        dist = self.min_distance(mu.support)
        return float(mu.weights[dist <= self.radius].sum())

    def sample_frequency(self, support: np.ndarray) -> float:
        dist = self.min_distance(support)
        return float(np.mean(dist <= self.radius))


def fatten(window: Window, base: np.ndarray, epsilon: float) -> FatteningSet:
    base = np.asarray(base)
    if base.ndim != 2 or base.shape[1] != window.size:
        raise DomainError("base patterns must be (M, |window|)")
    if len(base) == 0:
        raise DomainError("base pattern set must be nonempty")
    if epsilon < 0:
        raise ValidationError("epsilon must be nonnegative")
    return FatteningSet(window, base, epsilon)
