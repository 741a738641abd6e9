"""The desk-scale experiments: each one estimates (or enumerates exactly) the
deviation statistics of one application and overlays the applicable
concentration bound.

Verdict policy: a grid point is "violated" only when the Wilson 95% lower
confidence bound exceeds the theory curve (upper bounds), or the upper
confidence bound falls below it (lower bounds); exact-enumeration reports
carry degenerate intervals.  Expectations inside bound formulas are replaced
by empirical means, and verdicts are widened by the mean's confidence
halfwidth so that centering noise cannot manufacture violations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import gammaln

from .dobrushin import (
    BoundParams,
    dobrushin_coefficient,
    gaussian_tail,
    gcb_constant,
    moment_tail,
    stretched_tail,
)
from .errors import DomainError, RegimeError, ValidationError
from .lattice import (
    FREE,
    Boundary,
    Configuration,
    Window,
    bounding_box,
    cube,
    pad_box,
)
from .observables import Observable
from .potentials import potential_difference_norm, triple_norm
from .sampler import ChainConfig, replica_rng, sample_values
from .specification import (
    FiniteMeasure,
    entropy_and_relative_entropy,
    finite_volume_measure,
    marginal_via_split,
)
from .transport import (
    dbar_hamming,
    discretize_gaussian,
    empirical_measure,
    fatten,
    kantorovich_config,
    kantorovich_real,
    real_measure,
)

Z95 = 1.959963984540054


def wilson_ci(successes: float, total: int, z: float = Z95) -> Tuple[float, float]:
    """Wilson 95% interval for a binomial proportion."""
    if total <= 0:
        raise ValidationError("wilson_ci needs a positive sample count")
    p = successes / total
    denom = 1.0 + z * z / total
    center = (p + z * z / (2 * total)) / denom
    half = z * math.sqrt(p * (1 - p) / total + z * z / (4 * total * total)) / denom
    return max(center - half, 0.0), min(center + half, 1.0)


def verdict_for(
    emp: float, lo: float, hi: float, bound: float, direction: str = "upper"
) -> str:
    if direction == "upper":
        if lo > bound:
            return "violated"
        return "respected" if emp <= bound else "inconclusive-CI"
    if hi < bound:
        return "violated"
    return "respected" if emp >= bound else "inconclusive-CI"


def default_u_grid(abs_devs: np.ndarray, points: int = 16) -> np.ndarray:
    """Log-spaced grid from the median deviation to the 1 - 10/N quantile."""
    devs = np.asarray(abs_devs, dtype=float)
    n = len(devs)
    if n < 20:
        raise ValidationError("too few samples for an automatic u-grid")
    lo = float(np.quantile(devs, 0.5))
    hi = float(np.quantile(devs, 1.0 - 10.0 / n))
    if hi <= 0:
        hi = float(devs.max()) or 1.0
    if lo <= 0:
        positive = devs[devs > 0]
        lo = float(positive.min()) if len(positive) else hi / 100.0
    hi = max(hi, lo * 1.0001)
    return np.geomspace(lo, hi, points)


@dataclass
class TailReport:
    experiment: str
    model: Dict[str, object]
    run_info: Dict[str, object]
    bound_kind: str
    bound_direction: str
    u_grid: np.ndarray
    empirical: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    bound_values: np.ndarray
    verdicts: List[str]
    seed: Optional[int]
    n_samples: Optional[int]
    extras: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        for emp, lo, hi in zip(self.empirical, self.ci_lo, self.ci_hi):
            if not (lo - 1e-12 <= emp <= hi + 1e-12):
                raise ValidationError("confidence interval must contain the estimate")
            if not (0.0 <= emp <= 1.0):
                raise ValidationError("tail frequencies must lie in [0, 1]")

    @property
    def violated(self) -> bool:
        return any(v == "violated" for v in self.verdicts)

    def rows(self) -> List[Dict[str, object]]:
        out = []
        for i, u in enumerate(self.u_grid):
            out.append(
                {
                    "u": float(u),
                    "emp_tail": float(self.empirical[i]),
                    "ci_lo": float(self.ci_lo[i]),
                    "ci_hi": float(self.ci_hi[i]),
                    "bound": float(self.bound_values[i]),
                    "bound_kind": self.bound_kind,
                    "verdict": self.verdicts[i],
                }
            )
        return out


def model_descriptor(phi) -> Dict[str, object]:
    out = {"kind": phi.kind, "beta": phi.beta, "dimension": phi.dimension}
    if phi.kind == "ising":
        out.update({"coupling": phi.coupling, "field": phi.field})
    elif phi.kind == "potts":
        out.update({"coupling": phi.coupling, "colors": phi.colors})
    else:
        out.update(
            {
                "truncation_radius": phi.truncation_radius,
                "amplitude": phi.amplitude,
                "decay": phi.decay,
            }
        )
    return out


def _tail_report_from_samples(
    experiment: str,
    phi,
    values: np.ndarray,
    bound_fn: Callable[[float], float],
    bound_kind: str,
    u_grid: Optional[np.ndarray],
    seed: int,
    run_info: Dict[str, object],
    extras: Dict[str, object],
) -> TailReport:
    """Common tail machinery: center at the empirical mean, estimate
    P(|dev| >= u), widen verdicts by the mean-estimate halfwidth."""
    n = len(values)
    mean = float(np.mean(values))
    se_mean = float(np.std(values, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    devs = np.abs(values - mean)
    grid = default_u_grid(devs) if u_grid is None else np.asarray(u_grid, dtype=float)
    emp, lo, hi, bounds, verdicts = [], [], [], [], []
    widen = Z95 * se_mean
    for u in grid:
        k = int(np.sum(devs >= u))
        p = k / n
        c_lo, c_hi = wilson_ci(k, n)
        b = bound_fn(float(u))
        b_widened = bound_fn(max(float(u) - widen, 0.0)) if widen > 0 else b
        v = verdict_for(p, c_lo, c_hi, max(b, 0.0), "upper")
        if v == "violated" and c_lo <= b_widened:
            v = "inconclusive-CI"
        emp.append(p)
        lo.append(c_lo)
        hi.append(c_hi)
        bounds.append(b)
        verdicts.append(v)
    extras = dict(extras)
    extras.update({"mean": mean, "se_mean": se_mean, "widen": widen})
    return TailReport(
        experiment=experiment,
        model=model_descriptor(phi),
        run_info=run_info,
        bound_kind=bound_kind,
        bound_direction="upper",
        u_grid=grid,
        empirical=np.array(emp),
        ci_lo=np.array(lo),
        ci_hi=np.array(hi),
        bound_values=np.array(bounds),
        verdicts=verdicts,
        seed=seed,
        n_samples=n,
        extras=extras,
    )


def _derived_gaussian_D(phi) -> Tuple[float, float]:
    report = dobrushin_coefficient(phi)
    if not report.in_uniqueness:
        raise RegimeError(
            f"Gaussian bound requested outside the uniqueness regime (c={report.total})"
        )
    c = report.total
    return gcb_constant(c), c


def _sum_bound_fn(phi, vol: int, osc_l1: float, bound_params: Optional[BoundParams]):
    """Tail bound for |S f / vol - mean| >= u with ||delta(Sf)||_2^2 <= vol osc_l1^2."""
    osc_l2 = math.sqrt(vol) * osc_l1
    if bound_params is None:
        D, c = _derived_gaussian_D(phi)
        fn = lambda u: gaussian_tail(D, osc_l2, u * vol)
        return fn, "gaussian", {"dobrushin_c": c, "D": D, "osc_l1": osc_l1}
    if bound_params.kind == "gaussian":
        fn = lambda u: gaussian_tail(bound_params.D, osc_l2, u * vol)
        return fn, "gaussian", {"D": bound_params.D, "provenance": bound_params.provenance}
    if bound_params.kind == "stretched":
        fn = lambda u: stretched_tail(bound_params.rho, bound_params.c_rho, osc_l2, u * vol)
        return fn, "stretched", {
            "rho": bound_params.rho,
            "c_rho": bound_params.c_rho,
            "provenance": bound_params.provenance,
        }
    fn = lambda u: moment_tail(bound_params.C2p, bound_params.p, osc_l2, u * vol)
    return fn, "moment", {
        "p": bound_params.p,
        "C2p": bound_params.C2p,
        "provenance": bound_params.provenance,
    }


def _window_columns(box: Window, lam: Window) -> np.ndarray:
    return np.array([box.index_of(s) for s in lam.sites])


def collect_chain_matrix(
    phi,
    box: Window,
    boundary: Boundary,
    master_seed: int,
    replica_count: int,
    emit_per_replica: int,
    burn_in: Optional[int],
    thin: int,
    sweep_order: str = "auto",
) -> np.ndarray:
    """Stack emitted value arrays into an (n_samples, |box|) int8 matrix."""
    if sweep_order == "auto":
        from .sampler import _engine_applicable

        sweep_order = "checkerboard" if _engine_applicable(phi, box) else "systematic"
    cfg = ChainConfig(
        window=box,
        boundary=boundary,
        sweep_order=sweep_order,
        burn_in_sweeps=burn_in,
        thin_sweeps=thin,
        master_seed=master_seed,
        replica_count=replica_count,
    )
    rows = [vals for _, vals in sample_values(phi, cfg, emit_per_replica)]
    return np.stack(rows)


def exact_iid_magnetization_tail(
    vol: int, u_grid: Sequence[float]
) -> Tuple[np.ndarray, np.ndarray]:
    """Exact two-sided binomial tails P(|M| >= u sqrt(vol)) for iid +-1 spins,
    with the product-measure Hoeffding bound 2 exp(-u^2/2)."""
    log_half_pow = -vol * math.log(2.0)
    ks = np.arange(vol + 1)
    log_binom = gammaln(vol + 1) - gammaln(ks + 1) - gammaln(vol - ks + 1)
    pmf = np.exp(log_binom + log_half_pow)
    mags = 2 * ks - vol
    tails = []
    bounds = []
    for u in u_grid:
        thresh = u * math.sqrt(vol)
        tails.append(float(pmf[np.abs(mags) >= thresh - 1e-12].sum()))
        bounds.append(2.0 * math.exp(-u * u / 2.0))
    return np.array(tails), np.array(bounds)


def run_ergodic_tail_exact_iid(vol: int, u_grid: Sequence[float]) -> TailReport:
    """Product-measure magnetization tails by exact enumeration (oracle mode)."""
    tails, bounds = exact_iid_magnetization_tail(vol, u_grid)
    verdicts = [
        verdict_for(t, t, t, min(b, 1.0), "upper") for t, b in zip(tails, bounds)
    ]
    from .potentials import IsingPotential

    return TailReport(
        experiment="tail",
        model=model_descriptor(IsingPotential(0.0, 1.0, 0.0, 2)),
        run_info={"mode": "exact-iid", "volume": vol},
        bound_kind="gaussian-iid",
        bound_direction="upper",
        u_grid=np.asarray(u_grid, dtype=float),
        empirical=tails,
        ci_lo=tails.copy(),
        ci_hi=tails.copy(),
        bound_values=np.minimum(bounds, 1.0),
        verdicts=verdicts,
        seed=None,
        n_samples=None,
        extras={"normalization": "P(|M| >= u sqrt(vol))"},
    )


def run_ergodic_tail(
    phi,
    f: Observable,
    lam: Window,
    *,
    margin: int = 2,
    boundary: Boundary = FREE,
    u_grid: Optional[Sequence[float]] = None,
    bound_params: Optional[BoundParams] = None,
    master_seed: int = 0,
    replica_count: int = 200,
    emit_per_replica: int = 10,
    burn_in: Optional[int] = 100,
    thin: int = 4,
) -> TailReport:
    """Deviations of S_Lambda f / |Lambda| with the ergodic-sum bound."""
    margin = max(margin, phi.interaction_range(), f.dependence.diameter())
    box = pad_box(lam, margin)
    mat = collect_chain_matrix(
        phi, box, boundary, master_seed, replica_count, emit_per_replica, burn_in, thin
    )
    if f.label == "s0":
        cols = _window_columns(box, lam)
        sums = mat[:, cols].astype(np.int64).sum(axis=1).astype(float)
    else:
        sums = np.empty(len(mat))
        for i, row in enumerate(mat):
            config = Configuration(box, tuple(int(v) for v in row), boundary)
            total = 0.0
            for x in lam.sites:
                total += f.at_translate(config, x)
            sums[i] = total
    vol = lam.size
    values = sums / vol
    bound_fn, kind, extras = _sum_bound_fn(phi, vol, f.oscillation.norm(1), bound_params)
    run_info = {
        "window": _window_desc(lam),
        "box": _window_desc(box),
        "margin": margin,
        "boundary": boundary.label(),
        "replicas": replica_count,
        "emit_per_replica": emit_per_replica,
        "burn_in": burn_in,
        "thin": thin,
        "observable": f.label,
    }
    return _tail_report_from_samples(
        "tail", phi, values, bound_fn, kind,
        None if u_grid is None else np.asarray(u_grid, float),
        master_seed, run_info, extras,
    )


def _window_desc(w: Window) -> str:
    mins, maxs = bounding_box(w)
    return "x".join(str(b - a + 1) for a, b in zip(mins, maxs))


def run_pair_correlation_tail(
    phi,
    f: Observable,
    n: int,
    x: Tuple[int, ...],
    *,
    margin: int = 2,
    boundary: Boundary = FREE,
    u_grid: Optional[Sequence[float]] = None,
    bound_params: Optional[BoundParams] = None,
    master_seed: int = 0,
    replica_count: int = 200,
    emit_per_replica: int = 10,
    burn_in: Optional[int] = 100,
    thin: int = 4,
) -> TailReport:
    """Deviations of Gamma_{n,x}/(2n+1)^d.

    The certified oscillation constant is 4 (2n+1)^d ||f||_inf^2 ||df||_1^2
    (the factor-4 version of the pair-correlation lemma; see observables)."""
    d = phi.dimension
    lam = cube(n, d)
    vol = lam.size
    reach = max(abs(c) for c in x) if any(x) else 0
    margin = max(margin, phi.interaction_range(), f.dependence.diameter() + reach)
    box = pad_box(lam, margin)
    mat = collect_chain_matrix(
        phi, box, boundary, master_seed, replica_count, emit_per_replica, burn_in, thin
    )
    if f.label == "s0":
        cols_y = _window_columns(box, lam)
        shifted = [tuple(a + b for a, b in zip(s, x)) for s in lam.sites]
        cols_yx = np.array([box.index_of(s) for s in shifted])
        prods = (mat[:, cols_y].astype(np.int64) * mat[:, cols_yx].astype(np.int64)).sum(axis=1)
        values = prods.astype(float) / vol
    else:
        values = np.empty(len(mat))
        for i, row in enumerate(mat):
            config = Configuration(box, tuple(int(v) for v in row), boundary)
            total = 0.0
            for y in lam.sites:
                yx = tuple(a + b for a, b in zip(y, x))
                total += f.at_translate(config, y) * f.at_translate(config, yx)
            values[i] = total / vol
    osc_l2 = math.sqrt(4.0 * vol) * f.sup_bound * f.oscillation.norm(1)
    if bound_params is None:
        D, c = _derived_gaussian_D(phi)
        bound_fn = lambda u: gaussian_tail(D, osc_l2, u * vol)
        kind, extras = "gaussian", {"dobrushin_c": c, "D": D, "osc_l2": osc_l2}
    else:
        bound_fn, kind, extras = _sum_bound_fn(phi, vol, 2.0 * f.sup_bound * f.oscillation.norm(1), bound_params)
    run_info = {
        "n": n,
        "x": list(x),
        "box": _window_desc(box),
        "margin": margin,
        "boundary": boundary.label(),
        "replicas": replica_count,
        "emit_per_replica": emit_per_replica,
        "burn_in": burn_in,
        "thin": thin,
        "observable": f.label,
    }
    return _tail_report_from_samples(
        "paircorr", phi, values, bound_fn, kind,
        None if u_grid is None else np.asarray(u_grid, float),
        master_seed, run_info, extras,
    )


def lattice_exp_sum(d: int, tol: float = 1e-15) -> float:
    """sum over Z^d of 2^-||z||_inf, summed shell by shell with a certified
    geometric remainder."""
    total = 1.0
    k = 1
    while True:
        shell = (2 * k + 1) ** d - (2 * k - 1) ** d
        term = shell * 2.0**-k
        total += term
        # remaining shells are dominated by a ratio-3/4 geometric series
        if term * 4.0 < tol * total:
            break
        k += 1
    return total


def pizza_constant(d: int) -> float:
    """c_d = (sum_z 2^-||z||_inf)^2, the Lipschitz-sum oscillation constant."""
    s = lattice_exp_sum(d)
    return s * s


def run_empirical_measure(
    phi,
    lam: Window,
    window_out: Window,
    *,
    margin: int = 2,
    boundary: Boundary = FREE,
    u_grid: Optional[Sequence[float]] = None,
    master_seed: int = 0,
    replica_count: int = 100,
    emit_per_replica: int = 10,
    burn_in: Optional[int] = 100,
    thin: int = 4,
    reference: Optional[FiniteMeasure] = None,
    reference_samples: int = 4000,
) -> TailReport:
    """Concentration of d_K(E_Lambda(w), mu-hat) around its empirical mean.

    mu-hat is the exact product measure at beta = 0, a caller-supplied
    reference, or an empirical pool from an independent chain.
    """
    d = phi.dimension
    out_reach = window_out.diameter()
    margin = max(margin, phi.interaction_range() + out_reach)
    box = pad_box(lam, margin)
    mat = collect_chain_matrix(
        phi, box, boundary, master_seed, replica_count, emit_per_replica, burn_in, thin
    )
    if reference is None:
        if phi.beta == 0.0:
            reference = finite_volume_measure(phi, window_out, FREE)
        else:
            ref_mat = collect_chain_matrix(
                phi, box, boundary, master_seed + 987654321, 8,
                max(reference_samples // 8, 1), burn_in, thin,
            )
            pooled = []
            for row in ref_mat:
                config = Configuration(box, tuple(int(v) for v in row), boundary)
                pooled.append(empirical_measure(config, lam, window_out))
            support = np.concatenate([m.support for m in pooled])
            weights = np.concatenate([m.weights for m in pooled]) / len(pooled)
            uniq, inverse = np.unique(support, axis=0, return_inverse=True)
            w = np.zeros(len(uniq))
            np.add.at(w, inverse, weights)
            reference = FiniteMeasure(uniq, w / w.sum(), window=window_out)
    values = np.empty(len(mat))
    for i, row in enumerate(mat):
        config = Configuration(box, tuple(int(v) for v in row), boundary)
        emp = empirical_measure(config, lam, window_out)
        values[i] = kantorovich_config(emp, reference)
    c_d = pizza_constant(d)
    D, c = _derived_gaussian_D(phi)
    vol = lam.size
    # ||delta(F)||_2^2 <= c_d |Lambda| for the Lipschitz-sup statistic
    osc_l2 = math.sqrt(c_d * vol)
    bound_fn = lambda u: gaussian_tail(D, osc_l2, u * vol)
    from .nets import expected_distance_bound

    alphabet_size = len(phi.alphabet)
    exp_bound = expected_distance_bound(vol, D * c_d, alphabet_size, d)
    extras = {
        "dobrushin_c": c,
        "D": D,
        "c_d": c_d,
        "mean_distance": float(np.mean(values)),
        "expected_distance_bound": exp_bound.value,
        "expected_distance_epsilon": exp_bound.epsilon,
        "reference_atoms": reference.size,
    }
    run_info = {
        "window": _window_desc(lam),
        "window_out": _window_desc(window_out),
        "box": _window_desc(box),
        "margin": margin,
        "boundary": boundary.label(),
        "replicas": replica_count,
        "emit_per_replica": emit_per_replica,
        "burn_in": burn_in,
        "thin": thin,
    }
    return _tail_report_from_samples(
        "empmeasure", phi, values, bound_fn, "gaussian",
        None if u_grid is None else np.asarray(u_grid, float),
        master_seed, run_info, extras,
    )


def _exact_tail_report(
    experiment: str,
    phi,
    atom_values: np.ndarray,
    atom_weights: np.ndarray,
    center: float,
    scale: Callable[[float], float],
    bound_fn: Callable[[float], float],
    bound_kind: str,
    u_grid: Sequence[float],
    run_info: Dict[str, object],
    extras: Dict[str, object],
) -> TailReport:
    emp, bounds, verdicts = [], [], []
    for u in u_grid:
        thresh = scale(float(u))
        t = float(atom_weights[np.abs(atom_values - center) >= thresh - 1e-15].sum())
        b = min(bound_fn(float(u)), 1.0)
        emp.append(t)
        bounds.append(b)
        verdicts.append(verdict_for(t, t, t, b, "upper"))
    arr = np.array(emp)
    return TailReport(
        experiment=experiment,
        model=model_descriptor(phi),
        run_info=run_info,
        bound_kind=bound_kind,
        bound_direction="upper",
        u_grid=np.asarray(u_grid, dtype=float),
        empirical=arr,
        ci_lo=arr.copy(),
        ci_hi=arr.copy(),
        bound_values=np.array(bounds),
        verdicts=verdicts,
        seed=None,
        n_samples=None,
        extras=extras,
    )


def smb_scaling_power(d: int) -> float:
    return 0.5 if d == 2 else 1.0


@dataclass
class SmbResult:
    centered: TailReport
    entropy_centered: TailReport
    per_site_mean: float
    block_entropy_rate: float
    marginal: FiniteMeasure


def run_smb(
    phi,
    n: int,
    *,
    margin: int = 1,
    boundary: Boundary = FREE,
    psi=None,
    u_grid: Optional[Sequence[float]] = None,
) -> SmbResult:
    """Fluctuations of -log mu(C_n(.))/(2n+1)^d (or of the log-ratio against a
    second potential), by exact marginalization of the margin-padded box.

    The 7x7-box marginalization suggested at n=1 is not enumerable (2^49
    terms); the exact mode uses margin >= interaction range with the split
    enumerator and records the margin as the infinite-volume proxy.
    """
    d = phi.dimension
    margin = max(margin, phi.interaction_range())
    inner = cube(n, d)
    box = cube(n + margin, d)
    marg = marginal_via_split(phi, inner, box, boundary)
    vol = inner.size
    tnorm = triple_norm(phi)
    D, c = _derived_gaussian_D(phi)

    if psi is None:
        f_atoms = -np.log(marg.weights)
        osc_const = tnorm
        experiment = "smb"
    else:
        if triple_norm(psi) == 0.0 and psi.beta == 0.0:
            psi_weights = np.full(marg.size, 1.0 / marg.size)
        else:
            psi_weights = marginal_via_split(psi, inner, box, boundary).weights
        f_atoms = np.log(marg.weights) - np.log(psi_weights)
        osc_const = tnorm + triple_norm(psi)
        experiment = "smb_relative"

    per_site = f_atoms / vol
    mean_center = float(np.dot(per_site, marg.weights))
    block_entropy = float(np.dot(-np.log(marg.weights), marg.weights)) / vol

    if u_grid is None:
        spread = float(np.max(np.abs(per_site - mean_center)))
        top = spread * math.sqrt(vol) if spread > 0 else 1.0
        u_grid = np.geomspace(max(top / 50, 1e-6), max(top * 1.2, 2e-6), 12)

    def bound_first(u: float) -> float:
        if osc_const == 0.0:
            return 0.0 if u > 0 else 1.0
        expo = ((1 - c) ** 2 / (8.0 * osc_const**2)) * (2 * n + 1) * u * u
        return 2.0 * math.exp(-expo)

    def bound_second(u: float) -> float:
        if osc_const == 0.0:
            return 0.0 if u > 0 else 1.0
        expo = ((1 - c) ** 2 / (32.0 * osc_const**2)) * (2 * n + 1) * u * u
        return 2.0 * math.exp(-expo)

    scale_first = lambda u: u / (2 * n + 1) ** ((d - 1) / 2.0)
    p_d = smb_scaling_power(d)
    scale_second = lambda u: u / (2 * n + 1) ** p_d

    run_info = {
        "n": n,
        "margin": margin,
        "box": _window_desc(box),
        "boundary": boundary.label(),
        "mode": "exact-enumeration",
    }
    extras = {
        "triple_norm": tnorm,
        "dobrushin_c": c,
        "per_site_mean": mean_center,
        "block_entropy_rate": block_entropy,
        "centering": "empirical-mean",
    }
    centered = _exact_tail_report(
        experiment, phi, per_site, marg.weights, mean_center, scale_first,
        bound_first, "gaussian", u_grid, run_info, extras,
    )
    extras2 = dict(extras)
    extras2["centering"] = "block-entropy-rate"
    entropy_centered = _exact_tail_report(
        experiment + "_entropy", phi, per_site, marg.weights, block_entropy,
        scale_second, bound_second, "gaussian", u_grid, run_info, extras2,
    )
    return SmbResult(centered, entropy_centered, mean_center, block_entropy, marg)


@dataclass
class SmbMcResult:
    report: TailReport
    per_site_mean: float
    coverage: float  # fraction of the |S|^|C_n| patterns observed


def run_smb_mc(
    phi,
    n: int,
    *,
    margin: int = 3,
    boundary: Boundary = FREE,
    master_seed: int = 0,
    replica_count: int = 8,
    emit_per_replica: int = 2500,
    burn_in: Optional[int] = 100,
    thin: int = 3,
    u_grid: Optional[Sequence[float]] = None,
) -> SmbMcResult:
    """Monte Carlo SMB fluctuations with plug-in cylinder probabilities.

    Estimates mu(C_n(.)) by pattern counting and evaluates -log of the
    estimate, which is a biased plug-in for -log mu; the report carries
    bias_caveat and the pattern coverage so downstream use stays honest.
    Prefer the exact-enumeration mode (run_smb) at desk scale.
    """
    d = phi.dimension
    inner = cube(n, d)
    box = pad_box(inner, max(margin, phi.interaction_range()))
    mat = collect_chain_matrix(
        phi, box, boundary, master_seed, replica_count, emit_per_replica, burn_in, thin
    )
    cols = _window_columns(box, inner)
    patterns = np.ascontiguousarray(mat[:, cols])
    uniq, inverse, counts = np.unique(
        patterns, axis=0, return_inverse=True, return_counts=True
    )
    n_samples = len(patterns)
    p_hat = counts / n_samples
    f_hat = -np.log(p_hat[inverse])
    vol = inner.size
    scale = (2 * n + 1) ** ((d - 1) / 2.0)
    values = (f_hat / vol) * scale
    tnorm = triple_norm(phi)
    D, c = _derived_gaussian_D(phi)

    def bound_first(u: float) -> float:
        if tnorm == 0.0:
            return 0.0 if u > 0 else 1.0
        expo = ((1 - c) ** 2 / (8.0 * tnorm**2)) * (2 * n + 1) * u * u
        return min(2.0 * math.exp(-expo), 1.0)

    coverage = len(uniq) / float(len(phi.alphabet) ** vol)
    run_info = {
        "n": n,
        "margin": margin,
        "box": _window_desc(box),
        "boundary": boundary.label(),
        "mode": "mc-plugin",
    }
    extras = {
        "bias_caveat": True,
        "coverage": coverage,
        "triple_norm": tnorm,
        "dobrushin_c": c,
    }
    report = _tail_report_from_samples(
        "smb", phi, values, bound_first, "gaussian",
        None if u_grid is None else np.asarray(u_grid, float),
        master_seed, run_info, extras,
    )
    return SmbMcResult(
        report=report,
        per_site_mean=float(np.mean(f_hat)) / vol,
        coverage=coverage,
    )


def occurrence_volume_2d(
    pattern: np.ndarray, fields: np.ndarray, n: int, k_max: int
) -> np.ndarray:
    """Vectorized first-occurrence volumes W_n for a stack of square fields.

    pattern: (2n+1, 2n+1); fields: (R, 2k_max+1, 2k_max+1).  Returns float
    array with (2k+1)^2 or nan when the pattern does not occur by k_max.
    """
    m = 2 * n + 1
    side = fields.shape[1]
    sw = np.lib.stride_tricks.sliding_window_view(fields, (m, m), axis=(1, 2))
    hits = (sw == pattern[None, None, None, :, :]).all(axis=(3, 4))
    # translate index (i, j) corresponds to x = (i - (k_max - n), j - (k_max - n))
    r = k_max - n
    coords = np.arange(hits.shape[1]) - r
    normgrid = np.maximum(np.abs(coords)[:, None], np.abs(coords)[None, :])
    out = np.full(len(fields), np.nan)
    for idx in range(len(fields)):
        h = hits[idx]
        if h.any():
            kmin = int(normgrid[h].min()) + n
            out[idx] = float((2 * kmin + 1) ** 2)
    return out


@dataclass
class WaitingTimeReport:
    model: Dict[str, object]
    pattern_model: Dict[str, object]
    n: int
    k_max: int
    n_pairs: int
    censored_fraction: float
    log_w_per_site: np.ndarray
    center_estimate: float
    mean_log_w_per_site: float
    upper_slope: float
    lower_slope: float
    seed: int
    extras: Dict[str, object]


def run_waiting_time(
    phi,
    n: int,
    k_max: int,
    *,
    psi=None,
    margin: int = 2,
    boundary: Boundary = FREE,
    master_seed: int = 0,
    n_pairs: int = 400,
    burn_in: Optional[int] = 60,
    thin: int = 4,
) -> WaitingTimeReport:
    """Distribution of log W_n(eta, omega)/(2n+1)^d for eta ~ mu_Psi and
    omega ~ mu_Phi independent; centers are compared against exact
    finite-margin entropy estimates, and tail decay is summarized by
    regression slopes (the theorem's constants are non-explicit)."""
    if phi.dimension != 2:
        raise DomainError("waiting-time experiment implemented for d = 2")
    psi = psi if psi is not None else phi
    d = 2
    inner = cube(n, d)
    pat_box = pad_box(inner, max(margin, psi.interaction_range()))
    eta_mat = collect_chain_matrix(
        psi, pat_box, boundary, master_seed + 1, n_pairs, 1, burn_in, thin
    )
    field_win = cube(k_max, d)
    field_box = pad_box(field_win, max(margin, phi.interaction_range()))
    om_mat = collect_chain_matrix(
        phi, field_box, boundary, master_seed + 2, n_pairs, 1, burn_in, thin
    )
    pat_cols = _window_columns(pat_box, inner)
    field_cols = _window_columns(field_box, field_win)
    m = 2 * n + 1
    side = 2 * k_max + 1
    fields = om_mat[:, field_cols].reshape(len(om_mat), side, side)
    vols = np.empty(n_pairs)
    for i in range(n_pairs):
        pattern = eta_mat[i, pat_cols].reshape(m, m)
        vols[i] = occurrence_volume_2d(pattern, fields[i : i + 1], n, k_max)[0]
    found = ~np.isnan(vols)
    censored = 1.0 - float(np.mean(found))
    vol = inner.size
    logw = np.log(vols[found]) / vol

    # exact entropy estimates from marginals padded by the interaction range
    # (the split enumerator cannot afford the full sampling margin)
    ent_margin = max(1, psi.interaction_range(), phi.interaction_range())
    ent_box = pad_box(inner, ent_margin)
    marg_psi = marginal_via_split(psi, inner, ent_box, boundary)
    if psi is phi:
        h_cross = 0.0
        h_psi = float(np.dot(-np.log(marg_psi.weights), marg_psi.weights)) / vol
    else:
        marg_phi = marginal_via_split(phi, inner, ent_box, boundary)
        h_psi, h_cross_total = entropy_and_relative_entropy(marg_psi, marg_phi)
        h_psi /= vol
        h_cross = h_cross_total / vol
    center = h_psi + h_cross

    def tail_slope(devs: np.ndarray) -> float:
        if len(devs) < 20:
            return float("nan")
        grid = np.quantile(devs, [0.5, 0.65, 0.8, 0.9, 0.95])
        xs, ys = [], []
        for u in grid:
            t = float(np.mean(devs >= u))
            if 0 < t < 1 and u > 0:
                xs.append((2 * n + 1) * u * u)
                ys.append(math.log(t))
        if len(xs) < 3:
            return float("nan")
        slope = np.polyfit(xs, ys, 1)[0]
        return float(slope)

    upper_devs = np.maximum(logw - center, 0.0)
    lower_devs = np.maximum(center - logw, 0.0)
    return WaitingTimeReport(
        model=model_descriptor(phi),
        pattern_model=model_descriptor(psi),
        n=n,
        k_max=k_max,
        n_pairs=n_pairs,
        censored_fraction=censored,
        log_w_per_site=logw,
        center_estimate=center,
        mean_log_w_per_site=float(np.mean(logw)) if len(logw) else float("nan"),
        upper_slope=tail_slope(upper_devs[upper_devs > 0]),
        lower_slope=tail_slope(lower_devs[lower_devs > 0]),
        seed=master_seed,
        extras={"h_psi": h_psi, "h_cross": h_cross, "margin": margin},
    )


def median_split_base(mu: FiniteMeasure) -> Tuple[np.ndarray, float]:
    """Base set {M >= t} with nu-mass as close to 1/2 as possible."""
    mags = mu.support.astype(np.int64).sum(axis=1)
    best = None
    for t in np.unique(mags):
        mass = float(mu.weights[mags >= t].sum())
        score = abs(mass - 0.5)
        if best is None or score < best[0]:
            best = (score, t, mass)
    _, t, mass = best
    return mu.support[mags >= t], mass


def run_fattening(
    phi,
    lam: Window,
    eps_grid: Sequence[float],
    *,
    boundary: Boundary = FREE,
    bound_params: Optional[BoundParams] = None,
    atom_cap: int = 1 << 20,
) -> TailReport:
    """Exact fattening measures nu(B_{Lambda,eps}) for a median-split base set,
    against the Gaussian (or supplied) lower bound."""
    mu = finite_volume_measure(phi, lam, boundary, atom_cap=atom_cap)
    base, achieved = median_split_base(mu)
    vol = lam.size
    if bound_params is None:
        D, c = _derived_gaussian_D(phi)
        kind = "gaussian"
        log_inv_alpha = math.log(1.0 / achieved)
        eps0 = 2.0 * math.sqrt(D * log_inv_alpha) / math.sqrt(vol)

        def lower_bound(eps: float) -> float:
            if eps <= eps0:
                return 0.0
            return 1.0 - math.exp(-(vol / (4.0 * D)) * (eps - eps0) ** 2)

        extras = {"D": D, "dobrushin_c": c, "threshold_eps": eps0, "base_mass": achieved}
    elif bound_params.kind == "stretched":
        kind = "stretched"
        # E[F] estimated exactly from the measure
        f0 = fatten(lam, base, 0.0)
        dist = f0.min_distance(mu.support)
        e_f = float(np.dot(dist, mu.weights))

        def lower_bound(eps: float) -> float:
            u = eps * vol - e_f
            if u <= 0:
                return 0.0
            return 1.0 - stretched_tail(
                bound_params.rho, bound_params.c_rho, math.sqrt(vol), u, clamp=False
            )

        extras = {
            "rho": bound_params.rho,
            "c_rho": bound_params.c_rho,
            "mean_distance": e_f,
            "base_mass": achieved,
            "certified": False,
        }
    elif bound_params.kind == "moment":
        kind = "moment"
        p, c2p = bound_params.p, bound_params.C2p
        # Markov on F with ||delta F||_2^2 <= |Lambda| plus the mean bound
        # E[F] <= (C_2p / alpha)^(1/2p) sqrt(|Lambda|) at base mass alpha
        e_bound = (c2p / achieved) ** (1.0 / (2 * p)) * math.sqrt(vol)

        def lower_bound(eps: float) -> float:
            u = eps * vol - e_bound
            if u <= 0:
                return 0.0
            return 1.0 - c2p * vol**p / u ** (2 * p)

        extras = {
            "p": p,
            "C2p": c2p,
            "mean_bound": e_bound,
            "base_mass": achieved,
            "provenance": bound_params.provenance,
        }
    else:
        raise ValidationError(
            "fattening bound must be gaussian (derived), moment, or stretched"
        )

    emp, bounds, verdicts = [], [], []
    for eps in eps_grid:
        m = fatten(lam, base, float(eps)).measure(mu)
        b = max(lower_bound(float(eps)), 0.0)
        emp.append(m)
        bounds.append(b)
        verdicts.append(verdict_for(m, m, m, b, "lower"))
    arr = np.array(emp)
    return TailReport(
        experiment="fatten",
        model=model_descriptor(phi),
        run_info={"window": _window_desc(lam), "boundary": boundary.label(), "mode": "exact"},
        bound_kind=kind,
        bound_direction="lower",
        u_grid=np.asarray(eps_grid, dtype=float),
        empirical=arr,
        ci_lo=arr.copy(),
        ci_hi=arr.copy(),
        bound_values=np.array(bounds),
        verdicts=verdicts,
        seed=None,
        n_samples=None,
        extras=extras,
    )


def run_fattening_mc(
    lam: Window,
    samples: np.ndarray,
    eps_grid: Sequence[float],
    bound_params: BoundParams,
    *,
    model: Optional[Dict[str, object]] = None,
) -> TailReport:
    """Monte Carlo fattening check from a sample matrix on lam (used for the
    plus phase, where exact enumeration is unavailable).  The base set is the
    median split of the sample magnetizations; bounds with fitted parameters
    are exploratory, never paper-certified."""
    mags = samples.astype(np.int64).sum(axis=1)
    t_candidates = np.unique(mags)
    best = None
    for t in t_candidates:
        mass = float(np.mean(mags >= t))
        score = abs(mass - 0.5)
        if best is None or score < best[0]:
            best = (score, t, mass)
    _, t, achieved = best
    base = samples[mags >= t]
    vol = lam.size
    n = len(samples)
    f0 = fatten(lam, base, 0.0)
    dist = f0.min_distance(samples)
    e_f = float(np.mean(dist))

    def lower_bound(eps: float) -> float:
        u = eps * vol - e_f
        if u <= 0:
            return 0.0
        return 1.0 - stretched_tail(
            bound_params.rho, bound_params.c_rho, math.sqrt(vol), u, clamp=False
        )

    emp, lo, hi, bounds, verdicts = [], [], [], [], []
    for eps in eps_grid:
        radius = int(math.floor(float(eps) * vol + 1e-9))
        k = int(np.sum(dist <= radius))
        p = k / n
        c_lo, c_hi = wilson_ci(k, n)
        b = max(lower_bound(float(eps)), 0.0)
        emp.append(p)
        lo.append(c_lo)
        hi.append(c_hi)
        bounds.append(b)
        verdicts.append(verdict_for(p, c_lo, c_hi, b, "lower"))
    return TailReport(
        experiment="fatten",
        model=model or {},
        run_info={"window": _window_desc(lam), "mode": "mc"},
        bound_kind="stretched",
        bound_direction="lower",
        u_grid=np.asarray(eps_grid, dtype=float),
        empirical=np.array(emp),
        ci_lo=np.array(lo),
        ci_hi=np.array(hi),
        bound_values=np.array(bounds),
        verdicts=verdicts,
        seed=None,
        n_samples=n,
        extras={
            "base_mass": achieved,
            "mean_distance": e_f,
            "rho": bound_params.rho,
            "c_rho": bound_params.c_rho,
            "certified": False,
        },
    )


def sigma2_from_field(field_vals: np.ndarray, radius: int) -> Tuple[float, float]:
    """Truncated sigma^2 for the spin observable from one large field: sums of
    empirically centered covariances over ||x||_inf <= radius.  Returns
    (sigma2 at radius, sigma2 at radius doubled) as a stability pair."""
    f = field_vals.astype(float)
    f = f - f.mean()
    d = f.ndim

    def cov(shift) -> float:
        slices_a, slices_b = [], []
        for ax, s in enumerate(shift):
            size = f.shape[ax]
            if s >= 0:
                slices_a.append(slice(0, size - s))
                slices_b.append(slice(s, size))
            else:
                slices_a.append(slice(-s, size))
                slices_b.append(slice(0, size + s))
        a = f[tuple(slices_a)]
        b = f[tuple(slices_b)]
        return float(np.mean(a * b))

    import itertools as it

    def total(r: int) -> float:
        s = 0.0
        for shift in it.product(range(-r, r + 1), repeat=d):
            s += cov(shift)
        return s

    return max(total(radius), 0.0), max(total(2 * radius), 0.0)


@dataclass
class AscltRecord:
    Ns: Tuple[int, ...]
    distances: Tuple[float, ...]
    sigma2: float
    sigma2_doubled: float
    seed: int
    dimension: int
    extras: Dict[str, object]


def run_asclt_iid(
    N_max: int,
    Ns: Sequence[int],
    *,
    master_seed: int = 0,
    d: int = 1,
    sigma_radius: int = 2,
    gaussian_points: int = 4096,
) -> AscltRecord:
    """Logarithmic-average empirical measure of normalized nested-cube sums of
    iid +-1 spins, against G_{0, sigma^2} in Kantorovich distance."""
    if d != 1:
        raise DomainError("the iid ASCLT runner is one-dimensional")
    rng = replica_rng(master_seed, 0)
    side = 2 * N_max + 1
    omega = rng.choice(np.array([-1, 1], dtype=np.int8), size=side)
    csum = np.concatenate([[0], np.cumsum(omega.astype(np.int64))])
    c = N_max
    ns = np.arange(1, N_max + 1)
    S = csum[c + ns + 1] - csum[c - ns]
    atoms = S / np.sqrt(2 * ns + 1.0)
    sigma2, sigma2_doubled = sigma2_from_field(omega, sigma_radius)
    g = discretize_gaussian(sigma2 if sigma2 > 0 else 1.0, points=gaussian_points)
    dists = []
    for N in Ns:
        w = 1.0 / ns[:N]
        a_n = real_measure(atoms[:N], w / w.sum())
        dists.append(kantorovich_real(a_n, g.measure))
    return AscltRecord(
        Ns=tuple(int(N) for N in Ns),
        distances=tuple(float(x) for x in dists),
        sigma2=float(sigma2),
        sigma2_doubled=float(sigma2_doubled),
        seed=master_seed,
        dimension=d,
        extras={"gaussian_w1_error": g.w1_error, "sigma_radius": sigma_radius},
    )


def run_asclt_chain(
    phi,
    N_max: int,
    Ns: Sequence[int],
    *,
    margin: int = 2,
    boundary: Boundary = FREE,
    master_seed: int = 0,
    burn_in: Optional[int] = 100,
    sigma_radius: int = 3,
    gaussian_points: int = 2048,
) -> AscltRecord:
    """ASCLT record for the spin observable under a sampled Gibbs chain (d=2):
    one long sample, nested cube sums from a 2-D prefix."""
    if phi.dimension != 2:
        raise DomainError("chain ASCLT runner implemented for d = 2")
    win = cube(N_max, 2)
    box = pad_box(win, max(margin, phi.interaction_range()))
    mat = collect_chain_matrix(phi, box, boundary, master_seed, 1, 1, burn_in, 1)
    cols = _window_columns(box, win)
    side = 2 * N_max + 1
    field_vals = mat[0, cols].reshape(side, side).astype(np.int64)
    pref = np.zeros((side + 1, side + 1), dtype=np.int64)
    pref[1:, 1:] = field_vals.cumsum(axis=0).cumsum(axis=1)
    c = N_max
    ns = np.arange(1, N_max + 1)
    hi = c + ns + 1
    lo = c - ns
    S = pref[hi, hi] - pref[lo, hi] - pref[hi, lo] + pref[lo, lo]
    mean_spin = field_vals.mean()
    S_centered = S - mean_spin * (2 * ns + 1.0) ** 2
    atoms = S_centered / (2 * ns + 1.0)
    sigma2, sigma2_doubled = sigma2_from_field(field_vals, sigma_radius)
    g = discretize_gaussian(sigma2 if sigma2 > 0 else 1.0, points=gaussian_points)
    dists = []
    for N in Ns:
        w = 1.0 / ns[:N]
        a_n = real_measure(atoms[:N], w / w.sum())
        dists.append(kantorovich_real(a_n, g.measure))
    return AscltRecord(
        Ns=tuple(int(N) for N in Ns),
        distances=tuple(float(x) for x in dists),
        sigma2=float(sigma2),
        sigma2_doubled=float(sigma2_doubled),
        seed=master_seed,
        dimension=2,
        extras={"gaussian_w1_error": g.w1_error, "sigma_radius": sigma_radius,
                "margin": margin, "centering": float(mean_spin)},
    )


@dataclass
class DbarReport:
    model: Dict[str, object]
    model_psi: Dict[str, object]
    n: int
    dbar_total: float
    dbar_per_site: float
    entropy_rate: float
    bound_total: float
    slack: float
    potential_diff_bound_per_site: float
    extras: Dict[str, object]

    @property
    def respected(self) -> bool:
        return self.slack >= -1e-12


def run_dbar_entropy(
    phi,
    psi,
    n: int,
    *,
    margin: int = 1,
    boundary: Boundary = FREE,
) -> DbarReport:
    """All-couplings Hamming transport between the C_n marginals of two Gibbs
    proxies, against 2 sqrt(b H_n) with b = (2n+1)^d / (2 (1-c)^2).

    The computed transport lower-bounds the shift-invariant-coupling distance,
    so the inequality applies to it a fortiori.
    """
    d = phi.dimension
    inner = cube(n, d)
    box = cube(n + max(margin, phi.interaction_range()), d)
    mu_n = marginal_via_split(phi, inner, box, boundary)
    nu_n = marginal_via_split(psi, inner, box, boundary)
    vol = inner.size
    _, h_n = entropy_and_relative_entropy(nu_n, mu_n)
    dist = dbar_hamming(mu_n, nu_n)
    D, c = _derived_gaussian_D(phi)
    b = vol / (2.0 * (1.0 - c) ** 2)
    bound = 2.0 * math.sqrt(b * h_n)
    diff_bound = (2.0 * math.sqrt(2.0) / (1.0 - c)) * math.sqrt(
        potential_difference_norm(phi, psi)
    )
    return DbarReport(
        model=model_descriptor(phi),
        model_psi=model_descriptor(psi),
        n=n,
        dbar_total=dist,
        dbar_per_site=dist / vol,
        entropy_rate=h_n / vol,
        bound_total=bound,
        slack=bound - dist,
        potential_diff_bound_per_site=diff_bound,
        extras={"H_n": h_n, "b": b, "dobrushin_c": c, "margin": margin,
                "boundary": boundary.label()},
    )


@dataclass
class LowTempFit:
    rho: float
    c_rho: float
    kappa: float
    moments: Dict[int, float]
    c2_ok: bool
    advisory: Optional[str]
    params: Optional[BoundParams]
    n_samples: int

    def stable_against(self, other: "LowTempFit", rel: float = 0.2) -> bool:
        if not (math.isfinite(self.rho) and math.isfinite(other.rho)):
            return False
        return abs(self.rho - other.rho) <= rel * max(abs(other.rho), 1e-12)


def fit_low_temp_params(
    zs: Sequence[float],
    *,
    tail_points: int = 12,
    min_tail: Optional[float] = None,
) -> LowTempFit:
    """Fit stretched-exponential tail parameters from centered, oscillation-
    normalized samples Z = (F - mean F)/||delta F||_2.

    Regresses log(-log tail) on log u over empirical tail quantiles (between
    the 25% tail and the 20-sample tail), and reports empirical moment
    constants C_2p = E[Z^{2p}] with the growth exponent
    kappa = max_p log(C_2p)/(2p log p).  Fitted values are never
    paper-certified constants.
    """
    z = np.abs(np.asarray(zs, dtype=float))
    n = len(z)
    if n < 100:
        raise ValidationError("need at least 100 samples to fit tail parameters")
    if min_tail is None:
        min_tail = 20.0 / n
    probs = np.geomspace(0.25, min_tail, tail_points)
    xs, ys = [], []
    for p in probs:
        u = float(np.quantile(z, 1.0 - p))
        if u <= 0 or p >= 1.0:
            continue
        val = -math.log(p)
        if val <= 0:
            continue
        xs.append(math.log(u))
        ys.append(math.log(val))
    if len(xs) < 4:
        raise ValidationError("not enough usable tail points")
    slope, intercept = np.polyfit(xs, ys, 1)
    rho = float(slope)
    c_rho = float(math.exp(intercept))
    moments = {p: float(np.mean(z ** (2 * p))) for p in (1, 2, 3)}
    kappa = max(
        (math.log(moments[p]) / (2 * p * math.log(p)) if moments[p] > 1 else 0.0)
        for p in (2, 3)
    )
    c2_ok = moments[1] <= 1.0 + 1e-12
    advisory = None
    params = None
    if rho >= 1.0:
        advisory = (
            "fitted rho outside (0,1): tails look Gaussian/exponential, "
            "GCB regime suspected"
        )
    elif rho >= 0.95:
        advisory = "fitted rho near the exponential boundary"
        params = BoundParams("stretched", provenance="fitted", rho=rho, c_rho=c_rho)
    elif rho <= 0.0:
        advisory = "fit failed: nonpositive rho"
    else:
        params = BoundParams("stretched", provenance="fitted", rho=rho, c_rho=c_rho)
    return LowTempFit(
        rho=rho,
        c_rho=c_rho,
        kappa=float(kappa),
        moments=moments,
        c2_ok=c2_ok,
        advisory=advisory,
        params=params,
        n_samples=n,
    )
