"""Heat-bath (Glauber) sampling of finite-volume Gibbs measures.

The single-site update distribution is exactly the specification kernel, so
the chains are direct consumers of the finite-volume conditionals.  Replica
streams come from a counter-based Philox generator keyed by
(master_seed, replica_index) via numpy SeedSequence spawn keys, which makes
every emitted configuration a pure function of (master_seed, config) no
matter how replicas are scheduled.

Sweep orders: "systematic" (canonical site order) and "random-site" update
one site at a time; "checkerboard" (default for range-1 potentials on full
boxes) updates the two parities alternately with vectorized kernels, which is
a valid heat-bath schedule because sites of one parity are conditionally
independent given the other.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DomainError, ValidationError
from .lattice import (
    ALL_PLUS,
    FREE,
    Boundary,
    Configuration,
    Window,
    bounding_box,
    is_full_box,
    pad_box,
    site_add,
)
from .specification import FiniteMeasure


@dataclass(frozen=True)
class ChainConfig:
    window: Window
    boundary: Boundary = FREE
    sweep_order: str = "checkerboard"  # systematic | random-site | checkerboard
    burn_in_sweeps: Optional[int] = None  # None -> 100 * side
    thin_sweeps: int = 1
    master_seed: int = 0
    replica_count: int = 1

    def __post_init__(self):
        if self.thin_sweeps < 1:
            raise ValidationError("thin_sweeps must be >= 1")
        if self.replica_count < 1:
            raise ValidationError("replica_count must be >= 1")
        if self.burn_in_sweeps is not None and self.burn_in_sweeps < 0:
            raise ValidationError("burn_in_sweeps must be >= 0")
        if self.sweep_order not in ("systematic", "random-site", "checkerboard"):
            raise ValidationError(f"unknown sweep order {self.sweep_order!r}")

    def resolved_burn_in(self) -> int:
        if self.burn_in_sweeps is not None:
            return self.burn_in_sweeps
        mins, maxs = bounding_box(self.window)
        side = max(b - a + 1 for a, b in zip(mins, maxs))
        return 100 * side


def replica_rng(master_seed: int, replica: int) -> np.random.Generator:
    """Stream for replica i: Philox keyed by SeedSequence(master_seed, (i,))."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(replica,))
    return np.random.Generator(np.random.Philox(ss))


def _site_terms(phi, window: Window, boundary: Boundary):
    """Per site: interior neighbor (index, offset) pairs and boundary fields.

    Periodic boundaries (a sampler-only approximation mode) wrap neighbors
    back into the window, so every term becomes interior.
    """
    periodic = boundary.kind == "periodic"
    if periodic:
        if not is_full_box(window):
            raise DomainError("periodic boundaries require a full box window")
        mins, maxs = bounding_box(window)
        extent = [b - a + 1 for a, b in zip(mins, maxs)]
    interior: List[List[Tuple[int, Tuple[int, ...]]]] = []
    exterior: List[List[Tuple[int, Tuple[int, ...]]]] = []
    for x in window.sites:
        inn, ext = [], []
        for off in phi.pair_offsets():
            y = site_add(x, off)
            if periodic:
                y = tuple(
                    mins[i] + (y[i] - mins[i]) % extent[i] for i in range(len(y))
                )
            if y in window:
                inn.append((window.index_of(y), off))
            else:
                b = boundary.value_at(y)
                if b is not None:
                    ext.append((int(b), off))
        interior.append(inn)
        exterior.append(ext)
    return interior, exterior


def _resample_site(phi, values, i, interior, exterior, rng) -> int:
    energies = []
    for s in phi.alphabet:
        h = phi.field_term(s)
        for j, off in interior[i]:
            h += phi.pair_term(s, values[j], off)
        for b, off in exterior[i]:
            h += phi.pair_term(s, b, off)
        energies.append(h)
    e = np.array(energies)
    e -= e.min()
    w = np.exp(-e)
    w /= w.sum()
    u = rng.random()
    return phi.alphabet[int(np.searchsorted(np.cumsum(w), u))]


def glauber_sweep(
    state: Configuration, phi, rng: np.random.Generator, order: str = "systematic"
) -> Configuration:
    """One heat-bath sweep: every site resampled once from its single-site
    kernel given the current neighbors (canonical site order when systematic;
    `random-site` draws |window| sites with replacement instead)."""
    window, boundary = state.window, state.boundary
    interior, exterior = _site_terms(phi, window, boundary)
    values = list(state.values)
    n = window.size
    if order == "systematic":
        indices = range(n)
    elif order == "random-site":
        indices = [int(k) for k in rng.integers(0, n, size=n)]
    else:
        raise ValidationError(f"glauber_sweep does not implement order {order!r}")
    for i in indices:
        values[i] = _resample_site(phi, values, i, interior, exterior, rng)
    return Configuration(window, tuple(values), boundary)


class _BoxEngine:
    """Vectorized checkerboard heat bath for range-1 potentials on full boxes.

    Holds a batch of replicas as an (R, *extent) int8 array; each replica owns
    its own generator so trajectories do not depend on the batch size.
    """

    def __init__(self, phi, window: Window, boundary: Boundary, rngs: Sequence[np.random.Generator]):
        if phi.kind not in ("ising", "potts"):
            raise DomainError("checkerboard engine requires a nearest-neighbor potential")
        if not is_full_box(window):
            raise DomainError("checkerboard engine requires a full box window")
        if window.dimension not in (1, 2):
            raise DomainError("checkerboard engine supports d in {1, 2}")
        self.phi = phi
        self.window = window
        self.boundary = boundary
        self.rngs = list(rngs)
        self.mins, self.maxs = bounding_box(window)
        self.extent = tuple(b - a + 1 for a, b in zip(self.mins, self.maxs))
        self.d = window.dimension
        self.periodic = boundary.kind == "periodic"
        if self.periodic and any(e % 2 for e in self.extent):
            raise DomainError(
                "periodic checkerboard sweeps need even side lengths "
                "(the wrap-around breaks the two-coloring otherwise); "
                "use systematic order"
            )
        r = len(self.rngs)
        # padded state: boundary ring kept in place; 0 encodes "no neighbor";
        # periodic mode ignores the ring and wraps with np.roll instead
        pad_shape = (r,) + tuple(e + 2 for e in self.extent)
        self.padded = np.zeros(pad_shape, dtype=np.int8)
        if not self.periodic:
            self._fill_boundary_ring()
        coords = np.indices(self.extent).sum(axis=0)
        self.masks = [(coords % 2 == p) for p in (0, 1)]

    def _interior(self) -> np.ndarray:
        sl = (slice(None),) + tuple(slice(1, 1 + e) for e in self.extent)
        return self.padded[sl]

    def _fill_boundary_ring(self):
        b = self.boundary
        if b.kind == "free":
            return  # zeros already mean "absent neighbor"
        if b.kind == "constant":
            self.padded[...] = b.value
            return
        # fixed pattern: fill the one-site ring from the pattern; face cells
        # (axis-adjacent to the interior) are required, corners optional
        ring_value = dict(b.pattern or ())
        for idx in np.ndindex(*[e + 2 for e in self.extent]):
            outside = [not (1 <= c <= e) for c, e in zip(idx, self.extent)]
            if not any(outside):
                continue
            site = tuple(self.mins[i] + idx[i] - 1 for i in range(self.d))
            if site in ring_value:
                self.padded[(slice(None),) + idx] = ring_value[site]
            elif sum(outside) == 1:
                raise DomainError(f"fixed boundary missing required ring site {site}")

    def set_states(self, states: np.ndarray):
        self._interior()[...] = states

    def init_uniform(self):
        alph = np.asarray(self.phi.alphabet, dtype=np.int8)
        interior = self._interior()
        for r, rng in enumerate(self.rngs):
            interior[r] = alph[rng.integers(0, len(alph), size=self.extent)]

    def _neighbor_slices(self):
        full = [slice(1, 1 + e) for e in self.extent]
        for axis in range(self.d):
            for shiftdir in (-1, 1):
                sl = list(full)
                sl[axis] = slice(1 + shiftdir, 1 + self.extent[axis] + shiftdir)
                yield (slice(None),) + tuple(sl)

    def _neighbor_views(self):
        if self.periodic:
            interior = self._interior()
            for axis in range(self.d):
                for shiftdir in (-1, 1):
                    yield np.roll(interior, -shiftdir, axis=axis + 1)
        else:
            for sl in self._neighbor_slices():
                yield self.padded[sl]

    def sweep(self):
        for mask in self.masks:
            self._update_parity(mask)

    def _update_parity(self, mask: np.ndarray):
        phi = self.phi
        r = len(self.rngs)
        uniforms = np.empty((r,) + self.extent)
        for i, rng in enumerate(self.rngs):
            uniforms[i] = rng.random(size=self.extent)
        interior = self._interior()
        if phi.kind in ("ising", "long_range"):
            nb = np.zeros((r,) + self.extent)
            for view in self._neighbor_views():
                nb += view
            a = phi.beta * (phi.coupling * nb + getattr(phi, "field", 0.0))
            p_plus = 1.0 / (1.0 + np.exp(-2.0 * a))
            new = np.where(uniforms < p_plus, 1, -1).astype(np.int8)
        else:  # potts
            q = phi.colors
            counts = np.zeros((q, r) + self.extent)
            for view in self._neighbor_views():
                for c in range(1, q + 1):
                    counts[c - 1] += view == c
            logw = -phi.beta * phi.coupling * counts
            logw -= logw.max(axis=0, keepdims=True)
            w = np.exp(logw)
            w /= w.sum(axis=0, keepdims=True)
            cdf = np.cumsum(w, axis=0)
            new = (uniforms[None, ...] > cdf).sum(axis=0).astype(np.int8) + 1
        interior[:, mask] = new[:, mask]

    def snapshot_values(self, r: int) -> np.ndarray:
        return self._interior()[r].ravel().copy()

    def snapshot(self, r: int) -> Configuration:
        vals = tuple(int(v) for v in self.snapshot_values(r))
        return Configuration(self.window, vals, self.boundary)


def _engine_applicable(phi, window: Window) -> bool:
    return (
        phi.kind in ("ising", "potts")
        and window.dimension in (1, 2)
        and is_full_box(window)
    )


def sample_values(phi, cfg: ChainConfig, emit_per_replica: int = 1) -> Iterator[Tuple[int, np.ndarray]]:
    """Yield (replica_index, values-array) pairs, values aligned with
    cfg.window.sites; each replica runs an independent chain, emitting every
    `thin_sweeps` sweeps after burn-in."""
    burn = cfg.resolved_burn_in()
    rngs = [replica_rng(cfg.master_seed, r) for r in range(cfg.replica_count)]
    if cfg.sweep_order == "checkerboard":
        if not _engine_applicable(phi, cfg.window):
            raise DomainError(
                "checkerboard sweeps need a nearest-neighbor potential on a full box "
                "in d<=2; use systematic order instead"
            )
        engine = _BoxEngine(phi, cfg.window, cfg.boundary, rngs)
        engine.init_uniform()
        for _ in range(burn):
            engine.sweep()
        for k in range(emit_per_replica):
            for r in range(cfg.replica_count):
                yield r, engine.snapshot_values(r)
            if k < emit_per_replica - 1:
                for _ in range(cfg.thin_sweeps):
                    engine.sweep()
        return
    # scalar paths
    alph = np.asarray(phi.alphabet, dtype=np.int8)
    for r, rng in enumerate(rngs):
        vals = tuple(int(v) for v in alph[rng.integers(0, len(alph), size=cfg.window.size)])
        state = Configuration(cfg.window, vals, cfg.boundary)
        for _ in range(burn):
            state = glauber_sweep(state, phi, rng, cfg.sweep_order)
        for k in range(emit_per_replica):
            yield r, np.asarray(state.values, dtype=np.int8)
            if k < emit_per_replica - 1:
                for _ in range(cfg.thin_sweeps):
                    state = glauber_sweep(state, phi, rng, cfg.sweep_order)


def sample_measure(phi, cfg: ChainConfig, emit_per_replica: int = 1) -> Iterator[Tuple[int, Configuration]]:
    """Like sample_values but wrapping emissions as Configuration objects."""
    for r, vals in sample_values(phi, cfg, emit_per_replica):
        yield r, Configuration(cfg.window, tuple(int(v) for v in vals), cfg.boundary)


def plus_phase_sampler(
    beta: float,
    d: int,
    window: Window,
    margin: int,
    master_seed: int = 0,
    replica_count: int = 1,
    emit_per_replica: int = 1,
    burn_in_sweeps: Optional[int] = None,
    thin_sweeps: int = 1,
) -> Iterator[Configuration]:
    """Plus-boundary Ising chains on window + margin; emits the inner
    restriction.  Default burn-in is ten times the high-temperature default."""
    from .potentials import IsingPotential

    if beta <= 0:
        raise ValidationError("plus_phase_sampler needs beta > 0")
    if margin < 1:
        raise ValidationError("plus_phase_sampler needs margin >= 1")
    box = pad_box(window, margin)
    cfg = ChainConfig(
        window=box,
        boundary=ALL_PLUS,
        sweep_order="checkerboard" if d in (1, 2) else "systematic",
        burn_in_sweeps=burn_in_sweeps,
        thin_sweeps=thin_sweeps,
        master_seed=master_seed,
        replica_count=replica_count,
    )
    if burn_in_sweeps is None:
        cfg = replace(cfg, burn_in_sweeps=10 * cfg.resolved_burn_in())
    phi = IsingPotential(beta, 1.0, 0.0, d)
    for _, state in sample_measure(phi, cfg, emit_per_replica=emit_per_replica):
        yield state.restrict(window)


def exact_sample(mu: FiniteMeasure, rng: np.random.Generator) -> Configuration:
    """Inverse-CDF sampling over the measure's atoms in canonical order."""
    if mu.window is None:
        raise DomainError("exact_sample needs a configuration-valued measure")
    cdf = np.cumsum(mu.weights)
    idx = int(np.searchsorted(cdf, rng.random()))
    idx = min(idx, mu.size - 1)
    return mu.atom_config(idx)
