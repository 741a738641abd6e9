"""Command-line entry point: JSON-configured experiment runs persisted as CSV
or JSON reports.

Exit codes: 0 success; 2 configuration/validation error; 3 regime error
(a derived Gaussian bound was requested with coefficient >= 1); 4 a
bound-violation verdict occurred in a certified (derived-constant) setting.

Outputs land in `<out>/<experiment>_<stamp>.csv|.json` next to
`run_config_resolved.json`.  Identical config and seed reproduce the outputs
byte for byte, except for the leading `#`-prefixed timestamp line.  The env
var GIBBSLAB_THREADS caps worker threads for multi-seed runs.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
import time
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_REGIME = 3
EXIT_VIOLATION = 4

COMMANDS = (
    "dobrushin",
    "sample",
    "tail",
    "paircorr",
    "empmeasure",
    "smb",
    "waiting",
    "fatten",
    "asclt",
    "dbar",
    "fit-lowtemp",
    "netcounts",
)


def _schema() -> Dict:
    path = Path(__file__).with_name("config_schema.json")
    return json.loads(path.read_text())


def load_config(path: str, command: str) -> Dict:
    from jsonschema import Draft202012Validator

    from .errors import ValidationError

    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read config file: {exc}")
    try:
        config = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config is not valid JSON (line {exc.lineno}, column {exc.colno}): {exc.msg}")
    doc = _schema()
    schema = dict(doc["$defs"][command])
    schema["$defs"] = doc["$defs"]
    validator = Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(config), key=lambda e: list(e.absolute_path))
    if errors:
        first = errors[0]
        where = "/".join(str(p) for p in first.absolute_path) or "<root>"
        raise ValidationError(f"config field '{where}': {first.message}")
    return config


def build_potential(model: Dict):
    from .potentials import IsingPotential, LongRangePairPotential, PottsPotential

    kind = model["kind"]
    if kind == "ising":
        return IsingPotential(
            beta=model["beta"],
            coupling=model.get("coupling", 1.0),
            field=model.get("field", 0.0),
            dimension=model.get("dimension", 2),
        )
    if kind == "potts":
        return PottsPotential(
            beta=model["beta"],
            coupling=model.get("coupling", 1.0),
            colors=model.get("colors", 3),
            dimension=model.get("dimension", 2),
        )
    return LongRangePairPotential(
        beta=model["beta"],
        dimension=model.get("dimension", 1),
        truncation_radius=model.get("truncation_radius", 4),
        amplitude=model.get("amplitude", 1.0),
        decay=model.get("decay"),
    )


def build_boundary(name: Optional[str]):
    from .lattice import ALL_MINUS, ALL_PLUS, FREE, PERIODIC

    return {
        "free": FREE,
        "all_plus": ALL_PLUS,
        "all_minus": ALL_MINUS,
        "periodic": PERIODIC,
        None: FREE,
    }[name]


def build_bound_params(spec):
    from .dobrushin import BoundParams

    if spec in (None, "derive"):
        return None
    return BoundParams(
        kind=spec["kind"],
        provenance=spec.get("provenance", "user-supplied"),
        D=spec.get("D"),
        p=spec.get("p"),
        C2p=spec.get("C2p"),
        rho=spec.get("rho"),
        c_rho=spec.get("c_rho"),
        K_rho=spec.get("K_rho"),
    )


def fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence], stamp: str, config: Dict):
    lines = [f"# generated {stamp}", f"# config {json.dumps(config, sort_keys=True)}"]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _to_jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {k: _to_jsonable(v) for k, v in dataclasses.asdict(obj).items()}
    if isinstance(obj, dict):
        return {str(k): _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def write_json(path: Path, payload: Dict, stamp: str, config: Dict):
    doc = {"generated": stamp, "config": config, "data": _to_jsonable(payload)}
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_to_jsonable) + "\n")


def tail_report_rows(report) -> Tuple[List[str], List[List]]:
    header = ["u", "emp_tail", "ci_lo", "ci_hi", "bound", "bound_kind", "verdict"]
    rows = [
        [r["u"], r["emp_tail"], r["ci_lo"], r["ci_hi"], r["bound"], r["bound_kind"], r["verdict"]]
        for r in report.rows()
    ]
    return header, rows


def summary_rows(pairs: Dict[str, object]) -> Tuple[List[str], List[List]]:
    return ["key", "value"], [[k, fmt(v) if isinstance(v, float) else v] for k, v in pairs.items()]


def thread_cap() -> int:
    try:
        return max(1, int(os.environ.get("GIBBSLAB_THREADS", "1")))
    except ValueError:
        return 1


class RunContext:
    def __init__(self, args, config: Dict):
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.fmt = args.format
        self.stamp = args.stamp or time.strftime("%Y%m%dT%H%M%S")
        self.config = config
        self.seed = args.seed if args.seed is not None else config.get("seed", 0)

    def emit(self, name: str, header, rows, payload: Dict):
        resolved = dict(self.config)
        resolved["seed"] = self.seed
        if self.fmt == "csv":
            write_csv(self.out / f"{name}_{self.stamp}.csv", header, rows, self.stamp, resolved)
        else:
            write_json(self.out / f"{name}_{self.stamp}.json", payload, self.stamp, resolved)
        (self.out / "run_config_resolved.json").write_text(
            json.dumps(resolved, indent=2, sort_keys=True) + "\n"
        )


def _sampler_kwargs(config: Dict) -> Dict:
    s = config.get("sampler", {})
    return {
        "replica_count": s.get("replica_count", 100),
        "emit_per_replica": s.get("emit_per_replica", 10),
        "burn_in": s.get("burn_in_sweeps", 100),
        "thin": s.get("thin_sweeps", 4),
    }


def cmd_dobrushin(ctx: RunContext, config: Dict) -> int:
    from .dobrushin import dobrushin_coefficient, uniqueness_threshold
    from .potentials import with_beta

    phi = build_potential(config["model"])
    grid_spec = config.get("beta_grid")
    betas = (
        np.linspace(grid_spec[0], grid_spec[1], int(grid_spec[2]))
        if grid_spec
        else np.array([phi.beta])
    )
    rows = []
    for beta in betas:
        rep = dobrushin_coefficient(with_beta(phi, float(beta)))
        rows.append(
            [float(beta), rep.coefficient, rep.truncation_error, rep.method, rep.in_uniqueness]
        )
    payload = {"rows": rows}
    extra = {}
    if config.get("bisect_threshold"):
        lo, hi = float(betas.min()), float(betas.max())
        thr = uniqueness_threshold(lambda b: with_beta(phi, b), max(lo, 1e-6), hi)
        extra["threshold_beta"] = thr
        payload["threshold_beta"] = thr
    header = ["beta", "coefficient", "truncation_error", "method", "in_uniqueness"]
    ctx.emit("dobrushin", header, rows, payload)
    if extra:
        h2, r2 = summary_rows(extra)
        if ctx.fmt == "csv":
            write_csv(ctx.out / f"dobrushin_summary_{ctx.stamp}.csv", h2, r2, ctx.stamp, config)
    return EXIT_OK


def cmd_sample(ctx: RunContext, config: Dict) -> int:
    from .lattice import centered_rect
    from .sampler import ChainConfig, sample_values

    phi = build_potential(config["model"])
    window = centered_rect(config["window_side"], phi.dimension)
    s = config.get("sampler", {})
    order = s.get("sweep_order", "auto")
    if order == "auto":
        from .sampler import _engine_applicable

        order = "checkerboard" if _engine_applicable(phi, window) else "systematic"
    cfg = ChainConfig(
        window=window,
        boundary=build_boundary(config.get("boundary")),
        sweep_order=order,
        burn_in_sweeps=s.get("burn_in_sweeps"),
        thin_sweeps=s.get("thin_sweeps", 1),
        master_seed=ctx.seed,
        replica_count=s.get("replica_count", 1),
    )
    emit = s.get("emit_per_replica", 10)
    rows = []
    k = 0
    for r, vals in sample_values(phi, cfg, emit_per_replica=emit):
        rows.append([r, k // cfg.replica_count, float(vals.astype(np.int64).sum()) / window.size])
        k += 1
    header = ["replica", "emission", "mean_spin"]
    ctx.emit("sample", header, rows, {"rows": rows})
    return EXIT_OK


def _finish_tail(ctx: RunContext, name: str, report, certified: bool) -> int:
    header, rows = tail_report_rows(report)
    ctx.emit(name, header, rows, {"report": report})
    if certified and report.violated:
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_tail(ctx: RunContext, config: Dict) -> int:
    from .experiments import run_ergodic_tail, run_ergodic_tail_exact_iid
    from .lattice import centered_rect
    from .observables import mean_energy_observable, spin_at_origin

    phi = build_potential(config["model"])
    if config.get("exact_iid"):
        if phi.beta != 0.0:
            from .errors import ValidationError

            raise ValidationError("exact_iid mode requires beta = 0")
        vol = config["window_side"] ** phi.dimension
        grid = config.get("u_grid") or list(np.linspace(0.25, 4.0, 16))
        report = run_ergodic_tail_exact_iid(vol, grid)
        return _finish_tail(ctx, "tail", report, certified=True)
    lam = centered_rect(config["window_side"], phi.dimension)
    f = (
        spin_at_origin(phi.dimension)
        if config.get("observable", "s0") == "s0"
        else mean_energy_observable(phi)
    )
    bound = build_bound_params(config.get("bound"))
    report = run_ergodic_tail(
        phi,
        f,
        lam,
        margin=config.get("margin", 2),
        boundary=build_boundary(config.get("boundary")),
        u_grid=config.get("u_grid"),
        bound_params=bound,
        master_seed=ctx.seed,
        **_sampler_kwargs(config),
    )
    return _finish_tail(ctx, "tail", report, certified=bound is None)


def cmd_paircorr(ctx: RunContext, config: Dict) -> int:
    from .experiments import run_pair_correlation_tail
    from .observables import spin_at_origin

    phi = build_potential(config["model"])
    bound = build_bound_params(config.get("bound"))
    report = run_pair_correlation_tail(
        phi,
        spin_at_origin(phi.dimension),
        config["n"],
        tuple(config["x"]),
        margin=config.get("margin", 2),
        boundary=build_boundary(config.get("boundary")),
        u_grid=config.get("u_grid"),
        bound_params=bound,
        master_seed=ctx.seed,
        **_sampler_kwargs(config),
    )
    return _finish_tail(ctx, "paircorr", report, certified=bound is None)


def cmd_empmeasure(ctx: RunContext, config: Dict) -> int:
    from .experiments import run_empirical_measure
    from .lattice import centered_rect, cube

    phi = build_potential(config["model"])
    lam = centered_rect(config["window_side"], phi.dimension)
    out_win = cube(config.get("window_out_radius", 0), phi.dimension)
    report = run_empirical_measure(
        phi,
        lam,
        out_win,
        margin=config.get("margin", 2),
        boundary=build_boundary(config.get("boundary")),
        u_grid=config.get("u_grid"),
        master_seed=ctx.seed,
        **_sampler_kwargs(config),
    )
    return _finish_tail(ctx, "empmeasure", report, certified=True)


def cmd_smb(ctx: RunContext, config: Dict) -> int:
    from .experiments import run_smb, run_smb_mc

    phi = build_potential(config["model"])
    if config.get("mode", "exact") == "mc":
        if "psi" in config:
            from .errors import ValidationError

            raise ValidationError("MC SMB mode does not support a second potential")
        res_mc = run_smb_mc(
            phi,
            config["n"],
            margin=config.get("margin", 3),
            boundary=build_boundary(config.get("boundary")),
            master_seed=ctx.seed,
            u_grid=config.get("u_grid"),
            **_sampler_kwargs(config),
        )
        header, rows = tail_report_rows(res_mc.report)
        payload = {
            "report": res_mc.report,
            "per_site_mean": res_mc.per_site_mean,
            "coverage": res_mc.coverage,
        }
        ctx.emit("smb", header, rows, payload)
        # plug-in estimates are biased; verdicts are advisory, never exit 4
        return EXIT_OK
    psi = build_potential(config["psi"]) if "psi" in config else None
    res = run_smb(
        phi,
        config["n"],
        margin=config.get("margin", 1),
        boundary=build_boundary(config.get("boundary")),
        psi=psi,
        u_grid=config.get("u_grid"),
    )
    header, rows = tail_report_rows(res.centered)
    payload = {
        "centered": res.centered,
        "entropy_centered": res.entropy_centered,
        "per_site_mean": res.per_site_mean,
        "block_entropy_rate": res.block_entropy_rate,
    }
    ctx.emit("smb", header, rows, payload)
    if res.centered.violated or res.entropy_centered.violated:
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_waiting(ctx: RunContext, config: Dict) -> int:
    from .experiments import run_waiting_time

    phi = build_potential(config["model"])
    psi = build_potential(config["psi"]) if "psi" in config else None
    rep = run_waiting_time(
        phi,
        config["n"],
        config["k_max"],
        psi=psi,
        margin=config.get("margin", 2),
        master_seed=ctx.seed,
        n_pairs=config.get("n_pairs", 400),
        burn_in=config.get("burn_in_sweeps", 60),
        thin=config.get("thin_sweeps", 4),
    )
    pairs = {
        "n": rep.n,
        "k_max": rep.k_max,
        "n_pairs": rep.n_pairs,
        "censored_fraction": rep.censored_fraction,
        "center_estimate": rep.center_estimate,
        "mean_log_w_per_site": rep.mean_log_w_per_site,
        "upper_slope": rep.upper_slope,
        "lower_slope": rep.lower_slope,
    }
    header, rows = summary_rows(pairs)
    ctx.emit("waiting", header, rows, {"report": rep})
    return EXIT_OK


def cmd_fatten(ctx: RunContext, config: Dict) -> int:
    from .experiments import run_fattening
    from .lattice import centered_rect

    phi = build_potential(config["model"])
    lam = centered_rect(config["window_side"], phi.dimension)
    bound = build_bound_params(config.get("bound"))
    report = run_fattening(
        phi,
        lam,
        config["eps_grid"],
        boundary=build_boundary(config.get("boundary")),
        bound_params=bound,
    )
    return _finish_tail(ctx, "fatten", report, certified=bound is None)


def cmd_asclt(ctx: RunContext, config: Dict) -> int:
    from concurrent.futures import ThreadPoolExecutor

    from .experiments import run_asclt_chain, run_asclt_iid

    from .errors import ValidationError

    mode = config["mode"]
    if mode == "chain" and "model" not in config:
        raise ValidationError("asclt chain mode needs a 'model'")
    n_max = config["N_max"]
    ns = config.get("Ns") or [max(n_max // 16, 1), max(n_max // 4, 1), n_max]
    seeds = config.get("seeds", 1)

    def one(seed: int):
        if mode == "iid":
            return run_asclt_iid(n_max, ns, master_seed=seed)
        phi = build_potential(config["model"])
        return run_asclt_chain(
            phi, n_max, ns, margin=config.get("margin", 2), master_seed=seed,
            sigma_radius=config.get("sigma_radius", 3),
        )

    workers = thread_cap()
    seed_list = [ctx.seed + i for i in range(seeds)]
    if workers > 1 and seeds > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(one, seed_list))
    else:
        records = [one(s) for s in seed_list]
    rows = []
    for rec in records:
        for N, dist in zip(rec.Ns, rec.distances):
            rows.append([rec.seed, N, dist, rec.sigma2, rec.sigma2_doubled])
    header = ["seed", "N", "d_K", "sigma2", "sigma2_doubled"]
    ctx.emit("asclt", header, rows, {"records": records})
    return EXIT_OK


def cmd_dbar(ctx: RunContext, config: Dict) -> int:
    from .experiments import run_dbar_entropy

    phi = build_potential(config["model"])
    psi = build_potential(config["psi"])
    rep = run_dbar_entropy(
        phi, psi, config["n"], margin=config.get("margin", 1),
        boundary=build_boundary(config.get("boundary")),
    )
    pairs = {
        "n": rep.n,
        "dbar_total": rep.dbar_total,
        "dbar_per_site": rep.dbar_per_site,
        "entropy_rate": rep.entropy_rate,
        "bound_total": rep.bound_total,
        "slack": rep.slack,
        "potential_diff_bound_per_site": rep.potential_diff_bound_per_site,
    }
    header, rows = summary_rows(pairs)
    ctx.emit("dbar", header, rows, {"report": rep})
    return EXIT_VIOLATION if not rep.respected else EXIT_OK


def cmd_fit_lowtemp(ctx: RunContext, config: Dict) -> int:
    from .experiments import fit_low_temp_params
    from .lattice import centered_rect
    from .sampler import plus_phase_sampler

    beta = config["beta"]
    side = config["window_side"]
    window = centered_rect(side, 2)
    samples = config.get("samples", 10000)
    mags = np.empty(samples)
    gen = plus_phase_sampler(
        beta, 2, window, config.get("margin", 4), master_seed=ctx.seed,
        replica_count=8, emit_per_replica=(samples + 7) // 8,
        burn_in_sweeps=config.get("burn_in_sweeps"),
        thin_sweeps=config.get("thin_sweeps", 3),
    )
    for i, state in enumerate(gen):
        if i >= samples:
            break
        mags[i] = sum(state.values)
    zs = (mags - mags.mean()) / math.sqrt(4.0 * window.size)
    fit = fit_low_temp_params(zs)
    pairs = {
        "rho": fit.rho,
        "c_rho": fit.c_rho,
        "kappa": fit.kappa,
        "C2": fit.moments[1],
        "C4": fit.moments[2],
        "C6": fit.moments[3],
        "c2_ok": fit.c2_ok,
        "advisory": fit.advisory or "",
        "n_samples": fit.n_samples,
    }
    header, rows = summary_rows(pairs)
    ctx.emit("fit-lowtemp", header, rows, {"fit": fit})
    return EXIT_OK


def cmd_netcounts(ctx: RunContext, config: Dict) -> int:
    from .nets import expected_distance_bound, expected_distance_bound_moment, net_counts

    counts = net_counts(config["n"], config["alphabet_size"], config["dimension"])
    rows = [
        [k + 1, p, counts.group_sizes[k] if k < len(counts.group_sizes) else ""]
        for k, p in enumerate(counts.P)
    ]
    if len(counts.group_sizes) > len(counts.P):
        rows.append([len(counts.P) + 1, "", counts.group_sizes[-1]])
    header = ["k", "P_nk", "group_size"]
    payload: Dict[str, object] = {"counts": counts}
    if "card_lambda" in config and "D1" in config:
        b = expected_distance_bound(
            config["card_lambda"], config["D1"], config["alphabet_size"], config["dimension"]
        )
        payload["expected_distance_bound"] = b
        if "kappa" in config:
            payload["expected_distance_bound_moment"] = expected_distance_bound_moment(
                config["card_lambda"], config["kappa"], config["alphabet_size"], config["dimension"]
            )
    ctx.emit("netcounts", header, rows, payload)
    if ctx.fmt == "csv":
        extra = {
            "log_F_eps": counts.log_F_eps,
            "log_F_exact": counts.log_F_exact,
            "epsilon": counts.epsilon,
        }
        h2, r2 = summary_rows(extra)
        write_csv(ctx.out / f"netcounts_summary_{ctx.stamp}.csv", h2, r2, ctx.stamp, config)
    return EXIT_OK


HANDLERS = {
    "dobrushin": cmd_dobrushin,
    "sample": cmd_sample,
    "tail": cmd_tail,
    "paircorr": cmd_paircorr,
    "empmeasure": cmd_empmeasure,
    "smb": cmd_smb,
    "waiting": cmd_waiting,
    "fatten": cmd_fatten,
    "asclt": cmd_asclt,
    "dbar": cmd_dbar,
    "fit-lowtemp": cmd_fit_lowtemp,
    "netcounts": cmd_netcounts,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gibbslab",
        description="Lattice Gibbs measures, Dobrushin bounds, and verification experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON configuration file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--format", choices=["csv", "json"], default="csv")
        p.add_argument("--stamp", default=None, help="fixed label instead of a timestamp")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    from .errors import DomainError, RegimeError, SizeError, ValidationError

    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config, args.command)
        ctx = RunContext(args, config)
        return HANDLERS[args.command](ctx, config)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except RegimeError as exc:
        print(f"regime error: {exc}", file=sys.stderr)
        return EXIT_REGIME
    except (DomainError, SizeError) as exc:
        print(f"invalid request: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
