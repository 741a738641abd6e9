import json
import math
from pathlib import Path

import numpy as np
import pytest

from gibbslab.cli import EXIT_OK, EXIT_REGIME, EXIT_VALIDATION, main


def write_config(tmp_path, name, payload):
    p = tmp_path / name
    p.write_text(json.dumps(payload))
    return str(p)


def read_csv(path: Path):
    lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
    header = lines[0].split(",")
    rows = [l.split(",") for l in lines[1:]]
    return header, rows


def csv_body(path: Path) -> str:
    return "\n".join(l for l in path.read_text().splitlines() if not l.startswith("#"))


def test_dobrushin_grid_and_threshold(tmp_path):
    cfg = write_config(
        tmp_path,
        "dob.json",
        {
            "model": {"kind": "ising", "beta": 0.2, "coupling": 1.0, "field": 0.0, "dimension": 2},
            "beta_grid": [0.01, 0.6, 13],
            "bisect_threshold": True,
        },
    )
    rc = main(["dobrushin", "--config", cfg, "--out", str(tmp_path), "--stamp", "t"])
    assert rc == EXIT_OK
    header, rows = read_csv(tmp_path / "dobrushin_t.csv")
    assert header == ["beta", "coefficient", "truncation_error", "method", "in_uniqueness"]
    assert len(rows) == 13
    sh, srows = read_csv(tmp_path / "dobrushin_summary_t.csv")
    thr = float(dict(srows)["threshold_beta"])
    assert thr == pytest.approx(0.5 * math.log(5 / 3), abs=1e-3)


def test_tail_beta_zero_exact(tmp_path):
    cfg = write_config(
        tmp_path,
        "tail.json",
        {
            "model": {"kind": "ising", "beta": 0.0, "dimension": 2},
            "window_side": 3,
            "exact_iid": True,
        },
    )
    rc = main(["tail", "--config", cfg, "--out", str(tmp_path), "--stamp", "t"])
    assert rc == EXIT_OK
    header, rows = read_csv(tmp_path / "tail_t.csv")
    assert header == ["u", "emp_tail", "ci_lo", "ci_hi", "bound", "bound_kind", "verdict"]
    assert all(r[6] == "respected" for r in rows)
    assert (tmp_path / "run_config_resolved.json").exists()


def test_tail_mc_run_and_json_format(tmp_path):
    cfg = write_config(
        tmp_path,
        "tailmc.json",
        {
            "model": {"kind": "ising", "beta": 0.15, "dimension": 2},
            "window_side": 4,
            "sampler": {"replica_count": 60, "emit_per_replica": 3,
                        "burn_in_sweeps": 20, "thin_sweeps": 2},
            "seed": 9,
        },
    )
    rc = main(["tail", "--config", cfg, "--out", str(tmp_path), "--format", "json", "--stamp", "t"])
    assert rc == EXIT_OK
    doc = json.loads((tmp_path / "tail_t.json").read_text())
    assert doc["config"]["seed"] == 9
    report = doc["data"]["report"]
    assert len(report["u_grid"]) == len(report["empirical"])


def test_malformed_config_exit_2(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert main(["tail", "--config", str(p), "--out", str(tmp_path)]) == EXIT_VALIDATION

    cfg = write_config(tmp_path, "unknown.json", {
        "model": {"kind": "ising", "beta": 0.1}, "window_side": 3, "bogus_key": 1,
    })
    assert main(["tail", "--config", cfg, "--out", str(tmp_path)]) == EXIT_VALIDATION

    cfg2 = write_config(tmp_path, "missing.json", {"model": {"kind": "ising", "beta": 0.1}})
    assert main(["tail", "--config", cfg2, "--out", str(tmp_path)]) == EXIT_VALIDATION


def test_regime_error_exit_3(tmp_path):
    cfg = write_config(
        tmp_path,
        "hot.json",
        {
            "model": {"kind": "ising", "beta": 0.6, "dimension": 2},
            "window_side": 3,
            "sampler": {"replica_count": 20, "emit_per_replica": 2,
                        "burn_in_sweeps": 5, "thin_sweeps": 1},
        },
    )
    assert main(["tail", "--config", cfg, "--out", str(tmp_path)]) == EXIT_REGIME


def test_byte_identical_reruns(tmp_path):
    cfg = write_config(
        tmp_path,
        "rep.json",
        {
            "model": {"kind": "ising", "beta": 0.1, "dimension": 2},
            "window_side": 3,
            "sampler": {"replica_count": 30, "emit_per_replica": 2,
                        "burn_in_sweeps": 10, "thin_sweeps": 1},
            "seed": 4,
        },
    )
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["tail", "--config", cfg, "--out", str(out1), "--stamp", "s1"]) == EXIT_OK
    assert main(["tail", "--config", cfg, "--out", str(out2), "--stamp", "s2"]) == EXIT_OK
    assert csv_body(out1 / "tail_s1.csv") == csv_body(out2 / "tail_s2.csv")


def test_netcounts_and_smb_and_dbar(tmp_path):
    cfg = write_config(tmp_path, "net.json", {"n": 1, "alphabet_size": 2, "dimension": 1})
    assert main(["netcounts", "--config", cfg, "--out", str(tmp_path), "--stamp", "t"]) == EXIT_OK
    _, srows = read_csv(tmp_path / "netcounts_summary_t.csv")
    summary = dict(srows)
    assert float(summary["log_F_exact"]) == pytest.approx(math.log(243))

    smb_cfg = write_config(
        tmp_path, "smb.json",
        {"model": {"kind": "ising", "beta": 0.2, "dimension": 2}, "n": 1, "margin": 1},
    )
    assert main(["smb", "--config", smb_cfg, "--out", str(tmp_path), "--stamp", "t"]) == EXIT_OK

    dbar_cfg = write_config(
        tmp_path, "dbar.json",
        {
            "model": {"kind": "ising", "beta": 0.1, "dimension": 2},
            "psi": {"kind": "ising", "beta": 0.15, "dimension": 2},
            "n": 1,
        },
    )
    assert main(["dbar", "--config", dbar_cfg, "--out", str(tmp_path), "--stamp", "t"]) == EXIT_OK
    _, rows = read_csv(tmp_path / "dbar_t.csv")
    vals = dict(rows)
    assert float(vals["slack"]) > 0


def test_sample_command(tmp_path):
    cfg = write_config(
        tmp_path, "sample.json",
        {
            "model": {"kind": "potts", "beta": 1.0, "colors": 9, "dimension": 2},
            "window_side": 6,
            "sampler": {"replica_count": 2, "emit_per_replica": 3,
                        "burn_in_sweeps": 10, "thin_sweeps": 1},
        },
    )
    assert main(["sample", "--config", cfg, "--out", str(tmp_path), "--stamp", "t"]) == EXIT_OK
    header, rows = read_csv(tmp_path / "sample_t.csv")
    assert header == ["replica", "emission", "mean_spin"]
    assert len(rows) == 6


def test_asclt_command_thread_env(tmp_path, monkeypatch):
    monkeypatch.setenv("GIBBSLAB_THREADS", "2")
    cfg = write_config(
        tmp_path, "asclt.json",
        {"mode": "iid", "N_max": 128, "Ns": [32, 128], "seeds": 2, "seed": 1},
    )
    assert main(["asclt", "--config", cfg, "--out", str(tmp_path), "--stamp", "t"]) == EXIT_OK
    header, rows = read_csv(tmp_path / "asclt_t.csv")
    assert header == ["seed", "N", "d_K", "sigma2", "sigma2_doubled"]
    assert len(rows) == 4


def test_fatten_and_waiting_and_fit(tmp_path):
    fat_cfg = write_config(
        tmp_path, "fat.json",
        {
            "model": {"kind": "ising", "beta": 0.0, "dimension": 2},
            "window_side": 3,
            "eps_grid": [0.2, 0.45, 0.6, 1.0],
        },
    )
    assert main(["fatten", "--config", fat_cfg, "--out", str(tmp_path), "--stamp", "t"]) == EXIT_OK

    wait_cfg = write_config(
        tmp_path, "wait.json",
        {
            "model": {"kind": "ising", "beta": 0.0, "dimension": 2},
            "n": 0, "k_max": 8, "n_pairs": 60,
            "burn_in_sweeps": 2, "thin_sweeps": 1,
        },
    )
    assert main(["waiting", "--config", wait_cfg, "--out", str(tmp_path), "--stamp", "t"]) == EXIT_OK

    fit_cfg = write_config(
        tmp_path, "fit.json",
        {"beta": 0.8, "window_side": 6, "margin": 3, "samples": 600,
         "burn_in_sweeps": 60, "thin_sweeps": 2},
    )
    assert main(["fit-lowtemp", "--config", fit_cfg, "--out", str(tmp_path), "--stamp", "t"]) == EXIT_OK
    _, rows = read_csv(tmp_path / "fit-lowtemp_t.csv")
    vals = dict(rows)
    assert "rho" in vals


def test_violation_exit_code_path():
    # _finish_tail maps a violated verdict in certified settings to exit 4
    import numpy as np

    from gibbslab.cli import EXIT_VIOLATION, _finish_tail
    from gibbslab.experiments import TailReport

    report = TailReport(
        experiment="tail",
        model={"kind": "ising"},
        run_info={},
        bound_kind="gaussian",
        bound_direction="upper",
        u_grid=np.array([1.0]),
        empirical=np.array([0.5]),
        ci_lo=np.array([0.4]),
        ci_hi=np.array([0.6]),
        bound_values=np.array([0.1]),
        verdicts=["violated"],
        seed=0,
        n_samples=100,
    )

    class Ctx:
        def emit(self, *args, **kwargs):
            pass

    assert _finish_tail(Ctx(), "tail", report, certified=True) == EXIT_VIOLATION
    assert _finish_tail(Ctx(), "tail", report, certified=False) == EXIT_OK


def test_periodic_boundary_rejected_for_exact_commands(tmp_path):
    cfg = write_config(
        tmp_path, "smbp.json",
        {"model": {"kind": "ising", "beta": 0.2, "dimension": 2}, "n": 1,
         "boundary": "periodic"},
    )
    assert main(["smb", "--config", cfg, "--out", str(tmp_path)]) == EXIT_VALIDATION


def test_periodic_boundary_sampling_via_cli(tmp_path):
    cfg = write_config(
        tmp_path, "samplep.json",
        {
            "model": {"kind": "ising", "beta": 0.3, "dimension": 2},
            "window_side": 4,
            "boundary": "periodic",
            "sampler": {"replica_count": 2, "emit_per_replica": 3,
                        "burn_in_sweeps": 10, "thin_sweeps": 1},
        },
    )
    assert main(["sample", "--config", cfg, "--out", str(tmp_path), "--stamp", "t"]) == EXIT_OK


def test_asclt_chain_mode_via_cli(tmp_path):
    cfg = write_config(
        tmp_path, "ascltc.json",
        {"mode": "chain", "N_max": 8, "Ns": [4, 8], "seeds": 1,
         "model": {"kind": "ising", "beta": 0.15, "dimension": 2},
         "margin": 2, "seed": 3},
    )
    assert main(["asclt", "--config", cfg, "--out", str(tmp_path), "--stamp", "t"]) == EXIT_OK

    missing = write_config(tmp_path, "ascltm.json", {"mode": "chain", "N_max": 8})
    assert main(["asclt", "--config", missing, "--out", str(tmp_path)]) == EXIT_VALIDATION


def test_sample_auto_order_general_model(tmp_path):
    cfg = write_config(
        tmp_path, "samplelr.json",
        {
            "model": {"kind": "long_range", "beta": 0.1, "dimension": 1,
                      "truncation_radius": 2, "decay": 2.0},
            "window_side": 5,
            "sampler": {"replica_count": 1, "emit_per_replica": 2,
                        "burn_in_sweeps": 5, "thin_sweeps": 1, "sweep_order": "auto"},
        },
    )
    assert main(["sample", "--config", cfg, "--out", str(tmp_path), "--stamp", "t"]) == EXIT_OK


def test_asclt_outputs_identical_across_thread_caps(tmp_path, monkeypatch):
    cfg = write_config(
        tmp_path, "ascltt.json",
        {"mode": "iid", "N_max": 128, "Ns": [32, 128], "seeds": 3, "seed": 2},
    )
    monkeypatch.setenv("GIBBSLAB_THREADS", "1")
    out1 = tmp_path / "t1"
    assert main(["asclt", "--config", cfg, "--out", str(out1), "--stamp", "s"]) == EXIT_OK
    monkeypatch.setenv("GIBBSLAB_THREADS", "3")
    out2 = tmp_path / "t2"
    assert main(["asclt", "--config", cfg, "--out", str(out2), "--stamp", "s"]) == EXIT_OK
    assert csv_body(out1 / "asclt_s.csv") == csv_body(out2 / "asclt_s.csv")


def test_smb_mc_mode_via_cli(tmp_path):
    cfg = write_config(
        tmp_path, "smbmc.json",
        {
            "model": {"kind": "ising", "beta": 0.1, "dimension": 2},
            "n": 0, "mode": "mc", "margin": 2,
            "sampler": {"replica_count": 4, "emit_per_replica": 400,
                        "burn_in_sweeps": 20, "thin_sweeps": 1},
            "seed": 5,
        },
    )
    assert main(["smb", "--config", cfg, "--out", str(tmp_path), "--stamp", "t"]) == EXIT_OK
    header, rows = read_csv(tmp_path / "smb_t.csv")
    assert header[0] == "u"
