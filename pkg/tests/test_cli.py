import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

from parabolic_delay import InvariantViolation, cli

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def small_config(**changes):
    cfg = json.loads((CONFIGS / "heat_delay.json").read_text())
    cfg["T"] = 1.0
    cfg["grid"]["cells"] = [16]
    cfg["solver"]["dt"] = 0.005
    cfg["experiments"]["converge-coeff"] = {"m": [2, 4, 8, 16], "T1": 0.5}
    cfg["experiments"]["converge-delay"] = {"m": [4, 8, 16, 32]}
    cfg["experiments"]["gronwall"] = {"stride": 10}
    cfg["experiments"]["smoothing"] = {"times": [0.02, 0.04, 0.08, 0.16]}
    cfg.update(changes)
    return cfg


def write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def run(tmp_path, command, cfg, out="out", *extra):
    return cli.main([command, "--config", write(tmp_path, cfg), "--out", str(tmp_path / out),
                     *extra])


def test_schema_error_names_field(tmp_path, capsys):
    cfg = small_config()
    cfg["grid"]["cells"] = [1]
    assert run(tmp_path, "solve", cfg) == 2
    err = capsys.readouterr().err
    assert "config error at grid.cells[0]" in err


def test_schema_version_and_unknown_keys(tmp_path, capsys):
    cfg = small_config(schema_version=2)
    assert run(tmp_path, "solve", cfg) == 2
    assert "schema_version" in capsys.readouterr().err
    cfg = small_config()
    cfg["solver"]["speed"] = 3
    assert run(tmp_path, "solve", cfg) == 2
    assert "config error at solver" in capsys.readouterr().err


def test_unreadable_config(tmp_path, capsys):
    assert cli.main(["solve", "--config", str(tmp_path / "missing.json")]) == 2
    (tmp_path / "broken.json").write_text("{not json")
    assert cli.main(["solve", "--config", str(tmp_path / "broken.json")]) == 2


def test_misaligned_dt_rejected(tmp_path, capsys):
    cfg = small_config()
    cfg["solver"]["dt"] = 0.3
    assert run(tmp_path, "solve", cfg) == 2
    assert "solver.dt" in capsys.readouterr().err


def test_solve_writes_history_first(tmp_path):
    assert run(tmp_path, "solve", small_config()) == 0
    rows = list(csv.reader((tmp_path / "out" / "trajectory.csv").open(newline="")))
    assert rows[0][0] == "t" and float(rows[1][0]) == -1.0
    meta = json.loads((tmp_path / "out" / "trajectory.json").read_text())
    assert meta["method"] == "march" and {"K", "alpha0", "grid", "delay"} <= set(meta)
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["checks"]["seam"] and summary["passed"]


def test_picard_solve_records_constants(tmp_path):
    cfg = small_config()
    cfg["solver"]["method"] = "picard"
    assert run(tmp_path, "solve", cfg) == 0
    meta = json.loads((tmp_path / "out" / "trajectory.json").read_text())
    for key in ("M", "K", "gamma", "theta0", "alpha0"):
        assert key in meta


def test_verify_reports_exact_cocycle(tmp_path):
    assert run(tmp_path, "verify", small_config()) == 0
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["cocycle_residual"] == 0.0
    assert summary["duality_residual"] <= 1e-10
    assert summary["kernel_min_over_max"] >= -1e-12


def test_converge_coeff_csv(tmp_path):
    assert run(tmp_path, "converge-coeff", small_config()) == 0
    rows = list(csv.DictReader((tmp_path / "out" / "converge-coeff.csv").open(newline="")))
    E = [float(r["E"]) for r in rows]
    assert all(e > 0 for e in E)
    assert all(b <= 1.1 * a for a, b in zip(E, E[1:]))


@pytest.mark.parametrize("command", ["converge-ic", "converge-delay", "gronwall"])
def test_other_commands_pass(tmp_path, command):
    assert run(tmp_path, command, small_config()) == 0


def test_smoothing_command(tmp_path):
    cfg = small_config(T=0.02)
    cfg["grid"]["cells"] = [128]
    cfg["solver"]["dt"] = 1e-4
    cfg["experiments"]["smoothing"] = {"times": [1e-4, 0.001, 0.002, 0.004, 0.008, 0.016]}
    assert run(tmp_path, "smoothing", cfg) == 0
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["flagged"] == [1e-4]
    rows = list(csv.reader((tmp_path / "out" / "smoothing.csv").open(newline="")))
    assert rows[0] == ["t", "norm_1_inf"] and len(rows) == 6


def test_non_exact_p_rejected_for_norm_checks(tmp_path, capsys):
    assert run(tmp_path, "gronwall", small_config(p=3)) == 2
    assert "config error at p" in capsys.readouterr().err
    assert run(tmp_path, "solve", small_config(p=3), "out3") == 0


def test_determinism_byte_identical(tmp_path):
    cfg = small_config()
    for out in ("a", "b"):
        assert run(tmp_path, "converge-ic", cfg, out) == 0
        assert run(tmp_path, "solve", cfg, out + "s") == 0
    for name in ("converge-ic.csv", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    for name in ("trajectory.csv", "trajectory.json", "summary.json"):
        assert (tmp_path / "as" / name).read_bytes() == (tmp_path / "bs" / name).read_bytes()


def test_seed_flag_changes_random_history(tmp_path):
    cfg = small_config()
    cfg["history"] = {"kind": "random"}
    assert run(tmp_path, "solve", cfg, "s1", "--seed", "1") == 0
    assert run(tmp_path, "solve", cfg, "s2", "--seed", "2") == 0
    a = (tmp_path / "s1" / "trajectory.csv").read_bytes()
    b = (tmp_path / "s2" / "trajectory.csv").read_bytes()
    assert a != b
    assert run(tmp_path, "solve", cfg, "s3", "--seed", str(2 ** 64)) == 2


def test_sweep(tmp_path):
    cfg = json.loads((CONFIGS / "sweep.json").read_text())
    cfg["sweep"] = cfg["sweep"][:4]
    assert run(tmp_path, "sweep", cfg, "sw", "--threads", "3") == 0
    summary = json.loads((tmp_path / "sw" / "sweep.json").read_text())
    assert set(summary["items"]) == {it["name"] for it in cfg["sweep"]}
    assert (tmp_path / "sw" / "solve-picard" / "trajectory.csv").exists()


def test_sweep_rejects_duplicate_names(tmp_path, capsys):
    cfg = json.loads((CONFIGS / "sweep.json").read_text())
    cfg["sweep"] = [{"name": "x", "command": "solve"}, {"name": "x", "command": "verify"}]
    assert run(tmp_path, "sweep", cfg) == 2


def test_invariant_violation_exit_code(tmp_path, capsys, monkeypatch):
    def broken(pb, out, threads):
        raise InvariantViolation("sweeps did not contract", tag="contraction")

    monkeypatch.setitem(cli.HANDLERS, "solve", broken)
    assert run(tmp_path, "solve", small_config()) == 3
    assert "[contraction]" in capsys.readouterr().err
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["violated"] == "contraction"


def test_failed_check_exit_code(tmp_path, capsys):
    cfg = small_config()
    cfg["experiments"]["smoothing"] = {"times": [0.02, 0.04, 0.08], "tolerance": 1e-6}
    assert run(tmp_path, "smoothing", cfg) == 1
    assert "slope" in capsys.readouterr().err


def test_threads_env_default(monkeypatch):
    monkeypatch.setenv("PARABOLIC_DELAY_THREADS", "5")
    args = cli.build_parser().parse_args(["solve", "--config", "x.json"])
    assert args.threads == 5


def test_module_entry_point(tmp_path):
    path = write(tmp_path, small_config())
    proc = subprocess.run([sys.executable, "-m", "parabolic_delay", "verify", "--config", path,
                           "--out", str(tmp_path / "m")], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
