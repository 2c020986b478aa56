import json
import runpy
import subprocess
import sys
from pathlib import Path

import pytest

from growdp.cli import main
from growdp.harness import validate_config


@pytest.fixture
def smoke(tmp_path):
    cfg = {"seed": 1, "trials": 1, "noiseless": True, "alpha": 0.4, "eps": 1.0,
           "stream": {"kind": "iid", "N": 4, "n": 20, "horizon": 30},
           "workload": {"kind": "adaptive-distinguisher", "per_step": 2}}
    path = tmp_path / "pmwg.json"
    path.write_text(json.dumps(cfg))
    return path


def test_run_pmwg_writes_outputs(smoke, tmp_path, capsys):
    assert main(["run-pmwg", "--config", str(smoke), "--out", str(tmp_path / "out"), "--seed", "4"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["seed"] == 4 and summary["invariant_violations"] == 0
    assert (tmp_path / "out" / "results.csv").exists()
    assert (tmp_path / "out" / "summary.json").exists()


def test_config_errors_exit_2(smoke, tmp_path, capsys):
    assert main(["run-pmwg"]) == 2
    assert main(["run-pmwg", "--config", str(tmp_path / "missing.json")]) == 2
    assert main(["run-sparse", "--config", str(smoke)]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["run-pmwg", "--config", str(bad)]) == 2
    assert "config error" in capsys.readouterr().err


def test_run_sparse_values(tmp_path, capsys):
    cfg = tmp_path / "s.json"
    cfg.write_text(json.dumps({"threshold": 0.2, "noiseless": True, "stream": {"kind": "iid", "N": 2, "n": 100}}))
    vals = tmp_path / "v.json"
    vals.write_text(json.dumps([{"t": 100, "value": v} for v in (0.1, 0.3, 0.1, 0.25)]))
    assert main(["run-sparse", "--config", str(cfg), "--values", str(vals)]) == 0
    assert json.loads(capsys.readouterr().out)["hard_total"] == 2


def test_compose(tmp_path, capsys):
    ev = tmp_path / "ev.json"
    ev.write_text("[0.1, 0.1]")
    assert main(["compose", str(ev), "--delta", "0.36787944117144233"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["basic_eps"] == pytest.approx(0.2)
    assert out["cdp_eps"] == pytest.approx(0.21)
    ev.write_text('["a"]')
    assert main(["compose", str(ev)]) == 2


def test_dp_audit_exit_codes(capsys):
    assert main(["dp-audit", "--mechanism", "laplace", "--samples", "200000", "--seed", "8"]) == 0
    assert main(["dp-audit", "--mechanism", "laplace-halved", "--samples", "200000", "--seed", "8"]) == 3
    lines = capsys.readouterr().out.splitlines()
    assert json.loads(lines[1])["flagged"] is True


def test_validate_quick(capsys):
    assert main(["validate"]) == 0
    assert all(line.startswith("PASS") for line in capsys.readouterr().out.splitlines())


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "growdp", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "run-pmwg" in out.stdout


CONFIGS = sorted((Path(__file__).resolve().parents[1] / "configs").glob("*.json"))


@pytest.mark.parametrize("path", CONFIGS, ids=[p.stem for p in CONFIGS])
def test_shipped_configs_validate(path):
    cfg = json.loads(path.read_text())
    validate_config(cfg)
    assert main([f"run-{cfg['algorithm']}", "--config", str(path), "--trials", "1"]) == 0


def test_benchmark_script_runs(capsys):
    bench = runpy.run_path(str(Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernels.py"))
    bench["main"](["--sizes", "8", "--runs", "10", "--repeat", "1"])
    assert "atg_halt_batch" in capsys.readouterr().out
