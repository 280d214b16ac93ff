import csv
import json
import subprocess
import sys

import pytest

from tempomix.cli import read_provenance, run

from cli_cases import ROOF, cases


def _run(argv, capsys):
    code = run(argv + ["--threads", "2"])
    out = capsys.readouterr()
    return code, out.out, out.err


def _rows(text):
    return list(csv.reader(ln for ln in text.splitlines() if not ln.startswith("#")))


def test_every_command_runs(tmp_path, capsys):
    for name, argv in cases(tmp_path):
        code, out, err = _run(argv, capsys)
        assert code == 0, (name, err)
        text = out or open(argv[argv.index("--out") + 1]).read()
        assert text.startswith("# tempomix: ") or '"provenance"' in text, name
        assert "config_sha256" in text


def test_header_contents(tmp_path, capsys):
    out_file = tmp_path / "orbits.csv"
    code, _, _ = _run(["count-orbits", "--roof", ROOF, "--T", "6", "--seed", "7", "--out", str(out_file)], capsys)
    assert code == 0
    prov = read_provenance(out_file)
    assert prov["seed"] == "7" and prov["command"] == "count-orbits"
    assert len(prov["config_sha256"]) == 64
    ok, out, _ = _run(["count-orbits", "--roof", ROOF, "--T", "6", "--seed", "7", "--out", str(out_file),
                       "--check"], capsys)
    assert ok == 0 and json.loads(out)["status"] == "ok"
    bad, _, err = _run(["count-orbits", "--roof", ROOF, "--T", "7", "--seed", "7", "--out", str(out_file),
                        "--check"], capsys)
    assert bad == 2 and json.loads(err)["error"] == "ValidationError"


def test_pot_lattice_roof(tmp_path, capsys):
    flat = tmp_path / "flat.json"
    flat.write_text(json.dumps({"depth": 1, "values": {"0": 1.0, "1": 1.0}}))
    code, _, err = _run(["pot", "--roof", str(flat), "--T-grid", "4,6,8,10"], capsys)
    assert code == 3
    assert json.loads(err)["error"] == "LatticeRoof"


def test_validation_errors(tmp_path, capsys):
    code, _, err = _run(["temporal-range", "--roof", str(tmp_path / "missing.json")], capsys)
    assert code == 2 and json.loads(err)["exit_code"] == 2
    code, _, _ = _run(["make-roof", "--alpha", "1", "--beta", "1"], capsys)
    assert code == 2


def test_make_roof_then_range(tmp_path, capsys):
    roof = tmp_path / "roof.json"
    assert _run(["make-roof", "--alpha", "1", "--beta", "1.6180339887", "--out", str(roof)], capsys)[0] == 0
    code, out, _ = _run(["temporal-range", "--roof", str(roof)], capsys)
    assert code == 0
    values = [float(r[0]) for r in _rows(out)[1:]]
    assert len(values) == 5
    assert values == pytest.approx([-1.6180339887, -1.0, 0.0, 1.0, 1.6180339887], abs=1e-9)


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"roof": ROOF, "params": {"T": 6.0}, "seed": 3, "output_dir": "out"}))
    code, _, _ = _run(["count-orbits", "--config", str(cfg)], capsys)
    assert code == 0
    text = (tmp_path / "out" / "count-orbits.csv").read_text()
    assert "# seed: 3" in text
    direct, out, _ = _run(["count-orbits", "--roof", ROOF, "--T", "6", "--seed", "3"], capsys)
    assert _rows(out) == _rows(text)


def test_threads_env(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("TEMPOMIX_THREADS", "1")
    assert run(["count-orbits", "--roof", ROOF, "--T", "6"]) == 0
    one = capsys.readouterr().out
    monkeypatch.setenv("TEMPOMIX_THREADS", "3")
    assert run(["count-orbits", "--roof", ROOF, "--T", "6"]) == 0
    assert capsys.readouterr().out == one


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "tempomix", "count-orbits", "--roof", ROOF, "--T", "3"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert _rows(proc.stdout)[0] == ["n", "word", "period"]
