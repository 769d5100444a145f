import json
import subprocess
import sys

from xxcentral.cli import main


def write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


SMALL = {"scenario": "purity_vs_g", "n_spins": 5, "g_grid": {"min": 0, "max": 4, "points": 3}}


def test_sweep_success(tmp_path, capsys):
    code = main(["sweep", "--config", write(tmp_path, SMALL), "--out", str(tmp_path / "o")])
    assert code == 0
    assert (tmp_path / "o" / "data.csv").exists()
    assert "3/3 rows ok" in capsys.readouterr().out


def test_config_errors_exit_2(tmp_path, capsys):
    assert main(["sweep", "--config", write(tmp_path, {**SMALL, "dampening": 1})]) == 2
    assert "dampening" in capsys.readouterr().err
    assert main(["sweep", "--config", str(tmp_path / "missing.json")]) == 2
    assert main(["sweep", "--config", write(tmp_path, SMALL), "--threads", "0"]) == 2
    assert main(["ed-check", "--config", write(tmp_path, SMALL)]) == 2


def test_partial_failure_exit_1(tmp_path):
    doc = {**SMALL, "field": {"norm": 1.0, "theta": 0.0}}
    assert main(["sweep", "--config", write(tmp_path, doc), "--out", str(tmp_path / "o")]) == 1


def test_solve_prints_json(tmp_path, capsys):
    code = main(["solve", "--config", write(tmp_path, SMALL), "--g-tilde", "2.5", "--parent=-+", "--parent=+"])
    assert code == 0
    out = json.loads(capsys.readouterr().out)
    assert [r["parent"] for r in out] == ["-+-+-", "+++++"]
    assert all(r["g_tilde"] == 2.5 and len(r["charges"]) == 5 for r in out)
    assert out[0]["energy"] == out[0]["charges"][0]


def test_ed_check_default(tmp_path, capsys):
    assert main(["ed-check", "--out", str(tmp_path / "ed")]) == 0
    assert "0 mismatches" in capsys.readouterr().out


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "xxcentral", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for cmd in ("solve", "sweep", "reproduce-figures", "ed-check"):
        assert cmd in res.stdout
