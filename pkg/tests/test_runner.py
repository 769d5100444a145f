import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from xxcentral import parse_config, run_scenario
from xxcentral.runner import build_series, read_csv, reproduce_paper_figures, rg_couplings

SMALL = {
    "scenario": "purity_vs_g",
    "n_spins": 6,
    "parents": ["--+", "-+"],
    "g_grid": {"min": 0.0, "max": 8.0, "points": 9},
}


def cfg(**over):
    return parse_config(json.dumps({**SMALL, **over}))


def test_outputs_and_manifest(tmp_path):
    m = run_scenario(cfg(), tmp_path)
    assert m["exit_status"] == 0
    assert {"data.csv", "manifest.json", "purity.svg", "effective_field.svg"} <= {p.name for p in tmp_path.iterdir()}
    on_disk = json.loads((tmp_path / "manifest.json").read_text())
    assert on_disk["stats"]["rows"] == 18 and on_disk["stats"]["failed"] == 0
    keys = [(r["series"], r["parent"], r["point"]) for r in on_disk["rows"]]
    assert len(keys) == len(set(keys)) == 18
    assert all(r["status"] == "ok" for r in on_disk["rows"])
    assert on_disk["config"]["n_spins"] == 6


def test_csv_format_and_round_trip(tmp_path):
    run_scenario(cfg(), tmp_path)
    raw = (tmp_path / "data.csv").read_bytes()
    assert b"\r" not in raw
    header = raw.split(b"\n", 1)[0].decode()
    assert header.startswith("series,parent,point,g,g_tilde,status")
    rows = read_csv(tmp_path / "data.csv")
    order = [(r["parent"], r["g"]) for r in rows]
    parents = ["--+--+", "-+-+-+"]
    assert order == sorted(order, key=lambda t: (parents.index(t[0]), t[1]))
    from xxcentral.runner import rows_to_csv

    assert rows_to_csv(rows, 6).encode() == raw


def test_rerun_is_byte_identical_and_thread_independent(tmp_path):
    run_scenario(cfg(), tmp_path / "a")
    run_scenario(cfg(), tmp_path / "b")
    run_scenario(cfg(), tmp_path / "c", threads=2)
    a = (tmp_path / "a" / "data.csv").read_bytes()
    assert a == (tmp_path / "b" / "data.csv").read_bytes()
    assert a == (tmp_path / "c" / "data.csv").read_bytes()


def test_svgs_are_well_formed(tmp_path):
    run_scenario(cfg(scenario="state_profile", parents=["--+"]), tmp_path)
    for name in ("purity.svg", "spin_x.svg", "spin_z.svg"):
        root = ET.parse(tmp_path / name).getroot()
        assert root.tag.endswith("svg")
        assert root.findall(".//{http://www.w3.org/2000/svg}polyline")


def test_failed_rows_are_recorded(tmp_path):
    # theta = 0 leaves the bath without a local field: the parent labelling is ill-defined
    m = run_scenario(cfg(field={"norm": 1.0, "theta": 0.0}), tmp_path)
    assert m["exit_status"] == 1
    assert m["stats"]["failed"] == m["stats"]["rows"]
    assert all(r["status"].startswith("failed:DegenerateSeed") for r in m["rows"])
    rows = read_csv(tmp_path / "data.csv")
    assert all("gamma0" not in r for r in rows)


def test_series_construction():
    c = parse_config(json.dumps({
        "scenario": "distribution_sweep",
        "distributions": [{"kind": "inverse_square", "n_spins": 5}, {"kind": "custom", "values": [0.5, 0.2]}],
    }))
    s = build_series(c)
    assert [x.n_spins for x in s] == [5, 3]
    g, gt = rg_couplings(s[0], c)
    assert gt[0] == 0 and gt[-1] == 20.0
    p = s[0].model().with_g(g[-1])
    assert p.couplings.sum() / np.linalg.norm(p.field) == pytest.approx(20.0)


def test_g_axis_option():
    c = parse_config(json.dumps({**SMALL, "g_grid": {"min": 0.0, "max": 2.0, "points": 3, "axis": "g"}}))
    g, gt = rg_couplings(build_series(c)[0], c)
    np.testing.assert_allclose(g, [0, 1, 2])


def test_ed_check_scenario(tmp_path):
    c = parse_config(json.dumps({"scenario": "ed_check", "n_spins": 4, "g_grid": {"min": 0, "max": 6, "points": 4}}))
    m = run_scenario(c, tmp_path)
    assert m["exit_status"] == 0
    assert m["ed"]["mismatches"] == 0 and m["ed"]["compared"] == 64
    assert m["ed"]["max_tuple_distance"] < 1e-7


def test_reproduce_subset(tmp_path):
    summary = reproduce_paper_figures(tmp_path, names=["fig1"])
    assert summary["exit_status"] == 0
    fig = summary["figures"]["fig1"]
    assert fig["stats"]["rows"] == 100
    assert (tmp_path / summary["root"].split("/")[-1] / "fig1" / "spin_z.svg").exists()
