import json
import math

import pytest

from xxcentral import parse_config
from xxcentral.config import Scenario
from xxcentral.errors import SchemaError
from xxcentral.runner import FIGURES, bundled_config


def test_minimal_document_gets_defaults():
    cfg = parse_config(b'{"scenario": "purity_vs_g"}')
    assert cfg.scenario is Scenario.PURITY_VS_G
    assert cfg.n_spins == 12
    assert cfg.distribution.kind == "sqrt_decreasing" and cfg.distribution.total == 1.0
    assert cfg.field.norm == 1.0 and cfg.field.theta == pytest.approx(math.pi / 4)
    assert cfg.parents == ("--+",)
    assert (cfg.g_grid.min, cfg.g_grid.max, cfg.g_grid.points) == (0.0, 20.0, 101)
    assert cfg.g_grid.spacing == "linear" and cfg.g_grid.axis == "g_tilde"
    assert cfg.bath_sz is True
    assert cfg.tolerances.newton == 1e-12 and cfg.tolerances.gamma == 1e-6


def test_theta_out_of_range():
    with pytest.raises(ValueError, match="theta"):
        parse_config(json.dumps({"scenario": "purity_vs_g", "field": {"theta": 2 * math.pi}}))
    with pytest.raises(ValueError, match=r"thetas\[1\]"):
        parse_config(json.dumps({"scenario": "angle_sweep", "thetas": [0.1, -0.1]}))


def test_unknown_key_names_the_key():
    with pytest.raises(SchemaError) as info:
        parse_config(b'{"scenario": "purity_vs_g", "dampening": 0.1}')
    assert info.value.pointer == "/dampening"
    assert "dampening" in str(info.value)


def test_nested_unknown_key_pointer():
    with pytest.raises(SchemaError) as info:
        parse_config(b'{"scenario": "size_sweep", "sizes": [4], "g_grid": {"max": 3, "step": 1}}')
    assert info.value.pointer == "/g_grid/step"


def test_type_errors_have_pointers():
    with pytest.raises(SchemaError) as info:
        parse_config(b'{"scenario": "purity_vs_g", "sizes": [4, "x"]}')
    assert info.value.pointer == "/sizes/1"
    with pytest.raises(SchemaError):
        parse_config(b'{"scenario": "nope"}')
    with pytest.raises(SchemaError):
        parse_config(b"{not json")
    with pytest.raises(SchemaError):
        parse_config(b"\xff\xfe")
    with pytest.raises(SchemaError):
        parse_config(b"{}")


@pytest.mark.parametrize(
    "doc, fragment",
    [
        ({"g_grid": {"min": -1}}, "g_grid.min"),
        ({"g_grid": {"points": 1}}, "g_grid.points"),
        ({"g_grid": {"min": 2, "max": 1}}, "g_grid.max"),
        ({"g_grid": {"spacing": "log"}}, "log"),
        ({"field": {"components": [0, 0, 0]}}, "components"),
        ({"field": {"components": [1, 0, 0], "theta": 0.2}}, "either"),
        ({"parents": ["+x"]}, "parents[0]"),
        ({"distribution": {"kind": "custom"}}, "values"),
        ({"distribution": {"kind": "custom", "values": [1, 2]}}, "n_spins - 1"),
        ({"delta_factors": [1e-5, 1e-4]}, "delta_factors"),
    ],
)
def test_semantic_errors(doc, fragment):
    with pytest.raises(ValueError) as info:
        parse_config(json.dumps({"scenario": "purity_vs_g", **doc}))
    assert fragment in str(info.value)


def test_scenarios_require_their_series():
    for scenario, key in [("angle_sweep", "thetas"), ("size_sweep", "sizes"), ("distribution_sweep", "distributions")]:
        with pytest.raises(ValueError, match=key):
            parse_config(json.dumps({"scenario": scenario}))


def test_ed_check_constraints():
    cfg = parse_config(b'{"scenario": "ed_check"}')
    assert cfg.n_spins == 5
    with pytest.raises(ValueError):
        parse_config(b'{"scenario": "ed_check", "n_spins": 20}')
    with pytest.raises(ValueError):
        parse_config(b'{"scenario": "ed_check", "parents": ["-"]}')


def test_to_dict_is_json_serialisable():
    cfg = parse_config(b'{"scenario": "angle_sweep", "thetas": [0.3]}')
    again = json.loads(json.dumps(cfg.to_dict()))
    assert again["scenario"] == "angle_sweep" and again["thetas"] == [0.3]


@pytest.mark.parametrize("name", FIGURES)
def test_bundled_configs_parse(name):
    cfg = bundled_config(name)
    assert cfg.g_grid.points >= 2
