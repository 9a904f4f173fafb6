import json

import pytest

from oreo.catalog import validate_catalog
from oreo.scenarios import (ScenarioParams, canned_testbed_scenario, catalog_from_dict, catalog_to_dict,
                            generate_scenario, load_catalog, save_catalog)


@pytest.mark.parametrize("scale, dims", [("S", (8, 8, 2)), ("M", (8, 8, 3)), ("L", (10, 8, 3)), ("XL", (12, 10, 3))])
def test_scale_dimensions(scale, dims):
    cat = generate_scenario(ScenarioParams(scale=scale, seed=1))
    n_levels = {len(f.xapps) for f in cat.functions.values()}
    assert (len(cat.services), len(cat.functions), n_levels) == (dims[0], dims[1], {dims[2]})


@pytest.mark.parametrize("seed", range(20))
def test_generated_shape(seed):
    cat = generate_scenario(ScenarioParams(scale="XL", seed=seed))
    assert validate_catalog(cat) == []
    for svc in cat.services.values():
        assert 1 <= len(svc.configs) <= 3
        assert all(len(c.nodes) <= 4 for c in svc.configs)
        assert svc.target_latency in (0.1, 0.2, 0.5)
    for f in cat.functions.values():
        thetas = [x.theta for x in sorted(f.xapps, key=lambda x: x.chi)]
        qs = [x.q_base for x in sorted(f.xapps, key=lambda x: x.chi)]
        assert thetas == sorted(thetas, reverse=True) and qs == sorted(qs)


def test_same_seed_same_bytes(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    save_catalog(generate_scenario(ScenarioParams(scale="M", seed=9)), a)
    save_catalog(generate_scenario(ScenarioParams(scale="M", seed=9)), b)
    assert a.read_bytes() == b.read_bytes()


def test_json_round_trip(tmp_path):
    cat = generate_scenario(ScenarioParams(scale="S", seed=2))
    save_catalog(cat, tmp_path / "c.json")
    back = load_catalog(tmp_path / "c.json")
    assert catalog_to_dict(back) == catalog_to_dict(cat)
    doc = json.loads((tmp_path / "c.json").read_text())
    assert set(doc) == {"functions", "services", "budget", "meta"}
    assert set(doc["meta"]) >= {"seed", "scale", "generator_version"}
    assert set(doc["functions"][0]["xapps"][0]) == {"chi", "theta", "q_base", "mem", "disk"}
    assert set(doc["services"][0]) == {"id", "priority", "target_latency", "target_quality", "input_rate", "configs"}


def test_from_dict_tolerates_missing_edges():
    d = catalog_to_dict(canned_testbed_scenario())
    for s in d["services"]:
        for c in s["configs"]:
            if not c["edges"]:
                del c["edges"]
    assert validate_catalog(catalog_from_dict(d)) == []


def test_testbed():
    cat = canned_testbed_scenario()
    assert validate_catalog(cat) == []
    assert len(cat.services["slicing"].configs) == 4
    assert {f for s in cat.services.values() for c in s.configs for f in c.nodes} <= {"f1", "f2", "f3"}
    for q in (0.9, 0.925, 0.95):
        assert canned_testbed_scenario(forecast_q=q).services["forecasting"].target_quality == q
    with pytest.raises(ValueError):
        canned_testbed_scenario(forecast_q=0.8)
