import json
import os

import pytest
from hypothesis import given, settings, strategies as st

from interp_bound.config import RunConfig, load_config, parse_config
from interp_bound.exceptions import ConfigError

CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "src", "interp_bound", "configs")


def test_defaults_and_empty():
    cfg = parse_config({})
    assert cfg == RunConfig()
    assert cfg.data.n == 50 and cfg.bound.delta == 0.05 and cfg.output.formats == ["csv", "json"]


def test_round_trip_defaults():
    cfg = RunConfig()
    assert parse_config(json.loads(cfg.to_json())) == cfg


@settings(max_examples=50, deadline=None)
@given(n=st.integers(1, 1000), noise=st.floats(0, 5), delta=st.floats(1e-6, 0.999),
       values=st.lists(st.integers(2, 500), max_size=5), fam=st.sampled_from(["quadratic", "smooth-power"]),
       weight=st.one_of(st.just("identity"), st.builds(lambda c: {"scale": c}, st.floats(0.1, 10))))
def test_round_trip_property(n, noise, delta, values, fam, weight):
    cfg = parse_config({"data": {"n": n, "noise": noise}, "bound": {"delta": delta},
                        "sweep": {"values": values}, "regularizer": {"family": fam, "weight": weight}})
    again = parse_config(json.loads(cfg.to_json()))
    assert again == cfg and again.to_json() == cfg.to_json()


@pytest.mark.parametrize("data,needle", [
    ({"regularizer": {"wieght": "identity"}}, "regularizer.wieght"),
    ({"modle": {}}, "'modle'"),
    ({"data": {"n": "50"}}, "data.n"),
    ({"data": {"n": 2.5}}, "data.n"),
    ({"model": {"bias": 1}}, "model.bias"),
    ({"model": {"family": "cnn"}}, "model.family"),
    ({"sweep": {"values": [1, "x"]}}, "sweep.values[1]"),
    ({"bound": {"delta": 1.5}}, "bound.delta"),
    ({"output": {"formats": ["xml"]}}, "output.formats"),
    ({"data": {"inputs": [[1.0]]}}, "data.outputs"),
    ({"regularizer": {"weight": {"diag": [1.0], "scale": 2.0}}}, "regularizer.weight"),
])
def test_strict_errors_name_the_field(data, needle):
    with pytest.raises(ConfigError) as exc:
        parse_config(data)
    assert needle in str(exc.value)


def test_json_syntax_error_reports_line(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "data": {\n    "n": 5,\n  }\n}\n')
    with pytest.raises(ConfigError, match="line 4"):
        load_config(path)


def test_missing_file():
    with pytest.raises(ConfigError, match="cannot read"):
        load_config("/nonexistent/config.json")


def test_ints_accepted_for_floats():
    cfg = parse_config({"data": {"noise": 1}})
    assert isinstance(cfg.data.noise, float)


@pytest.mark.parametrize("name", sorted(os.listdir(CONFIG_DIR)))
def test_bundled_configs_parse_and_round_trip(name):
    cfg = load_config(os.path.join(CONFIG_DIR, name))
    assert parse_config(json.loads(cfg.to_json())) == cfg
