import numpy as np
import pytest

from starkscat import ExperimentConfig, make_rng
from starkscat.errors import ConfigError


def test_defaults_round_trip(tmp_path):
    cfg = ExperimentConfig.from_dict({"potential": {"family": "power-law", "kappa": 0.5,
                                                    "alpha": 0.8, "delta": 0.3},
                                      "d": 2, "epsilon": 0.25, "grids": {"x_list": [10, 20]}})
    path = tmp_path / "cfg.yaml"
    path.write_text(cfg.dump())
    again = ExperimentConfig.load(path)
    assert again.to_dict() == cfg.to_dict()
    assert again.hash() == cfg.hash()
    assert again.grids["x_list"] == [10.0, 20.0]


def test_hash_changes_with_content():
    assert ExperimentConfig().hash() != ExperimentConfig.from_dict({"seed": 1}).hash()


def test_all_violations_are_reported():
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_dict({"epsilon": 1.5, "d": 4, "colour": "red",
                                    "tolerances": {"airy": "small"},
                                    "potential": {"family": "yukawa"}})
    fields = set(info.value.fields)
    assert {"epsilon", "d", "colour", "tolerances.airy", "potential.family"} <= fields
    assert "epsilon: must lie in (0, 1)" in str(info.value)


@pytest.mark.parametrize("data,field", [
    ({"seed": -1}, "seed"),
    ({"m": 0}, "m"),
    ({"d": 2.5}, "d"),
    ({"profile": "huge"}, "profile"),
    ({"schema_version": 2}, "schema_version"),
    ({"grids": {"n_points": -3}}, "grids.n_points"),
    ({"potential": {"family": "coulomb", "spin": 1}}, "potential.spin"),
    ({"potential": {"family": "power-law", "alpha": 0.8, "delta": 0.9}}, "potential"),
])
def test_invalid_fields(data, field):
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_dict(data)
    assert field in info.value.fields


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig.load(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("d: [1,\n")
    with pytest.raises(ConfigError):
        ExperimentConfig.load(bad)
    root = tmp_path / "list.yaml"
    root.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        ExperimentConfig.load(root)


def test_rng_is_deterministic_and_counter_based():
    a = make_rng(42).normal(size=5)
    b = make_rng(42).normal(size=5)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, make_rng(43).normal(size=5))
    assert isinstance(make_rng(0).bit_generator, np.random.Philox)
