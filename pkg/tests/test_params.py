import json

import numpy as np
import pytest

from splatfx.effects.params import ClimateParamError, ClimateParams, load_climate, save_climate


def full_doc():
    return {
        "smog": {"color": [0.5, 0.5, 0.5], "density": 0.1},
        "water": {
            "origin": [0, -1, 0],
            "normal": [0, 1, 0],
            "waves": [{"direction": [1, 0], "wavelength": 2.0, "steepness": 0.3}],
            "ior": 1.33,
        },
        "snow": {"thickness": 0.2, "grid_spacing": 0.5},
    }


def test_round_trip(tmp_path):
    params = ClimateParams.from_dict(full_doc())
    save_climate(params, tmp_path / "c.json")
    back = load_climate(tmp_path / "c.json")
    assert back.smog.density == 0.1
    assert back.water.waves[0].wavelength == 2.0
    assert back.snow.thickness == 0.2


def test_all_sections_optional():
    params = ClimateParams.from_dict({})
    assert params.smog is None and params.water is None and params.snow is None
    only_smog = ClimateParams.from_dict({"smog": {"density": 0.05}})
    np.testing.assert_allclose(only_smog.smog.color, [0.7, 0.7, 0.7])  # default


def test_unknown_keys_rejected():
    with pytest.raises(ClimateParamError, match="unknown key fog"):
        ClimateParams.from_dict({"fog": {}})
    with pytest.raises(ClimateParamError, match="smog.densty"):
        ClimateParams.from_dict({"smog": {"densty": 0.1}})
    with pytest.raises(ClimateParamError, match=r"water.waves\[0\].steep"):
        ClimateParams.from_dict(
            {"water": {"waves": [{"direction": [1, 0], "wavelength": 1, "steep": 0.1}]}})


def test_range_errors_name_the_field():
    with pytest.raises(ClimateParamError, match="smog"):
        ClimateParams.from_dict({"smog": {"density": -1}})
    with pytest.raises(ClimateParamError, match="snow"):
        ClimateParams.from_dict({"snow": {"thickness": -0.1}})


def test_merged_updates_single_field():
    params = ClimateParams.from_dict(full_doc())
    merged = params.merged({"smog": {"density": 0.3}})
    assert merged.smog.density == 0.3
    np.testing.assert_allclose(merged.smog.color, [0.5, 0.5, 0.5])  # kept
    assert merged.snow.thickness == 0.2                              # untouched
    assert params.smog.density == 0.1                                # original intact


def test_merged_can_drop_section():
    params = ClimateParams.from_dict(full_doc())
    merged = params.merged({"snow": None})
    assert merged.snow is None
    assert merged.smog is not None


def test_merged_rejects_bad_values():
    params = ClimateParams.from_dict(full_doc())
    with pytest.raises(ClimateParamError):
        params.merged({"smog": {"density": -5}})
