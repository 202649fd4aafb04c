"""Climate parameter document: one JSON object bundling all effect settings.

Every section and field is optional with the defaults of the effect
dataclasses; unknown keys are rejected with the offending name so a
typo never silently disables an effect.
"""

import json
from dataclasses import dataclass

from .smog import SmogParams
from .snow import SnowParams
from .water import GerstnerWave, WaterParams

_SMOG_KEYS = {"color", "density"}
_WAVE_KEYS = {"direction", "wavelength", "steepness", "phase_speed", "phase0"}
_WATER_KEYS = {"origin", "normal", "waves", "deep_color", "shallow_color", "ior", "absorption"}
_SNOW_KEYS = {"thickness", "grid_spacing", "up", "min_up_dot", "albedo", "wrap", "light_dir"}
_TOP_KEYS = {"smog", "water", "snow"}


class ClimateParamError(ValueError):
    """Invalid climate document; the message names the offending field."""


def _check_keys(section: str, given: dict, allowed: set):
    for key in given:
        if key not in allowed:
            raise ClimateParamError(f"unknown key {section}.{key}" if section else f"unknown key {key}")


@dataclass
class ClimateParams:
    smog: SmogParams = None
    water: WaterParams = None
    snow: SnowParams = None

    @classmethod
    def from_dict(cls, doc: dict) -> "ClimateParams":
        if not isinstance(doc, dict):
            raise ClimateParamError("climate document must be a key-value object")
        _check_keys("", doc, _TOP_KEYS)
        out = cls()
        if "smog" in doc:
            _check_keys("smog", doc["smog"], _SMOG_KEYS)
            try:
                out.smog = SmogParams(**doc["smog"])
            except ValueError as e:
                raise ClimateParamError(f"smog: {e}") from e
        if "water" in doc:
            _check_keys("water", doc["water"], _WATER_KEYS)
            fields = dict(doc["water"])
            waves = []
            for i, w in enumerate(fields.pop("waves", [])):
                _check_keys(f"water.waves[{i}]", w, _WAVE_KEYS)
                try:
                    waves.append(GerstnerWave(**w))
                except ValueError as e:
                    raise ClimateParamError(f"water.waves[{i}]: {e}") from e
            try:
                out.water = WaterParams(waves=waves, **fields)
            except ValueError as e:
                raise ClimateParamError(f"water: {e}") from e
        if "snow" in doc:
            _check_keys("snow", doc["snow"], _SNOW_KEYS)
            try:
                out.snow = SnowParams(**doc["snow"])
            except ValueError as e:
                raise ClimateParamError(f"snow: {e}") from e
        return out

    def to_dict(self) -> dict:
        doc = {}
        if self.smog is not None:
            doc["smog"] = {"color": self.smog.color.tolist(), "density": self.smog.density}
        if self.water is not None:
            doc["water"] = {
                "origin": self.water.origin.tolist(),
                "normal": self.water.normal.tolist(),
                "waves": [
                    {
                        "direction": w.direction.tolist(),
                        "wavelength": w.wavelength,
                        "steepness": w.steepness,
                        "phase_speed": w.phase_speed,
                        "phase0": w.phase0,
                    }
                    for w in self.water.waves
                ],
                "deep_color": self.water.deep_color.tolist(),
                "shallow_color": self.water.shallow_color.tolist(),
                "ior": self.water.ior,
                "absorption": self.water.absorption.tolist(),
            }
        if self.snow is not None:
            doc["snow"] = {
                "thickness": self.snow.thickness,
                "grid_spacing": self.snow.grid_spacing,
                "up": self.snow.up.tolist(),
                "min_up_dot": self.snow.min_up_dot,
                "albedo": self.snow.albedo.tolist(),
                "wrap": self.snow.wrap,
                "light_dir": self.snow.light_dir.tolist(),
            }
        return doc

    def merged(self, partial: dict) -> "ClimateParams":
        """New params with the partial document's fields layered on top."""
        base = self.to_dict()
        _check_keys("", partial, _TOP_KEYS)
        for section, value in partial.items():
            if value is None:
                base.pop(section, None)
            else:
                merged_section = dict(base.get(section, {}))
                merged_section.update(value)
                base[section] = merged_section
        return ClimateParams.from_dict(base)


def load_climate(path) -> ClimateParams:
    with open(path, "r", encoding="utf-8") as f:
        return ClimateParams.from_dict(json.load(f))


def save_climate(params: ClimateParams, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(params.to_dict(), f, indent=2)
