from .params import ClimateParams
from .smog import SmogParams, apply_smog
from .snow import SnowParams, apply_snow, gumbel_depth, place_snow, sample_normal, wrap_diffuse
from .water import (
    GerstnerWave,
    WaterParams,
    apply_flood,
    gerstner_displace,
    gerstner_normal,
    schlick_fresnel,
    ssr_trace,
)

__all__ = [
    "ClimateParams",
    "SmogParams",
    "apply_smog",
    "GerstnerWave",
    "WaterParams",
    "gerstner_displace",
    "gerstner_normal",
    "schlick_fresnel",
    "ssr_trace",
    "apply_flood",
    "SnowParams",
    "gumbel_depth",
    "place_snow",
    "sample_normal",
    "wrap_diffuse",
    "apply_snow",
]
