"""Uniform smog over a rendered frame.

Scattering is neglected: along each view ray only exponential
extinction acts, so the scene color survives with weight
T = exp(-density * depth) and the remainder is smog color. Sky pixels
(no accumulated opacity) sit at infinite depth and take the full smog
color. Note the transmittance weights the *scene* term; attaching it
to the smog term instead would un-fog distant geometry.
"""

from dataclasses import dataclass

import numpy as np

from ..raster import FrameBuffer

SKY_ALPHA_EPS = 1e-6


@dataclass
class SmogParams:
    color: np.ndarray = (0.7, 0.7, 0.7)
    density: float = 0.0     # per world unit of depth

    def __post_init__(self):
        self.color = np.asarray(self.color, dtype=np.float64).reshape(3)
        self.density = float(self.density)
        if self.density < 0:
            raise ValueError(f"smog density must be >= 0, got {self.density}")
        if np.any((self.color < 0) | (self.color > 1)):
            raise ValueError(f"smog color must lie in [0, 1]^3, got {self.color}")


def apply_smog(fb: FrameBuffer, p: SmogParams) -> FrameBuffer:
    """Blend the frame toward the smog color by optical depth."""
    if fb.depth is None:
        raise ValueError("smog needs a depth buffer")
    if p.density == 0.0:
        return fb.copy()

    out = fb.copy()
    covered = fb.alpha_acc > SKY_ALPHA_EPS
    depth = np.where(covered, fb.depth / np.maximum(fb.alpha_acc, SKY_ALPHA_EPS), 0.0)
    transmittance = np.where(covered, np.exp(-p.density * depth), 0.0)

    out.color = transmittance[..., None] * fb.color \
        + (1.0 - transmittance[..., None]) * p.color[None, None, :]
    return out
