"""Real spherical harmonics basis for view-dependent splat color.

Coefficient rows are ordered DC first, then bands l=1..3 with m running
-l..l, matching common splat scene files. Each basis function is a
polynomial in the view direction components times a fixed normalization
constant; those constants double as the per-row scale of the unified
color space used by the style transform.
"""

import numpy as np

SH_C0 = 0.28209479177387814
SH_C1 = 0.4886025119029199
SH_C2 = (
    1.0925484305920792,
    -1.0925484305920792,
    0.31539156525252005,
    -1.0925484305920792,
    0.5462742152960396,
)
SH_C3 = (
    -0.5900435899266435,
    2.890611442640554,
    -0.4570457994644658,
    0.3731763325901154,
    -0.4570457994644658,
    1.445305721320277,
    -0.5900435899266435,
)

# Signed leading constant of each of the 16 basis rows.
ROW_CONSTANTS = np.array(
    [SH_C0, -SH_C1, SH_C1, -SH_C1, *SH_C2, *SH_C3], dtype=np.float64
)

NUM_COEFFS = 16
MAX_DEGREE = 3
DC_OFFSET = 0.5

# Row index ranges per degree: degree d uses rows [0, (d+1)^2).
ROWS_FOR_DEGREE = tuple((d + 1) ** 2 for d in range(MAX_DEGREE + 1))


def sh_basis(dirs: np.ndarray) -> np.ndarray:
    """Evaluate all 16 basis functions at unit directions.

    dirs: (..., 3) unit vectors. Returns (..., 16).
    """
    dirs = np.asarray(dirs, dtype=np.float64)
    x, y, z = dirs[..., 0], dirs[..., 1], dirs[..., 2]
    xx, yy, zz = x * x, y * y, z * z
    xy, yz, xz = x * y, y * z, x * z

    out = np.empty(dirs.shape[:-1] + (NUM_COEFFS,), dtype=np.float64)
    out[..., 0] = SH_C0
    out[..., 1] = -SH_C1 * y
    out[..., 2] = SH_C1 * z
    out[..., 3] = -SH_C1 * x
    out[..., 4] = SH_C2[0] * xy
    out[..., 5] = SH_C2[1] * yz
    out[..., 6] = SH_C2[2] * (2.0 * zz - xx - yy)
    out[..., 7] = SH_C2[3] * xz
    out[..., 8] = SH_C2[4] * (xx - yy)
    out[..., 9] = SH_C3[0] * y * (3.0 * xx - yy)
    out[..., 10] = SH_C3[1] * xy * z
    out[..., 11] = SH_C3[2] * y * (4.0 * zz - xx - yy)
    out[..., 12] = SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy)
    out[..., 13] = SH_C3[4] * x * (4.0 * zz - xx - yy)
    out[..., 14] = SH_C3[5] * z * (xx - yy)
    out[..., 15] = SH_C3[6] * x * (xx - 3.0 * yy)
    return out


def eval_sh(sh: np.ndarray, direction: np.ndarray, degree: int = MAX_DEGREE) -> np.ndarray:
    """Color at a view direction: 0.5 + sum of coefficient rows times basis.

    sh: (16, 3) coefficients. direction: unit 3-vector (|d| = 1 within 1e-6).
    Output is not clamped; clamping belongs to compositing/image write.
    """
    sh = np.asarray(sh, dtype=np.float64)
    direction = np.asarray(direction, dtype=np.float64)
    if sh.shape != (NUM_COEFFS, 3):
        raise ValueError(f"sh must have shape (16, 3), got {sh.shape}")
    if not 0 <= degree <= MAX_DEGREE:
        raise ValueError(f"degree must be in 0..3, got {degree}")
    norm = np.linalg.norm(direction)
    if abs(norm - 1.0) > 1e-6:
        raise ValueError(f"direction must be unit length, |d| = {norm}")
    rows = ROWS_FOR_DEGREE[degree]
    basis = sh_basis(direction)[:rows]
    return DC_OFFSET + basis @ sh[:rows]


def eval_sh_many(sh: np.ndarray, dirs: np.ndarray, degree: int = MAX_DEGREE) -> np.ndarray:
    """Vectorized eval_sh: sh (N, 16, 3), dirs (N, 3) unit -> colors (N, 3)."""
    rows = ROWS_FOR_DEGREE[degree]
    basis = sh_basis(dirs)[..., :rows]
    return DC_OFFSET + np.einsum("ni,nic->nc", basis, np.asarray(sh, dtype=np.float64)[:, :rows])
