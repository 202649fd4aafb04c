"""Binary point-cloud scene files.

Layout matches the de-facto splat interchange format: little-endian
float32 properties named x y z, nx ny nz, f_dc_0..2, f_rest_0..K,
opacity (logit), scale_0..2 (log), rot_0..3 (wxyz). f_rest is
channel-major: all R rest-coefficients, then G, then B. Opacity and
scale are activated on load (sigmoid / exp) and de-activated on save.
"""

import io
from pathlib import Path

import numpy as np

from . import sh as shlib
from .scene import GaussianScene, SceneError, clamp_degenerate_scales, quat_normalize

_HEADER_MAGIC = b"ply"
_FORMAT_LINE = "format binary_little_endian 1.0"

_FIXED_FIELDS = ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"]
_TAIL_FIELDS = ["opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"]

# Clip for logit to keep save finite when opacity touches 0 or 1.
_OPACITY_EPS = 1e-10


def _rest_count(degree: int) -> int:
    return (shlib.ROWS_FOR_DEGREE[degree] - 1) * 3


def _expected_fields(degree: int) -> list:
    rest = [f"f_rest_{i}" for i in range(_rest_count(degree))]
    return _FIXED_FIELDS + rest + _TAIL_FIELDS


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _logit(p):
    p = np.clip(p, _OPACITY_EPS, 1.0 - _OPACITY_EPS)
    return np.log(p / (1.0 - p))


def _parse_header(stream) -> tuple:
    """Returns (vertex_count, property_names, payload_offset is implicit)."""
    line = stream.readline().strip()
    if line != _HEADER_MAGIC:
        raise SceneError("not a scene file: missing 'ply' magic")
    fmt = stream.readline().decode("ascii", "replace").strip()
    if fmt != _FORMAT_LINE:
        raise SceneError(f"unsupported format line: {fmt!r}")

    count = None
    props = []
    while True:
        raw = stream.readline()
        if not raw:
            raise SceneError("truncated header: no end_header")
        line = raw.decode("ascii", "replace").strip()
        if line == "end_header":
            break
        if line.startswith("comment"):
            continue
        parts = line.split()
        if parts[0] == "element":
            if parts[1] != "vertex":
                raise SceneError(f"unknown element: {parts[1]!r}")
            count = int(parts[2])
        elif parts[0] == "property":
            if count is None:
                raise SceneError("property declared before vertex element")
            if parts[1] != "float":
                raise SceneError(f"unsupported property type for {parts[2]!r}: {parts[1]!r}")
            props.append(parts[2])
        else:
            raise SceneError(f"unknown header line: {line!r}")
    if count is None:
        raise SceneError("header missing vertex element")
    return count, props


def _degree_from_props(props: list) -> int:
    rest = sum(1 for p in props if p.startswith("f_rest_"))
    for degree in range(shlib.MAX_DEGREE + 1):
        if rest == _rest_count(degree):
            return degree
    raise SceneError(f"unsupported f_rest count {rest}; expected one of "
                     f"{[_rest_count(d) for d in range(shlib.MAX_DEGREE + 1)]}")


def load_scene(path) -> GaussianScene:
    """Read a scene file, activating opacity/scale and padding SH to 16 rows."""
    path = Path(path)
    with open(path, "rb") as f:
        count, props = _parse_header(f)
        degree = _degree_from_props(props)
        expected = _expected_fields(degree)
        if props != expected:
            unexpected = [p for p in props if p not in expected]
            missing = [p for p in expected if p not in props]
            if unexpected:
                raise SceneError(f"unknown property {unexpected[0]!r}")
            if missing:
                raise SceneError(f"missing property {missing[0]!r}")
            raise SceneError("property order does not match the standard layout")

        payload = f.read()
    want = count * len(props) * 4
    if len(payload) < want:
        raise SceneError(f"truncated payload: expected {want} bytes, got {len(payload)}")
    data = np.frombuffer(payload[:want], dtype="<f4").reshape(count, len(props)).astype(np.float64)

    col = {name: i for i, name in enumerate(props)}
    centers = data[:, [col["x"], col["y"], col["z"]]]
    opacities = _sigmoid(data[:, col["opacity"]])
    scales = clamp_degenerate_scales(np.exp(data[:, [col["scale_0"], col["scale_1"], col["scale_2"]]]))
    rotations = quat_normalize(data[:, [col["rot_0"], col["rot_1"], col["rot_2"], col["rot_3"]]])

    sh = np.zeros((count, shlib.NUM_COEFFS, 3))
    sh[:, 0, :] = data[:, [col["f_dc_0"], col["f_dc_1"], col["f_dc_2"]]]
    rest_rows = shlib.ROWS_FOR_DEGREE[degree] - 1
    if rest_rows:
        rest = data[:, col["f_rest_0"]:col["f_rest_0"] + rest_rows * 3]
        # channel-major on disk: (channel, row) -> (row, channel)
        sh[:, 1:1 + rest_rows, :] = rest.reshape(count, 3, rest_rows).transpose(0, 2, 1)

    scene = GaussianScene(
        centers=centers, rotations=rotations, scales=scales,
        opacities=opacities, sh=sh, sh_degree=degree,
    )
    scene.validate()
    return scene


def save_scene(scene: GaussianScene, path) -> None:
    """Write a scene file re-loadable with field-wise equality within 1e-6."""
    degree = scene.sh_degree
    rest_rows = shlib.ROWS_FOR_DEGREE[degree] - 1
    n = len(scene)

    cols = [
        scene.centers,
        np.zeros((n, 3)),               # normals, ignored on load
        scene.sh[:, 0, :],
    ]
    if rest_rows:
        cols.append(scene.sh[:, 1:1 + rest_rows, :].transpose(0, 2, 1).reshape(n, rest_rows * 3))
    cols.append(_logit(scene.opacities)[:, np.newaxis])
    cols.append(np.log(scene.scales))
    cols.append(scene.rotations)
    data = np.concatenate(cols, axis=1).astype("<f4")

    header = io.StringIO()
    header.write("ply\n")
    header.write(_FORMAT_LINE + "\n")
    header.write(f"element vertex {n}\n")
    for name in _expected_fields(degree):
        header.write(f"property float {name}\n")
    header.write("end_header\n")

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(header.getvalue().encode("ascii"))
        f.write(data.tobytes())
