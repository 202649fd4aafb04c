"""Batch front-end: stills, orbits, restyling, snow precompute, benchmarks.

A config file (key=value lines, '#' comments) can mirror every flag;
explicit flags win. Render jobs validate all inputs and render every
frame before any output file is written, so a failing job never leaves
a partial or overwritten output directory.
"""

import argparse
import json
import os
import statistics
import sys
import time
from pathlib import Path

import numpy as np

from .camera import Camera, look_at, orbit_poses
from .effects.params import ClimateParamError, ClimateParams, load_climate
from .imgio import encode_png, read_png
from .ply import load_scene, save_scene
from .raster import RenderOptions, rasterize
from .scene import SceneError
from .service import SessionState, render_frame
from .style import (
    apply_transform,
    estimate_transform,
    load_transform,
    save_transform,
    style_distance_metric,
)


class JobError(Exception):
    """User-input problem; message goes to stderr, exit code 1."""


def _parse_resolution(text: str):
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError as e:
        raise JobError(f"bad resolution {text!r}, expected WxH") from e


def _parse_background(text: str):
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 3:
        raise JobError(f"bad background {text!r}, expected r,g,b")
    return tuple(parts)


def _auto_camera(scene, width, height):
    bounds = scene.bounds
    center = bounds.mean(axis=0)
    radius = max(float(np.linalg.norm(bounds[1] - bounds[0])), 1.0)
    return look_at(center + np.array([0.0, 0.35, -1.0]) * 1.5 * radius, center,
                   width=width, height=height, far=max(100.0, 6.0 * radius))


def _parse_cameras(spec, scene, width, height):
    """Camera spec: None (auto), 'orbit:k=v,...', or a JSON pose file."""
    if spec is None:
        return [_auto_camera(scene, width, height)]
    if spec.startswith("orbit:"):
        opts = {}
        for item in spec[len("orbit:"):].split(","):
            if not item:
                continue
            if "=" not in item:
                raise JobError(f"bad orbit option {item!r}")
            k, v = item.split("=", 1)
            opts[k] = v
        count = int(opts.get("n", 8))
        bounds = scene.bounds
        center = bounds.mean(axis=0)
        if "center" in opts:
            center = np.array([float(c) for c in opts["center"].split(":")])
        diag = max(float(np.linalg.norm(bounds[1] - bounds[0])), 1.0)
        radius = float(opts.get("radius", 1.5 * diag))
        elevation = float(opts.get("elevation", 20.0))
        fov = float(opts.get("fov", 60.0))
        return orbit_poses(center, radius, elevation, count, width=width, height=height,
                           fov_deg=fov, far=max(100.0, 6.0 * radius))
    path = Path(spec)
    if not path.exists():
        raise JobError(f"camera spec {spec!r} is neither orbit:... nor an existing file")
    with open(path, "r", encoding="utf-8") as f:
        doc = json.load(f)
    poses = doc if isinstance(doc, list) else [doc]
    cams = []
    for p in poses:
        cam = Camera.from_dict(p)
        if (cam.width, cam.height) != (width, height) and width and height:
            cam = cam.resized(width, height)
        cams.append(cam)
    return cams


def _parse_sweep(text: str):
    if "=" not in text:
        raise JobError(f"bad sweep {text!r}, expected name=v1,v2,...")
    name, values = text.split("=", 1)
    vals = [v for v in values.split(",") if v]
    if not vals:
        raise JobError("sweep needs at least one value")
    if "." not in name:
        raise JobError(f"sweep parameter must be section.field, got {name!r}")
    return name, [float(v) for v in vals]


def _sweep_applied(climate: ClimateParams, name: str, value: float) -> ClimateParams:
    section, field_name = name.split(".", 1)
    doc = climate.to_dict()
    doc.setdefault(section, {})[field_name] = value
    try:
        return ClimateParams.from_dict(doc)
    except ClimateParamError as e:
        raise JobError(f"sweep {name}={value}: {e}") from e


def _default_passes(state: SessionState):
    passes = []
    if state.active_transform is not None:
        passes.append("style")
    if state.climate.snow is not None:
        passes.append("snow")
    if state.climate.water is not None:
        passes.append("flood")
    if state.climate.smog is not None:
        passes.append("smog")
    return passes


def _atomic_write(path: Path, data: bytes):
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(data)
    os.replace(tmp, path)


def _build_state(args) -> SessionState:
    try:
        scene = load_scene(args.scene)
    except (OSError, SceneError) as e:
        raise JobError(f"scene: {e}") from e
    state = SessionState(base_scene=scene)
    state.scene_generation = 1
    if getattr(args, "climate", None):
        try:
            state.climate = load_climate(args.climate)
        except (OSError, ClimateParamError, json.JSONDecodeError) as e:
            raise JobError(f"climate: {e}") from e
    transform = None
    if getattr(args, "transform", None):
        try:
            transform = load_transform(args.transform)
        except (OSError, ValueError) as e:
            raise JobError(f"transform: {e}") from e
    if getattr(args, "style", None):
        if transform is not None:
            raise JobError("give either --style or --transform, not both")
        transform = _estimate_from_style_image(args, state)
    state.active_transform = transform
    return state


MAX_ESTIMATE_PIXELS = 200_000


def _subsample(pixels, rng):
    if len(pixels) <= MAX_ESTIMATE_PIXELS:
        return pixels
    return pixels[rng.choice(len(pixels), MAX_ESTIMATE_PIXELS, replace=False)]


def _estimate_from_style_image(args, state: SessionState):
    try:
        style_img = read_png(args.style)
    except OSError as e:
        raise JobError(f"style image: {e}") from e
    width, height = (args.resolution_wh if args.resolution_wh else (640, 360))
    cams = _parse_cameras(getattr(args, "camera", None), state.base_scene, width, height)
    content = rasterize(state.base_scene, cams[0], RenderOptions())
    rng = np.random.default_rng(args.seed)
    return estimate_transform(_subsample(content.color.reshape(-1, 3), rng),
                              _subsample(style_img.reshape(-1, 3), rng),
                              method=getattr(args, "method", "full_covariance"))


def cmd_render(args) -> int:
    state = _build_state(args)
    width, height = args.resolution_wh or (640, 360)
    cams = _parse_cameras(args.camera, state.base_scene, width, height)
    sweep = _parse_sweep(args.sweep) if args.sweep else None
    passes = args.passes.split(",") if args.passes else _default_passes(state)
    background = _parse_background(args.background) if args.background else (0.0, 0.0, 0.0)
    out_dir = Path(args.out or "renders")

    jobs = []
    values = sweep[1] if sweep else [None]
    for pose_idx, cam in enumerate(cams):
        for value in values:
            if sweep:
                name = f"{pose_idx:03d}_{sweep[0]}_{value:g}.png"
            else:
                name = f"{pose_idx:03d}.png"
            jobs.append((pose_idx, cam, value, name))

    frames = []
    report = [f"scene={args.scene}", f"poses={len(cams)}",
              f"passes={','.join(passes)}", f"resolution={width}x{height}"]
    if sweep:
        report.append(f"sweep={sweep[0]}")
    base_climate = state.climate
    for pose_idx, cam, value, name in jobs:
        state.climate = _sweep_applied(base_climate, sweep[0], value) if sweep else base_climate
        t0 = time.perf_counter()
        image, timings, _ = render_frame(state, cam, passes, args.time, background)
        total = (time.perf_counter() - t0) * 1000.0
        frames.append((name, encode_png(image)))
        fields = " ".join(f"{k}={v:.3f}" for k, v in sorted(timings.items()))
        report.append(f"image={name} {fields} total_ms={total:.3f}")

    out_dir.mkdir(parents=True, exist_ok=True)
    for name, png in frames:
        _atomic_write(out_dir / name, png)
    _atomic_write(out_dir / "timings.txt", ("\n".join(report) + "\n").encode())
    print(f"wrote {len(frames)} frame(s) to {out_dir}")
    return 0


def cmd_style(args) -> int:
    if not args.style and not args.transform:
        raise JobError("style needs --style <image> or --transform <file>")
    state = _build_state(args)
    t = state.active_transform

    width, height = args.resolution_wh or (640, 360)
    cam = _parse_cameras(args.camera, state.base_scene, width, height)[0]
    before = rasterize(state.base_scene, cam, RenderOptions())
    styled = apply_transform(state.base_scene, t)
    after = rasterize(styled, cam, RenderOptions())

    print("matrix:")
    for row in t.matrix:
        print("  " + " ".join(f"{v: .6f}" for v in row))
    print("bias:   " + " ".join(f"{v: .6f}" for v in t.bias))
    if args.style:
        style_img = read_png(args.style)
        print(f"style_distance_before={style_distance_metric(before.color, style_img):.6f}")
        print(f"style_distance_after={style_distance_metric(after.color, style_img):.6f}")

    out = Path(args.out or "styled.ply")
    save_scene(styled, out)
    if args.save_transform:
        save_transform(t, args.save_transform)
    print(f"wrote {out}")
    return 0


def cmd_snow_prep(args) -> int:
    state = _build_state(args)
    if state.climate.snow is None:
        raise JobError("climate document has no snow section")
    from .effects.snow import place_snow

    t0 = time.perf_counter()
    placed = place_snow(state.base_scene, state.climate.snow)
    prep_ms = (time.perf_counter() - t0) * 1000.0

    out = Path(args.out or "snow.ply")
    save_scene(placed, out)
    stats = [f"count={len(placed)}", f"prep_ms={prep_ms:.3f}"]
    if args.ground_truth_height is not None and len(placed) > 0:
        expected = args.ground_truth_height + state.climate.snow.thickness / 2.0
        heights = placed.centers @ state.climate.snow.up
        deviation = float(np.abs(heights - expected).mean())
        stats.append(f"mean_surface_deviation={deviation:.6f}")
    print(" ".join(stats))
    return 0


def cmd_bench(args) -> int:
    state = _build_state(args)
    resolutions = [_parse_resolution(r) for r in (args.resolution or "640x360").split(",")]
    runs = max(int(args.runs), 10)
    passes = args.passes.split(",") if args.passes else _default_passes(state)

    lines = []
    for width, height in resolutions:
        cam = _parse_cameras(args.camera, state.base_scene, width, height)[0]
        per_pass = {}
        for _ in range(runs):
            t0 = time.perf_counter()
            _, timings, _ = render_frame(state, cam, passes, args.time)
            timings["frame_ms"] = (time.perf_counter() - t0) * 1000.0
            for k, v in timings.items():
                per_pass.setdefault(k, []).append(v)
        for key in sorted(per_pass):
            med = statistics.median(per_pass[key])
            lines.append(f"resolution={width}x{height} pass={key} "
                         f"median_ms={med:.3f} runs={runs}")
    text = "\n".join(lines)
    print(text)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        _atomic_write(Path(args.out), (text + "\n").encode())
    return 0


def cmd_serve(args) -> int:
    from .service import main as service_main

    argv = []
    if args.scene:
        argv += ["--scene", args.scene]
    if args.presets:
        argv += ["--presets", args.presets]
    argv += ["--host", args.host, "--port", str(args.port)]
    service_main(argv)
    return 0


def _apply_config_file(args):
    if not getattr(args, "config", None):
        return
    path = Path(args.config)
    if not path.exists():
        raise JobError(f"config file not found: {path}")
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise JobError(f"{path}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        attr = key.strip().replace("-", "_")
        if not hasattr(args, attr):
            raise JobError(f"{path}:{lineno}: unknown config key {key.strip()!r}")
        if getattr(args, attr) is None:  # flags override the file
            setattr(args, attr, value.strip())


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="splatfx",
                                 description="splat renderer with restyling and climate effects")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, out_help):
        p.add_argument("--scene", help="scene file (.ply)")
        p.add_argument("--camera", help="orbit:k=v,... or JSON pose file")
        p.add_argument("--climate", help="climate parameter JSON document")
        p.add_argument("--style", help="style reference image (png)")
        p.add_argument("--transform", help="color transform JSON file")
        p.add_argument("--out", help=out_help)
        p.add_argument("--resolution", help="WxH")
        p.add_argument("--seed", type=int, default=0, help="rng seed for sampled estimators")
        p.add_argument("--time", type=float, default=0.0, help="wave-phase time, seconds")
        p.add_argument("--passes", help="comma list from style,snow,flood,smog")
        p.add_argument("--config", help="key=value config file mirroring the flags")

    p_render = sub.add_parser("render", help="render stills or orbits, optionally sweeping a parameter")
    common(p_render, "output directory")
    p_render.add_argument("--sweep", help="climate sweep, e.g. smog.density=0,0.05,0.1")
    p_render.add_argument("--background", help="background color r,g,b")
    p_render.set_defaults(func=cmd_render)

    p_style = sub.add_parser("style", help="restyle a scene file")
    common(p_style, "output scene file")
    p_style.add_argument("--method", default="full_covariance",
                         choices=["full_covariance", "mean_std"])
    p_style.add_argument("--save-transform", help="also write the estimated transform JSON")
    p_style.set_defaults(func=cmd_style)

    p_snow = sub.add_parser("snow-prep", help="precompute snow placement")
    common(p_snow, "output snow scene file")
    p_snow.add_argument("--ground-truth-height", type=float,
                        help="known surface height for the deviation stat")
    p_snow.set_defaults(func=cmd_snow_prep)

    p_bench = sub.add_parser("bench", help="per-pass timing medians")
    common(p_bench, "optional report file")
    p_bench.add_argument("--runs", type=int, default=10)
    p_bench.set_defaults(func=cmd_bench)

    p_serve = sub.add_parser("serve", help="run the render service")
    p_serve.add_argument("--scene")
    p_serve.add_argument("--presets")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8313)
    p_serve.set_defaults(func=cmd_serve)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _apply_config_file(args)
        if args.command != "serve":
            if not args.scene:
                raise JobError("--scene is required (flag or config file)")
            # bench consumes a comma-separated resolution list on its own
            single = args.resolution if args.command != "bench" else None
            args.resolution_wh = _parse_resolution(single) if single else None
        return args.func(args)
    except JobError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (SceneError, ClimateParamError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
