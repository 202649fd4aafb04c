"""JSON-over-HTTP render service for the interactive viewer and scripts.

One session per process. Parameter updates and renders serialize on a
lock; the untouched base scene is kept so clearing all parameters
reproduces the original render bit-exactly. Snow placement is cached
by (scene generation, snow parameters) since it depends only on
geometry. Pass order is fixed: style, snow, flood, smog.
"""

import base64
import hashlib
import json
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from threading import Lock

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response, StreamingResponse

from . import __version__
from .camera import Camera, look_at, orbit_poses
from .effects.params import ClimateParamError, ClimateParams
from .effects.smog import apply_smog
from .effects.snow import place_snow
from .effects.water import apply_flood
from .imgio import decode_png, encode_png
from .ply import load_scene
from .raster import RenderOptions, rasterize
from .scene import GaussianScene, SceneError
from .style import ColorTransform, apply_transform, estimate_transform, load_transform

PASS_ORDER = ("style", "snow", "flood", "smog")


def _snow_key(generation: int, snow) -> str:
    doc = {
        "generation": generation,
        "thickness": snow.thickness,
        "grid_spacing": snow.grid_spacing,
        "up": snow.up.tolist(),
        "min_up_dot": snow.min_up_dot,
        "albedo": snow.albedo.tolist(),
        "wrap": snow.wrap,
        "light_dir": snow.light_dir.tolist(),
    }
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()


@dataclass
class SessionState:
    base_scene: GaussianScene = None
    styled_scene: GaussianScene = None
    active_transform: ColorTransform = None
    climate: ClimateParams = field(default_factory=ClimateParams)
    last_frame_id: int = 0
    snow_cache: dict = field(default_factory=dict)
    snow_cache_hits: int = 0
    snow_cache_misses: int = 0
    scene_generation: int = 0
    last_camera: Camera = None
    lock: Lock = field(default_factory=Lock)

    def scene_summary(self) -> dict:
        s = self.base_scene
        return {
            "count": len(s),
            "bounds": {"min": s.bounds[0].tolist(), "max": s.bounds[1].tolist()},
            "sh_degree": s.sh_degree,
        }

    def default_camera(self, width=640, height=360) -> Camera:
        bounds = self.base_scene.bounds
        center = bounds.mean(axis=0)
        radius = max(float(np.linalg.norm(bounds[1] - bounds[0])), 1.0)
        return look_at(center + np.array([0.0, 0.35, -1.0]) * 1.5 * radius, center,
                       width=width, height=height, far=max(100.0, 6.0 * radius))

    def styled(self) -> GaussianScene:
        if self.active_transform is None:
            return self.base_scene
        if self.styled_scene is None:
            self.styled_scene = apply_transform(self.base_scene, self.active_transform)
        return self.styled_scene

    def snow_splats(self):
        """(placed, cache hit/miss) for the current snow params."""
        snow = self.climate.snow
        if snow is None or snow.thickness == 0.0:
            return None, "none"
        key = _snow_key(self.scene_generation, snow)
        if key in self.snow_cache:
            self.snow_cache_hits += 1
            return self.snow_cache[key], "hit"
        placed = place_snow(self.base_scene, snow)
        self.snow_cache[key] = placed
        self.snow_cache_misses += 1
        return placed, "miss"


def render_frame(state: SessionState, camera: Camera, passes, t: float = 0.0,
                 background=(0.0, 0.0, 0.0)):
    """Rasterize plus the requested deferred passes. Returns (image, timings, cache)."""
    timings = {}
    cache_state = "none"

    t0 = time.perf_counter()
    scene = state.styled() if "style" in passes and state.active_transform is not None \
        else state.base_scene
    timings["style_ms"] = (time.perf_counter() - t0) * 1000.0

    shader = None
    if "snow" in passes and state.climate.snow is not None:
        t0 = time.perf_counter()
        placed, cache_state = state.snow_splats()
        timings["snow_prep_ms"] = (time.perf_counter() - t0) * 1000.0
        if placed is not None and len(placed) > 0:
            scene = scene.extended(placed)
            mask = np.zeros(len(scene), dtype=bool)
            mask[len(scene) - len(placed):] = True
            from .effects.snow import SnowShader
            shader = SnowShader(state.climate.snow, camera, mask)

    t0 = time.perf_counter()
    fb = rasterize(scene, camera, RenderOptions(background=background), shader=shader)
    # snow splats are shaded inline while compositing; prep is the separate cost
    timings["raster_ms"] = (time.perf_counter() - t0) * 1000.0

    if "flood" in passes and state.climate.water is not None:
        t0 = time.perf_counter()
        fb = apply_flood(fb, camera, state.climate.water, t)
        timings["flood_ms"] = (time.perf_counter() - t0) * 1000.0

    if "smog" in passes and state.climate.smog is not None:
        t0 = time.perf_counter()
        fb = apply_smog(fb, state.climate.smog)
        timings["smog_ms"] = (time.perf_counter() - t0) * 1000.0

    return fb.color, timings, cache_state


def _error(status: int, message: str, field_name: str = None):
    body = {"error": message}
    if field_name:
        body["field"] = field_name
    return JSONResponse(status_code=status, content=body)


def create_app(presets_dir=None, scene_path=None) -> FastAPI:
    app = FastAPI(title="splatfx render service", version=__version__)
    from fastapi.middleware.cors import CORSMiddleware

    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"], expose_headers=["*"])
    state = SessionState()
    app.state.session = state
    presets = Path(presets_dir) if presets_dir else None

    if scene_path:
        state.base_scene = load_scene(scene_path)
        state.scene_generation += 1

    def _require_scene():
        if state.base_scene is None:
            return _error(409, "no scene loaded")
        return None

    @app.get("/health")
    def health():
        return {
            "status": "ok",
            "version": __version__,
            "scene_loaded": state.base_scene is not None,
            "snow_cache": {"hits": state.snow_cache_hits, "misses": state.snow_cache_misses},
        }

    @app.post("/scene")
    async def post_scene(request: Request):
        body = await request.json()
        path = body.get("path")
        data_b64 = body.get("data_b64")
        if (path is None) == (data_b64 is None):
            return _error(422, "provide exactly one of 'path' or 'data_b64'")
        try:
            if path is not None:
                scene = load_scene(path)
            else:
                with tempfile.NamedTemporaryFile(suffix=".ply") as tmp:
                    tmp.write(base64.b64decode(data_b64))
                    tmp.flush()
                    scene = load_scene(tmp.name)
        except (SceneError, OSError, ValueError) as e:
            return _error(422, f"scene load failed: {e}")
        with state.lock:
            state.base_scene = scene
            state.styled_scene = None
            state.active_transform = None
            state.snow_cache.clear()
            state.scene_generation += 1
            return state.scene_summary()

    @app.get("/params")
    def get_params():
        names = sorted(p.stem for p in presets.glob("*.json")) if presets else []
        return {
            "effective": state.climate.to_dict(),
            "style_active": state.active_transform is not None,
            "style_presets": names,
            "pass_order": list(PASS_ORDER),
        }

    @app.post("/params")
    async def post_params(request: Request):
        body = await request.json()
        with state.lock:
            new_climate = state.climate
            if "climate" in body:
                try:
                    new_climate = state.climate.merged(body["climate"])
                except (ClimateParamError, TypeError) as e:
                    return _error(422, str(e), field_name=_field_of(str(e)))

            new_transform = state.active_transform
            touched_style = False
            if body.get("clear_style"):
                new_transform = None
                touched_style = True
            if "transform" in body:
                try:
                    new_transform = _transform_from_doc(body["transform"])
                except ValueError as e:
                    return _error(422, f"transform: {e}", field_name="transform")
                touched_style = True
            if "style_preset" in body:
                if presets is None:
                    return _error(422, "no preset directory configured", field_name="style_preset")
                path = presets / f"{body['style_preset']}.json"
                if not path.exists():
                    return _error(422, f"unknown style preset {body['style_preset']!r}",
                                  field_name="style_preset")
                new_transform = load_transform(path)
                touched_style = True
            if "style_image_b64" in body:
                err = _require_scene()
                if err:
                    return err
                try:
                    style_img = decode_png(base64.b64decode(body["style_image_b64"]))
                except Exception as e:
                    return _error(422, f"style image: {e}", field_name="style_image_b64")
                cam = state.last_camera or state.default_camera()
                content_fb = rasterize(state.base_scene, cam, RenderOptions())
                new_transform = estimate_transform(
                    content_fb.color.reshape(-1, 3), style_img.reshape(-1, 3))
                touched_style = True

            state.climate = new_climate
            if touched_style:
                state.active_transform = new_transform
                state.styled_scene = None
            return {
                "effective": state.climate.to_dict(),
                "style_active": state.active_transform is not None,
            }

    @app.post("/render")
    async def post_render(request: Request):
        err = _require_scene()
        if err:
            return err
        body = await request.json()
        passes = body.get("passes", [])
        bad = [p for p in passes if p not in PASS_ORDER]
        if bad:
            return _error(422, f"unknown pass {bad[0]!r}", field_name="passes")
        t = float(body.get("time", 0.0))
        if t < 0:
            return _error(422, "time must be >= 0", field_name="time")
        with state.lock:
            try:
                camera = _camera_from_body(state, body)
            except ValueError as e:
                return _error(422, f"camera: {e}", field_name="camera")
            state.last_camera = camera
            image, timings, cache_state = render_frame(
                state, camera, passes, t, background=body.get("background", (0, 0, 0)))
            t0 = time.perf_counter()
            png = encode_png(image)
            timings["encode_ms"] = (time.perf_counter() - t0) * 1000.0
            state.last_frame_id += 1
            frame_id = state.last_frame_id
        return Response(
            content=png,
            media_type="image/png",
            headers={
                "X-Frame-Id": str(frame_id),
                "X-Timings": json.dumps({k: round(v, 3) for k, v in timings.items()}),
                "X-Snow-Cache": cache_state,
            },
        )

    @app.get("/stream")
    def stream(request: Request, frames: int = 10, orbit_radius: float = None,
               orbit_elevation: float = 20.0, time_step: float = 0.1,
               passes: str = "", width: int = 640, height: int = 360):
        err = _require_scene()
        if err:
            return err
        pass_set = [p for p in passes.split(",") if p]
        bad = [p for p in pass_set if p not in PASS_ORDER]
        if bad:
            return _error(422, f"unknown pass {bad[0]!r}", field_name="passes")

        def gen():
            bounds = state.base_scene.bounds
            center = bounds.mean(axis=0)
            radius = orbit_radius
            if radius is None:
                radius = max(float(np.linalg.norm(bounds[1] - bounds[0])), 1.0) * 1.5
            cams = orbit_poses(center, radius, orbit_elevation, frames,
                               width=width, height=height,
                               far=max(100.0, 6.0 * radius))
            for i, cam in enumerate(cams):
                # parameters are re-read per frame: latest update wins
                with state.lock:
                    image, timings, _ = render_frame(state, cam, pass_set, i * time_step)
                    state.last_frame_id += 1
                    frame_id = state.last_frame_id
                    effective = state.climate.to_dict()
                payload = {
                    "frame_id": frame_id,
                    "index": i,
                    "png_b64": base64.b64encode(encode_png(image)).decode("ascii"),
                    "params": effective,
                    "timings": {k: round(v, 3) for k, v in timings.items()},
                }
                yield f"data: {json.dumps(payload)}\n\n"

        return StreamingResponse(gen(), media_type="text/event-stream")

    return app


def _field_of(message: str) -> str:
    # "smog: density must be ..." -> "smog.density" best effort
    head = message.split(":", 1)[0].strip()
    for token in ("density", "thickness", "wrap", "steepness", "wavelength",
                  "grid spacing", "ior", "min_up_dot", "color"):
        if token in message:
            return f"{head}.{token.replace(' ', '_')}" if head and head != message else token
    return head or None


def _transform_from_doc(doc: dict) -> ColorTransform:
    m = np.asarray(doc.get("matrix", np.eye(3).reshape(-1).tolist()), dtype=np.float64)
    if m.size != 9:
        raise ValueError("matrix must hold 9 floats")
    bias = np.asarray(doc.get("bias", [0.0, 0.0, 0.0]), dtype=np.float64)
    if bias.shape != (3,):
        raise ValueError("bias must hold 3 floats")
    t = ColorTransform(matrix=m.reshape(3, 3), bias=bias)
    t.validate()
    return t


def _camera_from_body(state: SessionState, body: dict) -> Camera:
    width = body.get("width")
    height = body.get("height")
    if body.get("camera") is not None:
        cam = Camera.from_dict(body["camera"])
    else:
        cam = state.last_camera or state.default_camera()
    if width or height:
        cam = cam.resized(width or cam.width, height or cam.height)
        cam.validate()
    return cam


def main(argv=None):
    """Entry point for `python -m splatfx.service`."""
    import argparse

    import uvicorn

    ap = argparse.ArgumentParser(description="splatfx render service")
    ap.add_argument("--scene", help="scene file to load at startup")
    ap.add_argument("--presets", help="directory of style transform presets")
    ap.add_argument("--host", default="127.0.0.1")
    ap.add_argument("--port", type=int, default=8313)
    args = ap.parse_args(argv)
    app = create_app(presets_dir=args.presets, scene_path=args.scene)
    uvicorn.run(app, host=args.host, port=args.port)


if __name__ == "__main__":
    main()
