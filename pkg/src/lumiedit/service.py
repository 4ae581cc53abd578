"""Local HTTP service for interactive light editing.

Single scene, single session. Every mutation bumps a revision counter and
is serialized behind one lock; renders snapshot the scene at a revision and
are cached by (revision, render settings), so a cached response can never
be stale. Concurrent writers use optimistic concurrency: requests carry
``expected_revision`` and get 409 when it no longer matches. One heavy job
(render or refine) runs at a time; a second gets 429 and should retry.

Error shape is uniform JSON: {"error": msg, "field": path|null}. Structural
problems with a request body are 400, revision conflicts 409, physically
invalid light parameters 422.
"""

import dataclasses
import json
import queue
import threading

import numpy as np
from fastapi import FastAPI, HTTPException, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, StreamingResponse

from .lightgeom import HALF_PI, LAMBDA_CLAMPS, LightError, light_from_dict
from .optimize import OptimConfig, refine_lights
from .pfm import encode_pfm
from .render import compose_and_rerender, encode_png, render_manifest, render_scene
from .scenecore import save_scene

COMPONENTS = ("direct", "shadow", "indirect")
ESTIMATORS = ("area", "angular", "mis")


def _fail(status, error, field=None):
    raise HTTPException(status, detail={"error": error, "field": field})


class SessionState:
    """Scene plus revision counter, render cache, and the heavy-job gate."""

    def __init__(self, scene, threads=None):
        self.scene = scene
        self.revision = 0
        self.threads = threads
        self.lock = threading.Lock()  # serializes mutations
        self.cache = {}  # (revision, spp, seed, estimator, components) -> ShadingSet
        self.heavy = threading.BoundedSemaphore(1)

    def mutate(self, expected_revision, fn):
        """Apply fn(scene) under the writer lock; returns the new revision."""
        with self.lock:
            if expected_revision is not None and expected_revision != self.revision:
                _fail(409, f"expected revision {expected_revision}, server is at {self.revision}")
            fn(self.scene)
            self.revision += 1
            self.cache = {k: v for k, v in self.cache.items() if k[0] == self.revision}
            return self.revision

    def snapshot(self):
        """Immutable view of the scene at the current revision.

        Mutations replace light objects rather than editing them, so copying
        the list pins the whole light set.
        """
        with self.lock:
            return self.revision, dataclasses.replace(self.scene, lights=list(self.scene.lights))

    def shading_for(self, spp, seed, estimator, components):
        """Cached render at the current revision, computing on miss.

        Returns (revision, scene snapshot, shading). 429 when another heavy
        job is running.
        """
        rev, snap = self.snapshot()
        key = (rev, spp, seed, estimator, components)
        with self.lock:
            hit = self.cache.get(key)
        if hit is not None:
            return rev, snap, hit
        if not self.heavy.acquire(blocking=False):
            _fail(429, "another render or refinement is in progress; retry shortly")
        try:
            shading = render_scene(
                snap,
                spp=spp,
                seed=seed,
                estimator=estimator,
                threads=self.threads,
                with_shadows="shadow" in components,
                with_indirect="indirect" in components,
            )
        finally:
            self.heavy.release()
        with self.lock:
            if self.revision == rev:  # never cache (or serve) a stale revision
                self.cache[key] = shading
        return rev, snap, shading

    def latest_shading(self):
        """Most recent cached render at the current revision, if any."""
        with self.lock:
            entries = [(k, v) for k, v in self.cache.items() if k[0] == self.revision]
        return entries[-1][1] if entries else None


async def _body(request: Request) -> dict:
    raw = await request.body()
    if not raw:
        return {}
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as e:
        _fail(400, f"malformed JSON body: {e}")
    if not isinstance(data, dict):
        _fail(400, "JSON body must be an object")
    return data


def _parse_light(body, scene):
    d = body.get("light")
    if not isinstance(d, dict):
        _fail(400, "body must carry a light descriptor under 'light'", field="light")
    try:
        light = light_from_dict(d)
    except KeyError as e:
        _fail(400, f"light descriptor missing field {e.args[0]!r}", field=str(e.args[0]))
    except LightError as e:
        status = 400 if e.field == "type" else 422
        _fail(status, str(e), field=e.field)
    except (TypeError, ValueError) as e:
        _fail(400, f"malformed light descriptor: {e}", field="light")
    if light.mask_id is not None and light.mask_id not in scene.masks:
        _fail(422, f"scene has no mask {light.mask_id!r}", field="mask_id")
    return light


def _expected_revision(body):
    v = body.get("expected_revision")
    if v is None:
        return None
    if not isinstance(v, int) or isinstance(v, bool):
        _fail(400, "expected_revision must be an integer", field="expected_revision")
    return v


def _render_settings(body):
    spp = body.get("spp", 64)
    seed = body.get("seed", 0)
    estimator = body.get("estimator", "mis")
    fmt = body.get("format", "png")
    comps = body.get("components", list(COMPONENTS))
    if not isinstance(spp, int) or spp < 1:
        _fail(400, "spp must be a positive integer", field="spp")
    if not isinstance(seed, int) or isinstance(seed, bool):
        _fail(400, "seed must be an integer", field="seed")
    if estimator not in ESTIMATORS:
        _fail(400, f"estimator must be one of {ESTIMATORS}", field="estimator")
    if fmt not in ("png", "pfm"):
        _fail(400, "format must be 'png' or 'pfm'", field="format")
    if not isinstance(comps, list) or any(c not in COMPONENTS for c in comps):
        _fail(400, f"components must be a subset of {COMPONENTS}", field="components")
    return spp, seed, estimator, fmt, tuple(c for c in COMPONENTS if c in comps)


def _lambda_bounds(lobe):
    lo, hi = LAMBDA_CLAMPS[lobe]
    return max(float(np.tan(HALF_PI * lo)), 1e-6), float(np.tan(HALF_PI * hi))


def _schema():
    """Parameter ranges the client mirrors; the server enforces the same."""
    def lobe_params(name):
        lam_min, lam_max = _lambda_bounds(name)
        return [
            {"path": f"radiance.{name}.w", "type": "rgb", "min": 0.0, "max": 1e6, "scale": "log"},
            {"path": f"radiance.{name}.lam", "type": "float", "min": lam_min, "max": lam_max, "scale": "log"},
            {"path": f"radiance.{name}.d", "type": "unit3"},
        ]

    window = [
        {"path": "enabled", "type": "bool"},
        {"path": "c", "type": "vec3"},
        {"path": "x", "type": "vec3"},
        {"path": "y", "type": "vec3"},
    ]
    for name in ("sun", "sky", "ground"):
        window += lobe_params(name)
    box = [
        {"path": "enabled", "type": "bool"},
        {"path": "c", "type": "vec3"},
        {"path": "axes", "type": "mat3"},
        {"path": "w", "type": "rgb", "min": 0.0, "max": 1e6, "scale": "log"},
    ]
    surfel = [
        {"path": "enabled", "type": "bool"},
        {"path": "w", "type": "rgb", "min": 0.0, "max": 1e6, "scale": "log"},
        {"path": "delta_l", "type": "float", "min": -100.0, "max": 100.0, "scale": "linear"},
    ]
    return {
        "kinds": {"window": window, "box_lamp": box, "surfel_lamp": surfel},
        "render": {
            "spp": {"min": 1, "max": 1024, "default": 64},
            "components": list(COMPONENTS),
            "estimators": list(ESTIMATORS),
            "formats": ["png", "pfm"],
        },
        "refine": {"iters": {"min": 1, "max": 5000, "default": 200}},
    }


def build_app(scene, threads=None, static_dir=None) -> FastAPI:
    scene.validate()
    state = SessionState(scene, threads=threads)
    app = FastAPI(title="lumiedit", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
        expose_headers=["X-Revision", "X-Render-Manifest"],
    )
    app.state.session = state

    # flat {"error", "field"} bodies instead of FastAPI's {"detail": ...}
    @app.exception_handler(HTTPException)
    async def _http_error(request, exc):
        detail = exc.detail if isinstance(exc.detail, dict) else {"error": str(exc.detail), "field": None}
        return JSONResponse(detail, status_code=exc.status_code)

    @app.exception_handler(RequestValidationError)
    async def _request_error(request, exc):
        err = exc.errors()[0]
        field = ".".join(str(p) for p in err["loc"] if p not in ("query", "body"))
        return JSONResponse({"error": err["msg"], "field": field or None}, status_code=400)

    def scene_doc():
        s = state.scene
        return {
            "revision": state.revision,
            "camera": s.camera.to_dict(),
            "lights": [l.to_dict() for l in s.lights],
            "masks": sorted(s.masks),
            "has_image": s.image is not None,
        }

    @app.get("/scene")
    def get_scene():
        with state.lock:
            return scene_doc()

    @app.get("/schema")
    def get_schema():
        return _schema()

    @app.put("/lights/{light_id}")
    async def put_light(light_id: str, request: Request):
        body = await _body(request)
        light = _parse_light(body, state.scene)
        if light.light_id != light_id:
            _fail(400, f"body light id {light.light_id!r} does not match path {light_id!r}", field="light.id")

        def apply(s):
            ids = [l.light_id for l in s.lights]
            if light_id not in ids:
                _fail(404, f"no light with id {light_id!r}")
            s.lights[ids.index(light_id)] = light

        rev = state.mutate(_expected_revision(body), apply)
        return {"revision": rev}

    @app.post("/lights")
    async def post_light(request: Request):
        body = await _body(request)
        light = _parse_light(body, state.scene)

        def apply(s):
            if any(l.light_id == light.light_id for l in s.lights):
                _fail(400, f"light id {light.light_id!r} already exists", field="light.id")
            s.lights.append(light)

        rev = state.mutate(_expected_revision(body), apply)
        return {"revision": rev, "id": light.light_id}

    @app.delete("/lights/{light_id}")
    async def delete_light(light_id: str, request: Request):
        body = await _body(request)

        def apply(s):
            if all(l.light_id != light_id for l in s.lights):
                _fail(404, f"no light with id {light_id!r}")
            s.lights = [l for l in s.lights if l.light_id != light_id]

        rev = state.mutate(_expected_revision(body), apply)
        return {"revision": rev}

    @app.post("/lights/{light_id}/enabled")
    async def set_enabled(light_id: str, request: Request):
        body = await _body(request)
        enabled = body.get("enabled")
        if not isinstance(enabled, bool):
            _fail(400, "body must carry boolean 'enabled'", field="enabled")

        def apply(s):
            for i, l in enumerate(s.lights):
                if l.light_id == light_id:
                    # replace rather than edit in place so snapshots stay pinned
                    s.lights[i] = dataclasses.replace(l, enabled=enabled)
                    return
            _fail(404, f"no light with id {light_id!r}")

        rev = state.mutate(_expected_revision(body), apply)
        return {"revision": rev, "enabled": enabled}

    @app.post("/render")
    async def render(request: Request):
        body = await _body(request)
        spp, seed, estimator, fmt, comps = _render_settings(body)
        rev, snap, shading = state.shading_for(spp, seed, estimator, comps)
        if fmt == "png":
            _, ldr = compose_and_rerender(snap, shading)
            data, ctype = encode_png(ldr), "image/png"
        else:
            data, ctype = encode_pfm(shading.e_total.astype(np.float32)), "application/x-pfm"
        headers = {
            "X-Revision": str(rev),
            "X-Render-Manifest": json.dumps(render_manifest(shading)),
        }
        return Response(content=data, media_type=ctype, headers=headers)

    @app.get("/pixel")
    def pixel(x: int, y: int):
        shading = state.latest_shading()
        if shading is None:
            _fail(404, "no render cached at the current revision; POST /render first")
        h, w = state.scene.shape
        if not (0 <= x < w and 0 <= y < h):
            _fail(400, f"pixel ({x}, {y}) outside {w}x{h} image", field="x")
        e = shading.e_total[y, x]
        ldr = np.clip(e * state.scene.albedo[y, x], 0.0, 1.0)
        return {
            "x": x,
            "y": y,
            "revision": state.revision,
            "e": [float(v) for v in e],
            "ldr": [float(v) for v in ldr],
        }

    @app.post("/refine")
    async def refine(request: Request):
        body = await _body(request)
        iters = body.get("iters", 200)
        if not isinstance(iters, int) or iters < 1:
            _fail(400, "iters must be a positive integer", field="iters")
        spp = body.get("spp", 32)
        seed = body.get("seed", 0)
        lr = body.get("lr", 1e-2)
        if not isinstance(spp, int) or spp < 1:
            _fail(400, "spp must be a positive integer", field="spp")
        expected = _expected_revision(body)
        if state.scene.image is None:
            _fail(400, "scene has no input image to refine against", field="image")
        if not state.heavy.acquire(blocking=False):
            _fail(429, "another render or refinement is in progress; retry shortly")

        start_rev, snap = state.snapshot()
        if expected is not None and expected != start_rev:
            state.heavy.release()
            _fail(409, f"expected revision {expected}, server is at {start_rev}")

        cfg = OptimConfig(lr=float(lr), max_iters=iters, spp=spp, seed=int(seed))
        q = queue.Queue()

        def worker():
            try:
                lights, history = refine_lights(
                    snap,
                    config=cfg,
                    threads=state.threads,
                    progress=lambda i, v: q.put(("step", i, v)),
                )
                q.put(("done", lights, history))
            except Exception as e:  # surfaced as the stream's final line
                q.put(("error", str(e)))

        # stream one JSON object per line: iterations, then lights + revision
        def lines():
            threading.Thread(target=worker, daemon=True).start()
            try:
                while True:
                    item = q.get()
                    if item[0] == "step":
                        yield json.dumps({"iteration": item[1], "loss": item[2]}) + "\n"
                    elif item[0] == "error":
                        yield json.dumps({"error": item[1]}) + "\n"
                        return
                    else:
                        lights = item[1]

                        def apply(s):
                            s.lights = lights

                        try:
                            rev = state.mutate(start_rev, apply)
                        except HTTPException as e:
                            yield json.dumps({"error": e.detail["error"]}) + "\n"
                            return
                        yield json.dumps(
                            {"revision": rev, "lights": [l.to_dict() for l in lights]}
                        ) + "\n"
                        return
            finally:
                state.heavy.release()

        return StreamingResponse(lines(), media_type="application/x-ndjson")

    @app.post("/save-scene")
    async def save(request: Request):
        body = await _body(request)
        dirpath = body.get("dir")
        if not isinstance(dirpath, str) or not dirpath:
            _fail(400, "body must carry an output directory under 'dir'", field="dir")
        with state.lock:
            path = save_scene(state.scene, dirpath)
        return {"path": path, "revision": state.revision}

    @app.get("/")
    def root():
        if static_dir is None:
            return {"service": "lumiedit", "revision": state.revision}
        from fastapi.responses import FileResponse
        import os

        return FileResponse(os.path.join(static_dir, "index.html"))

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir), name="ui")
    return app
