"""Full-pipeline rendering and image composition.

render_scene runs, per enabled light, the chosen direct estimator plus its
shadow raster, then the one-bounce gather, and packs everything in a
ShadingSet. Composition is strictly factored:

    E_d = sum_j E_j * S_j        E = E_d + E_ind        ldr = clip(E * A, 0, 1)

so disabling a light removes exactly its E_j*S_j term from E_d.
"""

import json
import struct
import time
import zlib
from dataclasses import dataclass, field

import numpy as np

from ..lightgeom import WindowLight
from ..scenecore import Scene
from .direct import direct_area, direct_angular, direct_mis, sun_carries_energy
from .indirect import GatherPlan, build_gather_plan
from .mesh import DepthMesh, build_depth_mesh
from .shadow import light_shadow

ESTIMATORS = {"area": direct_area, "angular": direct_angular, "mis": direct_mis}


@dataclass
class ShadingSet:
    components: dict  # light id -> unshadowed direct raster (h, w, 3)
    shadows: dict  # light id -> visibility raster (h, w)
    e_direct: np.ndarray
    e_indirect: np.ndarray
    e_total: np.ndarray
    sample_counts: dict
    seed: int
    spp: int
    estimator: str
    timings: dict = field(default_factory=dict)


def compose_direct(components: dict, shadows: dict) -> np.ndarray:
    first = next(iter(components.values()))
    e_d = np.zeros_like(first)
    for lid, e_j in components.items():
        e_d = e_d + e_j * shadows[lid][..., None]
    return e_d


def render_scene(
    scene: Scene,
    spp: int = 64,
    seed: int = 0,
    estimator: str = "mis",
    threads=None,
    with_shadows: bool = True,
    with_indirect: bool = True,
    shadow_spp: int = 16,
    n_gather: int = 64,
    mesh: DepthMesh = None,
    gather_plan: GatherPlan = None,
) -> ShadingSet:
    if estimator not in ESTIMATORS:
        raise ValueError(f"unknown estimator {estimator!r}")
    lights = scene.enabled_lights()
    h, w = scene.shape
    need_mesh = (with_shadows and lights) or with_indirect
    if mesh is None and need_mesh:
        t0 = time.perf_counter()
        mesh = build_depth_mesh(scene)
        t_mesh = time.perf_counter() - t0
    else:
        t_mesh = 0.0

    components, shadows, counts, timings = {}, {}, {}, {"mesh": t_mesh}
    for light in lights:
        fn = ESTIMATORS[estimator]
        if estimator == "angular" and not isinstance(light, WindowLight):
            fn = direct_area  # lamps have no angular strategy
        t0 = time.perf_counter()
        components[light.light_id] = fn(scene, light, spp=spp, seed=seed, threads=threads)
        timings[f"direct.{light.light_id}"] = time.perf_counter() - t0
        counts[light.light_id] = spp * (2 if estimator == "mis" and sun_carries_energy(light) else 1)
        if with_shadows:
            t0 = time.perf_counter()
            shadows[light.light_id] = light_shadow(
                scene, mesh, light, spp=shadow_spp, seed=seed, threads=threads
            )
            timings[f"shadow.{light.light_id}"] = time.perf_counter() - t0
        else:
            shadows[light.light_id] = np.ones((h, w))

    if components:
        e_direct = compose_direct(components, shadows)
    else:
        e_direct = np.zeros((h, w, 3))

    if with_indirect:
        t0 = time.perf_counter()
        if gather_plan is None:
            gather_plan = build_gather_plan(scene, mesh=mesh, n_gather=n_gather, seed=seed, threads=threads)
        e_indirect = gather_plan.apply(e_direct, scene.albedo)
        timings["indirect"] = time.perf_counter() - t0
    else:
        e_indirect = np.zeros_like(e_direct)

    return ShadingSet(
        components=components,
        shadows=shadows,
        e_direct=e_direct,
        e_indirect=e_indirect,
        e_total=e_direct + e_indirect,
        sample_counts=counts,
        seed=seed,
        spp=spp,
        estimator=estimator,
        timings=timings,
    )


def compose_and_rerender(scene: Scene, shading: ShadingSet):
    """Total shading and the clamped diffuse re-render (linear RGB)."""
    e = shading.e_direct + shading.e_indirect
    ldr = np.clip(e * scene.albedo, 0.0, 1.0)
    return e, ldr


def render_manifest(shading: ShadingSet) -> dict:
    return {
        "seed": shading.seed,
        "spp": shading.spp,
        "estimator": shading.estimator,
        "sample_counts": dict(shading.sample_counts),
        "timings": {k: round(v, 6) for k, v in shading.timings.items()},
    }


def write_manifest(path, shading: ShadingSet):
    with open(path, "w") as f:
        json.dump(render_manifest(shading), f, indent=2)


# ---------------------------------------------------------------------------
# PNG export (8-bit RGB, display gamma applied here and only here)


def encode_png(rgb01: np.ndarray, gamma: float = 1 / 2.2) -> bytes:
    arr = np.clip(np.asarray(rgb01, dtype=np.float64), 0.0, 1.0)
    if arr.ndim == 2:
        arr = np.repeat(arr[..., None], 3, axis=2)
    arr = np.power(arr, gamma) if gamma != 1.0 else arr
    data = (arr * 255.0 + 0.5).astype(np.uint8)
    h, w = data.shape[:2]
    raw = b"".join(b"\x00" + data[i].tobytes() for i in range(h))

    def chunk(tag, payload):
        body = tag + payload
        return struct.pack(">I", len(payload)) + body + struct.pack(">I", zlib.crc32(body))

    ihdr = struct.pack(">IIBBBBB", w, h, 8, 2, 0, 0, 0)
    return (
        b"\x89PNG\r\n\x1a\n"
        + chunk(b"IHDR", ihdr)
        + chunk(b"IDAT", zlib.compress(raw, 9))
        + chunk(b"IEND", b"")
    )


def write_png(path, rgb01: np.ndarray, gamma: float = 1 / 2.2):
    with open(path, "wb") as f:
        f.write(encode_png(rgb01, gamma=gamma))
