"""Joint light refinement against an observed LDR image.

Moves every continuous light parameter (intensities, bandwidths, directions,
positions, sizes) so the clamped diffuse re-render matches the observation in
mean squared error. Scene geometry is trusted: the depth mesh, the per-light
shadow rasters, and the indirect gather plan are built once up front and held
fixed while the lights move. That keeps each iteration differentiable end to
end and turns shadows into a constant modulation, which is the standing
approximation of this module; callers who need shadows consistent with moved
lamps should re-render after refinement.

The descent is staged: radiometric parameters (intensities, bandwidths, lobe
directions) move first, light placement and extent join once the radiometric
phase plateaus. Light positions and sizes come from depth and masks and start
near the truth, while intensity estimates routinely miss by factors; a joint
descent from such a start walks the geometry into intensity-compensating
configurations (smaller-but-brighter lamps) before the intensity can correct
itself. Best-so-far tracking means the joint phase can only improve on the
radiometric fit.
"""

import dataclasses

import numpy as np
import torch

from ..lightgeom import (
    SGLobe,
    WindowLight,
    WindowRadiance,
    bandwidth_map,
    bandwidth_unmap,
    intensity_map,
    intensity_unmap,
)
from ..render.indirect import build_gather_plan
from ..render.mesh import build_depth_mesh
from ..render.shadow import light_shadow
from .adam import Adam, DescentTracker, OptimConfig
from .gradients import NonFiniteGradientError, light_param_values, render_direct_torch, render_plans

CHART_MARGIN = 1e-6  # keep chart coordinates strictly inside (0, 1)
MIN_SURFEL_DEPTH = 1e-3
POSITIONAL_KEYS = ("c", "x", "y", "axes", "delta_l")


def _chart_of(key: str):
    """Which normalized chart a parameter steps in, if any.

    Intensities and bandwidths descend in the same tan charts the prediction
    heads use; a step then changes them multiplicatively, so a factor-of-a-few
    intensity error is a short walk instead of a long linear crawl.
    """
    if key == "w" or key.endswith(".w"):
        return "intensity"
    if key.endswith(".lam"):
        return "bandwidth"
    return None


def _to_chart(key, v):
    chart = _chart_of(key)
    if chart == "intensity":
        return np.asarray(intensity_unmap(v))
    if chart == "bandwidth":
        return np.asarray(bandwidth_unmap(v, key.split(".")[0]))
    return v


def _from_chart(key, v):
    chart = _chart_of(key)
    if chart == "intensity":
        return intensity_map(v)
    if chart == "bandwidth":
        return bandwidth_map(v, key.split(".")[0])
    return v


def _orthogonalize_rows(a):
    """Gram-Schmidt the rows of a, preserving each row's length."""
    out = np.array(a, dtype=np.float64)
    norms = np.linalg.norm(out, axis=1)
    for i in range(out.shape[0]):
        v = out[i]
        for j in range(i):
            u = out[j]
            v = v - (v @ u) / (u @ u) * u
        n = np.linalg.norm(v)
        if n <= 0:
            raise ValueError("box axes collapsed during refinement")
        out[i] = v * (norms[i] / n)
    return out


def _project(params: dict, lights_by_id: dict) -> dict:
    """Pull each parameter back to its feasible set after an Adam step."""
    for name, v in params.items():
        lid, key = name.split(":", 1)
        if _chart_of(key) is not None:
            params[name] = np.clip(v, CHART_MARGIN, 1.0 - CHART_MARGIN)
        elif key.endswith(".d"):
            params[name] = v / np.linalg.norm(v)
        elif key == "axes":
            params[name] = _orthogonalize_rows(v)
        elif key == "delta_l":
            light = lights_by_id[lid]
            params[name] = np.clip(v, -light.l_init + MIN_SURFEL_DEPTH, None)
    for lid, light in lights_by_id.items():
        if isinstance(light, WindowLight) and f"{lid}:x" in params:
            x, y = params[f"{lid}:x"], params[f"{lid}:y"]
            y2 = y - (y @ x) / (x @ x) * x
            n = np.linalg.norm(y2)
            if n <= 0:
                raise ValueError("window sides collapsed during refinement")
            params[f"{lid}:y"] = y2 * (np.linalg.norm(y) / n)
    return params


def _rebuild_light(light, values: dict):
    """A copy of `light` carrying the refined parameter values."""
    if isinstance(light, WindowLight):
        lobes = {}
        for lname, lobe in light.radiance.lobes():
            lobes[lname] = SGLobe(
                w=values[f"{lname}.w"],
                lam=float(values[f"{lname}.lam"]),
                d=values.get(f"{lname}.d", np.array(lobe.d, dtype=np.float64)),
            )
        radiance = WindowRadiance(sun=lobes["sun"], sky=lobes["sky"], ground=lobes["ground"])
        return dataclasses.replace(
            light, c=values["c"], x=values["x"], y=values["y"], radiance=radiance
        )
    if light.kind == "box_lamp":
        return dataclasses.replace(light, c=values["c"], axes=values["axes"], w=values["w"])
    if light.kind == "surfel_lamp":
        return dataclasses.replace(light, w=values["w"], delta_l=float(values["delta_l"]))
    raise TypeError(f"unsupported light type {type(light).__name__}")


def refine_lights(
    scene,
    input_image: np.ndarray = None,
    config: OptimConfig = None,
    unfreeze_sun_dir: bool = False,
    estimator: str = "mis",
    shadow_spp: int = 16,
    n_gather: int = 64,
    threads=None,
    progress=None,
):
    """Refine all enabled lights of `scene` against an LDR image.

    Returns (lights, history): a full replacement for scene.lights with the
    refined parameters swapped in (disabled lights pass through untouched)
    and the per-iteration loss values. input_image defaults to scene.image.
    Window sun directions stay fixed unless unfreeze_sun_dir is set.
    `progress`, when given, is called as progress(iteration, loss) after
    every loss evaluation, so long runs can report as they go.

    The default config raises the Adam learning rate to 1e-2: an Adam step
    moves each parameter by roughly lr, and typical corrections (an intensity
    off by a factor of a few) are unreachable at 1e-4 within the iteration
    budget. A caller-supplied config is honored verbatim.
    """
    lights = scene.enabled_lights()
    if not lights:
        raise ValueError("scene has no enabled lights to refine")
    image = scene.image if input_image is None else input_image
    if image is None:
        raise ValueError("no input image: pass input_image or set scene.image")
    image = np.asarray(image, dtype=np.float64)
    if image.shape != scene.shape + (3,):
        raise ValueError(f"input image shape {image.shape} does not match scene {scene.shape}")
    if not np.all(np.isfinite(image)) or image.min() < 0.0 or image.max() > 1.0:
        raise ValueError("input image must be finite and lie in [0, 1]")
    cfg = (config or OptimConfig(lr=1e-2)).validate()

    # geometry pass, frozen for the whole descent
    mesh = build_depth_mesh(scene)
    shadow_t = {}
    for light in lights:
        s = light_shadow(scene, mesh, light, spp=shadow_spp, seed=cfg.seed, threads=threads)
        shadow_t[light.light_id] = torch.tensor(s[..., None], dtype=torch.float64)
    gather = build_gather_plan(scene, mesh=mesh, n_gather=n_gather, seed=cfg.seed, threads=threads)
    plans = {
        l.light_id: render_plans(scene, l, cfg.spp, cfg.seed, estimator) for l in lights
    }

    params = {}
    for light in lights:
        for key, v in light_param_values(light).items():
            if key == "sun.d" and not unfreeze_sun_dir:
                continue  # bundle falls back to the light's stored direction
            params[f"{light.light_id}:{key}"] = _to_chart(key, v)
    lights_by_id = {l.light_id: l for l in lights}

    albedo_t = torch.tensor(scene.albedo, dtype=torch.float64)
    image_t = torch.tensor(image)
    # two phases, one optimizer instance each so bias correction stays aligned
    # with the iterations a group actually stepped
    adam_rad = Adam.from_config(cfg)
    adam_geo = Adam.from_config(cfg)
    tracker = DescentTracker(cfg)
    joint_phase = False

    def positional(name):
        return name.split(":", 1)[1] in POSITIONAL_KEYS

    for it in range(cfg.max_iters):
        if not cfg.frozen_sampling:
            plans = {
                l.light_id: render_plans(scene, l, cfg.spp, cfg.seed + it, estimator)
                for l in lights
            }
        leaves = {k: torch.tensor(v, requires_grad=True) for k, v in params.items()}
        e_direct = torch.zeros(scene.shape + (3,), dtype=torch.float64)
        for light in lights:
            lid = light.light_id
            overrides = {}
            for k, leaf in leaves.items():
                if not k.startswith(lid + ":"):
                    continue
                key = k.split(":", 1)[1]
                v = _from_chart(key, leaf)
                if key.endswith(".d"):
                    v = v / v.norm()
                overrides[key] = v
            e = render_direct_torch(scene, light, overrides, plans[lid], estimator)
            e_direct = e_direct + e * shadow_t[lid]
        e_total = e_direct + gather.apply_torch(e_direct, albedo_t)
        pre_clamp = e_total * albedo_t
        if it == 0 and bool((pre_clamp.detach() >= 1.0).all()):
            raise ValueError(
                "initial render is saturated at every pixel; the clamped loss has zero gradient"
            )
        loss = ((torch.clamp(pre_clamp, max=1.0) - image_t) ** 2).mean()
        loss.backward()
        if progress is not None:
            progress(it, float(loss.detach()))
        plateau = tracker.update(float(loss.detach()), dict(params))
        if plateau and joint_phase:
            break
        if plateau or (not joint_phase and it + 1 >= cfg.max_iters // 2):
            joint_phase = True
            tracker.reset_patience()

        grads = {}
        for k, leaf in leaves.items():
            g = leaf.grad
            if g is None:
                grads[k] = np.zeros_like(params[k])
                continue
            g = g.numpy()
            if not np.all(np.isfinite(g)):
                raise NonFiniteGradientError(k)
            grads[k] = g
        rad = {k: v for k, v in params.items() if not positional(k)}
        geo = {k: v for k, v in params.items() if positional(k)}
        stepped = adam_rad.step(rad, {k: grads[k] for k in rad})
        if joint_phase:
            stepped.update(adam_geo.step(geo, {k: grads[k] for k in geo}))
        else:
            stepped.update(geo)
        params = _project(stepped, lights_by_id)

    best = tracker.best_state
    refined = []
    for light in scene.lights:
        if not light.enabled:
            refined.append(light)
            continue
        values = dict(light_param_values(light))  # frozen entries keep their start values
        for key in list(values):
            name = f"{light.light_id}:{key}"
            if name in best:
                values[key] = np.asarray(_from_chart(key, best[name]))
        refined.append(_rebuild_light(light, values).validate())
    return refined, tracker.history
