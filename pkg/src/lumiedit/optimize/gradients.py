"""Pathwise gradients of Monte Carlo renders with respect to light parameters.

A gradient evaluation freezes the sample plans (the same uniforms an
estimator would draw for the given seed) and differentiates through surface
placement, the SG inverse CDF, geometry terms, and estimator weights. Frozen
plans make the loss a deterministic function of the parameters, which is what
lets central finite differences certify the autograd path.
"""

import numpy as np
import torch

from ..lightgeom import WindowLight
from ..render.direct import angular_estimate, area_estimate, mis_estimate, sun_carries_energy
from ..render.sampling import build_lobe_plan, build_surface_plan, light_bundle

PARAM_KEYS = {
    "window": ["c", "x", "y"]
    + [f"{lobe}.{f}" for lobe in ("sun", "sky", "ground") for f in ("w", "lam", "d")],
    "box_lamp": ["c", "axes", "w"],
    "surfel_lamp": ["w", "delta_l"],
}


class NonFiniteGradientError(RuntimeError):
    def __init__(self, param):
        super().__init__(f"gradient of parameter {param!r} is not finite")
        self.param = param


def light_param_values(light) -> dict:
    """Continuous parameters of a light as a name -> numpy array dict.

    Names double as bundle override keys, so a dict of torch leaves with
    these names parameterizes the differentiable render directly.
    """
    if isinstance(light, WindowLight):
        out = {"c": light.c, "x": light.x, "y": light.y}
        for name, lobe in light.radiance.lobes():
            out[f"{name}.w"] = lobe.w
            out[f"{name}.lam"] = lobe.lam
            out[f"{name}.d"] = lobe.d
        return {k: np.array(v, dtype=np.float64) for k, v in out.items()}
    if light.kind == "box_lamp":
        return {
            "c": np.array(light.c, dtype=np.float64),
            "axes": np.array(light.axes, dtype=np.float64),
            "w": np.array(light.w, dtype=np.float64),
        }
    if light.kind == "surfel_lamp":
        return {
            "w": np.array(light.w, dtype=np.float64),
            "delta_l": np.array(light.delta_l, dtype=np.float64),
        }
    raise TypeError(f"unsupported light type {type(light).__name__}")


def grad(params: dict, loss_fn, config=None) -> dict:
    """Gradient of loss_fn with respect to every entry of params.

    params: name -> numpy array. loss_fn receives the matching dict of torch
    leaf tensors and returns a scalar tensor. Parameters that the loss never
    touches get zero gradients; non-finite gradients raise, naming the entry.
    """
    leaves = {
        k: torch.tensor(np.asarray(v, dtype=np.float64), requires_grad=True)
        for k, v in params.items()
    }
    loss = loss_fn(leaves)
    loss.backward()
    out = {}
    for k, leaf in leaves.items():
        g = leaf.grad
        if g is None:
            out[k] = np.zeros_like(np.asarray(params[k], dtype=np.float64))
            continue
        g = g.numpy().copy()
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(k)
        out[k] = g
    return out


def flatten(d: dict, order=None):
    """(vector, order) for a named dict; order fixes the concatenation."""
    order = order or sorted(d)
    return np.concatenate([np.asarray(d[k], dtype=np.float64).ravel() for k in order]), order


def render_plans(scene, light, spp, seed, estimator="mis"):
    """Frozen full-raster sample plans for one estimator evaluation.

    Under "mis" the lobe plan exists only when the sun lobe carries energy
    (zero-sun windows get pure area sampling); the decision reads the
    light's stored radiance, never the overrides, so the plan structure is
    fixed for a whole descent.
    """
    h, w = scene.shape
    rows = list(range(h))
    plans = {}
    if estimator in ("area", "mis") or not isinstance(light, WindowLight):
        plans["area"] = build_surface_plan(light, rows, w, spp, seed)
    if (estimator == "angular" and isinstance(light, WindowLight)) or (
        estimator == "mis" and sun_carries_energy(light)
    ):
        plans["lobe"] = build_lobe_plan(light, rows, w, spp, seed)
    return plans


def render_direct_torch(scene, light, overrides, plans, estimator="mis") -> torch.Tensor:
    """Differentiable direct-shading raster (h, w, 3) under frozen plans."""
    h, w = scene.shape
    p = torch.tensor(scene.points().reshape(-1, 3), dtype=torch.float64)
    n = torch.tensor(scene.normal.reshape(-1, 3), dtype=torch.float64)
    bundle = light_bundle(light, overrides)
    if not isinstance(light, WindowLight):
        e = area_estimate(p, n, bundle, plans["area"])
    elif estimator == "area":
        e = area_estimate(p, n, bundle, plans["area"])
    elif estimator == "angular":
        e = angular_estimate(p, n, bundle, plans["lobe"])
    elif estimator == "mis":
        if "lobe" in plans:
            e = mis_estimate(p, n, bundle, plans["area"], plans["lobe"])
        else:  # zero-sun window: allocation degenerated to area-only
            e = area_estimate(p, n, bundle, plans["area"])
    else:
        raise ValueError(f"unknown estimator {estimator!r}")
    return e.reshape(h, w, 3)


def direct_l1_loss_fn(scene, light, target, spp=64, seed=0, estimator="mis"):
    """loss_fn for grad(): L1 between the frozen-plan render and target."""
    plans = render_plans(scene, light, spp, seed, estimator)
    t = torch.tensor(np.asarray(target, dtype=np.float64))

    def fn(leaves):
        e = render_direct_torch(scene, light, leaves, plans, estimator)
        return (e - t).abs().mean()

    return fn
