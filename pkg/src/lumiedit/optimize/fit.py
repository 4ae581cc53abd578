"""Ground-truth window radiance fitting.

Recovers the three-lobe window radiance from an unshadowed direct-shading
raster by L1 descent. The sun direction stays fixed to the caller's hint;
sky and ground directions start at +y / -y and move on the sphere. Intensity
and bandwidth are optimized in their normalized tan charts, which keeps every
iterate inside the per-lobe bandwidth clamps by construction.
"""

import numpy as np
import torch

from ..lightgeom import (
    SGLobe,
    WindowLight,
    WindowRadiance,
    bandwidth_map,
    intensity_map,
)
from .adam import Adam, DescentTracker, OptimConfig
from .gradients import NonFiniteGradientError, render_direct_torch, render_plans

CHART_MARGIN = 1e-6  # keep chart coordinates strictly inside (0, 1)
INIT_W_TILDE = 0.3
INIT_LAM_TILDE = 0.5
INIT_DIRS = {"sky": (0.0, 1.0, 0.0), "ground": (0.0, -1.0, 0.0)}


def _chart_params(sun_dir_hint):
    params = {}
    for name in ("sun", "sky", "ground"):
        params[f"{name}.wt"] = np.full(3, INIT_W_TILDE)
        params[f"{name}.lt"] = np.array(INIT_LAM_TILDE)
    for name, d in INIT_DIRS.items():
        params[f"{name}.d"] = np.array(d)
    params["sun.d"] = np.asarray(sun_dir_hint, dtype=np.float64)
    return params


def _overrides(leaves, sun_fixed):
    """Bundle overrides from chart-space leaves; sun direction not a leaf."""
    o = {}
    for name in ("sun", "sky", "ground"):
        o[f"{name}.w"] = intensity_map(leaves[f"{name}.wt"])
        o[f"{name}.lam"] = bandwidth_map(leaves[f"{name}.lt"], name)
        if name == "sun":
            o["sun.d"] = sun_fixed
        else:
            d = leaves[f"{name}.d"]
            o[f"{name}.d"] = d / d.norm()
    return o


def _project(params):
    for k, v in params.items():
        if k.endswith(".wt") or k.endswith(".lt"):
            params[k] = np.clip(v, CHART_MARGIN, 1.0 - CHART_MARGIN)
        elif k.endswith(".d"):
            params[k] = v / np.linalg.norm(v)
    return params


def _radiance_from(params) -> WindowRadiance:
    lobes = {}
    for name in ("sun", "sky", "ground"):
        w = intensity_map(params[f"{name}.wt"])
        lam = float(bandwidth_map(params[f"{name}.lt"], name))
        d = params["sun.d"] if name == "sun" else params[f"{name}.d"]
        lobes[name] = SGLobe(w=w, lam=lam, d=np.asarray(d) / np.linalg.norm(d))
    return WindowRadiance(sun=lobes["sun"], sky=lobes["sky"], ground=lobes["ground"])


def fit_window(
    scene,
    target_e: np.ndarray,
    window: WindowLight,
    sun_dir_hint,
    config: OptimConfig = None,
):
    """Fit (sun, sky, ground) SGs so the unshadowed direct shading of
    `window` matches target_e in mean L1. Returns (radiance, loss history).

    The default config overrides the Adam learning rate to 1e-2: the tan
    charts span their whole range within a unit interval, and the 1e-4
    network-training rate cannot cross it in a bounded iteration budget.
    """
    target_e = np.asarray(target_e, dtype=np.float64)
    if np.any(target_e < 0) or not np.all(np.isfinite(target_e)):
        raise ValueError("target shading must be finite and non-negative")
    cfg = (config or OptimConfig(lr=1e-2)).validate()

    params = _chart_params(sun_dir_hint)
    sun_fixed = torch.tensor(params.pop("sun.d"), dtype=torch.float64)
    sun_fixed = sun_fixed / sun_fixed.norm()
    target_t = torch.tensor(target_e)
    adam = Adam.from_config(cfg)

    plans = render_plans(scene, window, cfg.spp, cfg.seed, "mis")
    tracker = DescentTracker(cfg)
    for it in range(cfg.max_iters):
        if not cfg.frozen_sampling:
            plans = render_plans(scene, window, cfg.spp, cfg.seed + it, "mis")
        leaves = {k: torch.tensor(v, requires_grad=True) for k, v in params.items()}
        e = render_direct_torch(scene, window, _overrides(leaves, sun_fixed), plans, "mis")
        loss = (e - target_t).abs().mean()
        loss.backward()
        if tracker.update(float(loss.detach()), dict(params)):
            break

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
        params = _project(adam.step(params, grads))

    best_params = tracker.best_state
    best_params["sun.d"] = sun_fixed.numpy()
    radiance = _radiance_from(best_params).validate()
    return radiance, tracker.history
