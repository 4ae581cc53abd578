"""Direct irradiance estimators: area sampling, lobe sampling, and their
balance-heuristic combination.

The area strategy picks points uniformly on the light surface and weights by
the geometry term; the angular strategy importance-samples the window's sun
lobe and pays only the foreshortening cosine. Both evaluate the full window
radiance, so they estimate the same integral and can be combined per sample
with balance weights computed from the two solid-angle densities.

The cores are torch (float64) and differentiable in every light parameter;
the public functions wrap them for numpy scenes and parallelize over rows.
Each row's samples come from its own counter-based stream, so results are
byte-identical for any thread count.
"""

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import torch

from ..lightgeom import WindowLight
from ..scenecore import Scene
from ..sgmodel import sg_pdf, sg_sample
from .sampling import SurfacePlan, build_lobe_plan, build_surface_plan, light_bundle, _t

R_EPS = 1e-6  # receiver-to-sample distances below this are skipped
COS_Q_FLOOR = 1e-4  # clamp when converting an area density to solid angle


def resolve_threads(threads=None) -> int:
    if threads is None:
        threads = os.environ.get("LUMIEDIT_THREADS", "1")
    return max(1, int(threads))


def _geometry(points, normals, q, n_q):
    d = q - points[:, None, :]
    r2 = (d * d).sum(-1)
    valid = r2 > R_EPS * R_EPS
    r = torch.sqrt(torch.clip(r2, R_EPS * R_EPS, None))
    dirn = d / r[..., None]
    cos_p = (dirn * normals[:, None, :]).sum(-1)
    cos_q = -(dirn * n_q).sum(-1)
    return dirn, r2, cos_p, cos_q, valid


def _ray_rect(points, l, bundle):
    """Intersect rays (points, l) with the window rectangle.

    Returns (hit, t, cos_q) where cos_q is the emission cosine toward the
    receiver at the hit point (negative when the ray comes from behind).
    """
    n = bundle.normal
    denom = (l * n).sum(-1)
    small = denom.abs() < 1e-12
    safe = torch.where(small, torch.ones_like(denom), denom)
    t = ((bundle.c - points) * n).sum(-1) / safe
    hp = points + t[..., None] * l
    rel = hp - bundle.c
    alpha = (rel * bundle.x).sum(-1) / (bundle.x * bundle.x).sum()
    beta = (rel * bundle.y).sum(-1) / (bundle.y * bundle.y).sum()
    hit = (~small) & (t > 1e-9) & (alpha.abs() <= 0.5) & (beta.abs() <= 0.5)
    return hit, t, -denom


def area_estimate(points, normals, bundle, plan: SurfacePlan, mis=False):
    """Torch area-sampling estimator, (n, 3). With mis=True, applies the
    balance weight against the window's sun-lobe density."""
    q, n_q, a_over_p = bundle.surface_points(plan)
    dirn, r2, cos_p, cos_q, valid = _geometry(points, normals, q, n_q)
    # clamp each cosine separately: a receiver facing away must get exactly
    # zero even when the sample also faces away (the product would go positive)
    geo = torch.clip(cos_p, 0.0, None) * torch.clip(cos_q, 0.0, None) / r2
    weight = a_over_p * geo * valid
    if mis:
        w_sun, lam_sun, d_sun = bundle.sun()
        p_sun = sg_pdf(lam_sun, d_sun, dirn)
        p_area = r2 / (bundle.area() * torch.clip(cos_q, COS_Q_FLOOR, None))
        weight = weight * p_area / (p_area + p_sun)
    L = bundle.emitted(dirn)
    n_valid = torch.clip(valid.sum(-1), 1, None)
    return (L * weight[..., None]).sum(1) / n_valid[:, None]


def angular_estimate(points, normals, bundle, plan, mis=False):
    """Torch sun-lobe sampling estimator, (n, 3)."""
    w_sun, lam_sun, d_sun = bundle.sun()
    l = sg_sample(lam_sun, d_sun, _t(plan.u), _t(plan.v))
    pdf = sg_pdf(lam_sun, d_sun, l)
    hit, t, cos_q = _ray_rect(points[:, None, :], l, bundle)
    hit = hit & (cos_q > 0.0)  # back-side hits carry no energy, match area clamp
    cos_p = torch.clip((l * normals[:, None, :]).sum(-1), 0.0, None)
    weight = cos_p * hit / pdf
    if mis:
        p_area = t * t / (bundle.area() * torch.clip(cos_q, COS_Q_FLOOR, None))
        p_area = torch.where(hit, p_area, torch.zeros_like(p_area))
        weight = weight * pdf / (pdf + p_area)
    L = bundle.emitted(l)
    return (L * weight[..., None]).mean(1)


def mis_estimate(points, normals, bundle, area_plan, lobe_plan):
    """Balance-heuristic combination: spp area plus spp lobe samples."""
    return area_estimate(points, normals, bundle, area_plan, mis=True) + angular_estimate(
        points, normals, bundle, lobe_plan, mis=True
    )


# ---------------------------------------------------------------------------
# numpy-facing raster renderers


def _chunk_rows(height, spp, width):
    # aim for ~64k samples per task so threading overhead stays small
    rows_per = max(1, int(65536 / max(1, spp * width)))
    return [list(range(s, min(s + rows_per, height))) for s in range(0, height, rows_per)]


def _run_rows(scene, light, spp, seed, threads, eval_chunk):
    h, w = scene.shape
    out = np.zeros((h, w, 3))
    points = scene.points()
    normals = scene.normal
    chunks = _chunk_rows(h, spp, w)

    def work(rows):
        p = torch.tensor(points[rows].reshape(-1, 3), dtype=torch.float64)
        n = torch.tensor(normals[rows].reshape(-1, 3), dtype=torch.float64)
        with torch.no_grad():
            e = eval_chunk(rows, p, n)
        out[rows] = e.numpy().reshape(len(rows), w, 3)

    n_threads = resolve_threads(threads)
    if n_threads == 1 or len(chunks) == 1:
        for rows in chunks:
            work(rows)
    else:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            list(pool.map(work, chunks))
    return out


def direct_area(scene: Scene, light, spp=64, seed=0, threads=None) -> np.ndarray:
    """Monte Carlo direct irradiance from one light via uniform surface samples."""
    bundle = light_bundle(light)

    def eval_chunk(rows, p, n):
        plan = build_surface_plan(light, rows, scene.camera.width, spp, seed)
        return area_estimate(p, n, bundle, plan)

    return _run_rows(scene, light, spp, seed, threads, eval_chunk)


def direct_angular(scene: Scene, light, spp=64, seed=0, threads=None) -> np.ndarray:
    """Direct irradiance from a window by sampling its sun lobe."""
    if not isinstance(light, WindowLight):
        raise TypeError("angular sampling is defined for windows only")
    bundle = light_bundle(light)

    def eval_chunk(rows, p, n):
        plan = build_lobe_plan(light, rows, scene.camera.width, spp, seed)
        return angular_estimate(p, n, bundle, plan)

    return _run_rows(scene, light, spp, seed, threads, eval_chunk)


def sun_carries_energy(light) -> bool:
    """Whether the window's sun lobe has any intensity to importance-sample.

    With w_sun exactly zero the sun-targeted strategy tracks a component that
    is absent from the integrand; its samples only add crossover noise where
    the two densities are comparable, which the smooth ambient integrand
    cannot absorb. Allocating it zero samples (the N-weighted balance
    heuristic then degenerates to pure area sampling) keeps MIS within a
    hair of the better single strategy on both extremes.
    """
    return isinstance(light, WindowLight) and bool(np.any(np.asarray(light.radiance.sun.w) > 0))


def direct_mis(scene: Scene, light, spp=64, seed=0, threads=None) -> np.ndarray:
    """Combined estimator: spp area samples + spp sun-lobe samples per pixel.

    Lamps have no angular strategy and fall through to plain area sampling,
    as do windows whose sun lobe carries no energy (see sun_carries_energy).
    """
    if not sun_carries_energy(light):
        return direct_area(scene, light, spp=spp, seed=seed, threads=threads)
    bundle = light_bundle(light)

    def eval_chunk(rows, p, n):
        ap = build_surface_plan(light, rows, scene.camera.width, spp, seed)
        lp = build_lobe_plan(light, rows, scene.camera.width, spp, seed)
        return mis_estimate(p, n, bundle, ap, lp)

    return _run_rows(scene, light, spp, seed, threads, eval_chunk)
