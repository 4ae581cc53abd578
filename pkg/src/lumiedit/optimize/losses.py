"""Loss functions for light fitting and refinement.

Everything here is numpy and deterministic; the differentiable paths used
inside the optimization loops re-state the same formulas in torch where
needed, and the tests hold the two accountable to each other.
"""

from dataclasses import dataclass

import numpy as np
import torch
from scipy.spatial import cKDTree

from ..lightgeom import WindowRadiance
from ..render import rng
from ..render.sampling import light_bundle, plan_from_uniforms

SIG_EPS = 1e-6  # gradient-pair denominators below this contribute nothing
SIG_SHIFTS = (1, 2, 4, 8)


@dataclass
class LossWeights:
    """Per-term weights for the source and geometry losses."""

    w_sun: float = 1.0
    w_sky: float = 0.2
    w_grd: float = 0.2
    w_w: float = 0.001
    w_d: float = 1.0
    w_lam: float = 0.001
    w_a: float = 0.8
    w_r: float = 0.01

    def validate(self):
        for name, val in self.__dict__.items():
            if not (np.isfinite(val) and val >= 0):
                raise ValueError(f"loss weight {name} must be a non-negative number")
        return self

    def lobe_weight(self, name):
        return {"sun": self.w_sun, "sky": self.w_sky, "ground": self.w_grd}[name]


def loss_render_direct(e, e_ref) -> float:
    """Mean absolute difference between two shading rasters."""
    e = np.asarray(e, dtype=np.float64)
    e_ref = np.asarray(e_ref, dtype=np.float64)
    if e.shape != e_ref.shape:
        raise ValueError(f"raster shapes differ: {e.shape} vs {e_ref.shape}")
    return float(np.mean(np.abs(e - e_ref)))


def chamfer_rmse(p, q) -> float:
    """Mean of the two directed root-mean-squared nearest-neighbor distances."""
    p = np.atleast_2d(np.asarray(p, dtype=np.float64))
    q = np.atleast_2d(np.asarray(q, dtype=np.float64))
    if p.size == 0 or q.size == 0:
        raise ValueError("chamfer distance needs two non-empty point sets")
    d_pq = cKDTree(q).query(p)[0]
    d_qp = cKDTree(p).query(q)[0]
    return 0.5 * (float(np.sqrt(np.mean(d_pq**2))) + float(np.sqrt(np.mean(d_qp**2))))


def surface_point_cloud(light, n=2048, seed=0, uvw=None) -> np.ndarray:
    """Uniform area-weighted samples of the light surface, (n, 3) numpy."""
    if uvw is None:
        uvw = rng.uniforms((1, n, 3), *rng.row_tags(seed, light.light_id, "geo", 0))
    plan = plan_from_uniforms(light, uvw)
    with torch.no_grad():
        pts = light_bundle(light).surface_points(plan)[0]
    return pts.numpy().reshape(-1, 3)


def total_area(light) -> float:
    with torch.no_grad():
        return float(light_bundle(light).area())


def loss_geo_terms(light, light_gt, weights: LossWeights = None, n_points=2048, seed=0):
    """(chamfer term, weighted area term). Both lights are sampled with one
    shared uniform stream, so identical geometry compares at exactly zero."""
    if light.kind != light_gt.kind:
        raise TypeError(f"cannot compare {light.kind} against {light_gt.kind}")
    weights = weights or LossWeights()
    uvw = rng.uniforms((1, n_points, 3), *rng.row_tags(seed, "loss_geo", "geo", 0))
    cloud = surface_point_cloud(light, uvw=uvw)
    cloud_gt = surface_point_cloud(light_gt, uvw=uvw)
    cham = chamfer_rmse(cloud, cloud_gt)
    area_term = weights.w_a * abs(total_area(light) - total_area(light_gt))
    return cham, area_term


def loss_geo(light, light_gt, weights: LossWeights = None, n_points=2048, seed=0) -> float:
    cham, area_term = loss_geo_terms(light, light_gt, weights, n_points, seed)
    return cham + area_term


def loss_src(radiance: WindowRadiance, radiance_gt: WindowRadiance, weights: LossWeights = None) -> float:
    """Weighted log-intensity / direction / log-bandwidth distance per lobe."""
    weights = weights or LossWeights()
    total = 0.0
    for (name, a), (_, b) in zip(radiance.lobes(), radiance_gt.lobes()):
        dw = np.log1p(np.asarray(a.w, dtype=np.float64)) - np.log1p(np.asarray(b.w, dtype=np.float64))
        dd = np.asarray(a.d, dtype=np.float64) - np.asarray(b.d, dtype=np.float64)
        dl = np.log1p(float(a.lam)) - np.log1p(float(b.lam))
        total += weights.lobe_weight(name) * (
            weights.w_w * float(dw @ dw) + weights.w_d * float(dd @ dd) + weights.w_lam * dl * dl
        )
    return total


def _sig_pairs(s, h, axis):
    lead = np.take(s, range(h, s.shape[axis]), axis=axis)
    base = np.take(s, range(0, s.shape[axis] - h), axis=axis)
    denom = np.abs(lead + base)
    ok = denom >= SIG_EPS
    g = np.where(ok, (lead - base) / np.where(ok, denom, 1.0), 0.0)
    return g, ok


def sig_loss(s, s_ref) -> float:
    """Scale-invariant gradient loss: squared differences of normalized
    finite-difference pairs at shifts 1, 2, 4, 8; a pair drops out when
    either raster's denominator at that pixel is below 1e-6."""
    s = np.asarray(s, dtype=np.float64)
    s_ref = np.asarray(s_ref, dtype=np.float64)
    if s.shape != s_ref.shape:
        raise ValueError(f"raster shapes differ: {s.shape} vs {s_ref.shape}")
    total = 0.0
    for h in SIG_SHIFTS:
        for axis in (0, 1):
            g_a, ok_a = _sig_pairs(s, h, axis)
            g_b, ok_b = _sig_pairs(s_ref, h, axis)
            ok = ok_a & ok_b
            diff = np.where(ok, g_a - g_b, 0.0)
            total += float(np.sum(diff * diff))
    return total
