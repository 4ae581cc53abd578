"""Light sampling plans and torch-native light bundles.

A plan freezes every stochastic choice of one estimator evaluation: the
uniforms that place points on a light's surface and the discrete face or
surfel picks, with the selection probabilities they were drawn under. The
estimators then re-weight by area(selected, theta) / p(selected, plan), so
the same plan stays unbiased while light parameters move. This is also what
makes pathwise gradients line up with finite differences: both sides of the
difference quotient reuse one plan.

Bundles mirror the lightgeom types as torch tensors. Plain rendering builds
them from the light's stored values; the optimizers pass overrides computed
from leaf tensors.
"""

from dataclasses import dataclass

import numpy as np
import torch

from ..lightgeom import (
    BoxLamp,
    SurfelLamp,
    WindowLight,
    alias_sample,
    alias_table,
    assemble_surfels,
)
from ..sgmodel import sg_eval
from . import rng


def _t(x, dtype=torch.float64):
    if torch.is_tensor(x):
        return x
    return torch.tensor(np.asarray(x, dtype=np.float64), dtype=dtype)


@dataclass
class SurfacePlan:
    """Frozen draw for one area-sampling pass: (n_px, spp) each."""

    u: np.ndarray
    v: np.ndarray
    sel_idx: np.ndarray = None  # face / surfel index, None for windows
    sel_p: np.ndarray = None  # probability the index was drawn with


@dataclass
class LobePlan:
    """Frozen draw for one angular-sampling pass."""

    u: np.ndarray
    v: np.ndarray


def build_surface_plan(light, rows, width, spp, seed, purpose="area") -> SurfacePlan:
    """Per-row keyed uniforms plus frozen discrete picks for the given light."""
    n_rows = len(rows)
    uvw = np.empty((n_rows * width, spp, 3))
    for k, r in enumerate(rows):
        uvw[k * width : (k + 1) * width] = rng.uniforms(
            (width, spp, 3), *rng.row_tags(seed, light.light_id, purpose, r)
        )
    return plan_from_uniforms(light, uvw)


def plan_from_uniforms(light, uvw) -> SurfacePlan:
    """Surface plan from raw uniforms (..., 3); lets callers share one stream
    across lights, e.g. for common-random-number geometry comparisons."""
    u = uvw[..., 0] * 2.0 - 1.0
    v = uvw[..., 1] * 2.0 - 1.0
    sel = uvw[..., 2]
    if isinstance(light, WindowLight):
        return SurfacePlan(u, v)
    if isinstance(light, BoxLamp):
        areas = light.face_areas()
        p = areas / areas.sum()
        cdf = np.cumsum(p)
        idx = np.searchsorted(cdf, np.clip(sel, 0, np.nextafter(1.0, 0.0)), side="right")
        return SurfacePlan(u, v, idx, p[idx])
    if isinstance(light, SurfelLamp):
        s = light.surfels()
        areas = s.area
        prob, alias = alias_table(areas)
        idx = alias_sample(prob, alias, sel.ravel()).reshape(sel.shape)
        p = areas[idx] / areas.sum()
        return SurfacePlan(u, v, idx, p)
    raise TypeError(f"unsupported light type {type(light).__name__}")


def build_lobe_plan(light, rows, width, spp, seed, purpose="angular") -> LobePlan:
    n_rows = len(rows)
    uv = np.empty((n_rows * width, spp, 2))
    for k, r in enumerate(rows):
        uv[k * width : (k + 1) * width] = rng.uniforms(
            (width, spp, 2), *rng.row_tags(seed, light.light_id, purpose, r)
        )
    return LobePlan(uv[..., 0] * 2.0 - 1.0, uv[..., 1] * 2.0 - 1.0)


class WindowBundle:
    kind = "window"

    def __init__(self, light: WindowLight, overrides=None):
        o = overrides or {}
        self.c = _t(o.get("c", light.c))
        self.x = _t(o.get("x", light.x))
        self.y = _t(o.get("y", light.y))
        self.lobes = []
        for name, lobe in light.radiance.lobes():
            self.lobes.append(
                (
                    name,
                    _t(o.get(f"{name}.w", lobe.w)),
                    _t(o.get(f"{name}.lam", lobe.lam)),
                    _t(o.get(f"{name}.d", lobe.d)),
                )
            )

    @property
    def normal(self):
        n = torch.linalg.cross(self.x, self.y)
        return n / n.norm()

    def area(self):
        return self.x.norm() * self.y.norm()

    def sun(self):
        name, w, lam, d = self.lobes[0]
        return w, lam, d / d.norm()

    def surface_points(self, plan: SurfacePlan):
        u = _t(plan.u)[..., None]
        v = _t(plan.v)[..., None]
        q = self.c + 0.5 * u * self.x + 0.5 * v * self.y
        n = self.normal.expand(q.shape)
        # whole rectangle selected with probability 1
        a_over_p = self.area().expand(q.shape[:-1])
        return q, n, a_over_p

    def emitted(self, dirs):
        """Radiance toward the receiver; dirs point receiver -> window."""
        out = 0.0
        for _, w, lam, d in self.lobes:
            out = out + sg_eval(w, lam, d / d.norm(), dirs)
        return out


class LambertianBundle:
    """Shared machinery for box and surfel lamps (constant emitted radiance)."""

    def emitted(self, dirs):
        shape = dirs.shape[:-1] + (3,)
        return self.w.expand(shape)


class BoxBundle(LambertianBundle):
    kind = "box_lamp"

    def __init__(self, light: BoxLamp, overrides=None):
        o = overrides or {}
        self.c = _t(o.get("c", light.c))
        self.axes = _t(o.get("axes", light.axes))
        self.w = _t(o.get("w", light.w))

    def face_areas(self):
        ls = self.axes.norm(dim=1)
        return torch.stack(
            [ls[1] * ls[2], ls[1] * ls[2], ls[0] * ls[2], ls[0] * ls[2], ls[0] * ls[1], ls[0] * ls[1]]
        )

    def area(self):
        return self.face_areas().sum()

    def surface_points(self, plan: SurfacePlan):
        from ..lightgeom import _box_face_points

        shape = plan.u.shape
        face = plan.sel_idx.ravel()
        q, n = _box_face_points(self.c, self.axes, face, _t(plan.u).ravel(), _t(plan.v).ravel())
        a_sel = self.face_areas()[face]
        a_over_p = a_sel / _t(plan.sel_p).ravel()
        return q.reshape(shape + (3,)), n.reshape(shape + (3,)), a_over_p.reshape(shape)


class SurfelBundle(LambertianBundle):
    kind = "surfel_lamp"

    def __init__(self, light: SurfelLamp, overrides=None):
        o = overrides or {}
        self.w = _t(o.get("w", light.w))
        d_init = _t(light.d_init)
        delta_l = o.get("delta_l", None)
        if delta_l is None:
            c = _t(light.c)
        else:
            c = d_init * (light.l_init + delta_l)
        self.c = c
        self.surfels = assemble_surfels(
            _t(light.q_vis),
            _t(light.n_vis),
            _t(light.a_vis),
            light.edge_index,
            _t(light.edge_side),
            c,
            point_reflection=light.point_reflection,
        )

    def area(self):
        return self.surfels.area.sum()

    def surface_points(self, plan: SurfacePlan):
        shape = plan.u.shape
        s = self.surfels
        idx = plan.sel_idx.ravel()
        q = s.q[idx] + _t(plan.u).ravel()[:, None] * s.t1[idx] + _t(plan.v).ravel()[:, None] * s.t2[idx]
        n = s.normal[idx]
        a_over_p = s.area[idx] / _t(plan.sel_p).ravel()
        return q.reshape(shape + (3,)), n.reshape(shape + (3,)), a_over_p.reshape(shape)


def light_bundle(light, overrides=None):
    if isinstance(light, WindowLight):
        return WindowBundle(light, overrides)
    if isinstance(light, BoxLamp):
        return BoxBundle(light, overrides)
    if isinstance(light, SurfelLamp):
        return SurfelBundle(light, overrides)
    raise TypeError(f"unsupported light type {type(light).__name__}")
