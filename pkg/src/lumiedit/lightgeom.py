"""Light source geometry: windows, box lamps, and surfel lamps.

All lights share one sampling contract: uniform over their surface area,
driven by caller-supplied uniforms so estimators stay reproducible. The
parameter charts (tan intensity map, clamped tan bandwidth map) and the
geometric constructions (mirrored surfel sets for visible lamps, frustum
centers for invisible ones) accept numpy arrays or torch tensors; the torch
path is what makes light parameters optimizable end to end.
"""

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

from ._backend import cross, dot, get_xp, normalize
from .scenecore import CameraIntrinsics, Scene, pixel_footprint_area, unproject
from .sgmodel import lobe_frame, sg_eval

HALF_PI = np.pi / 2.0

# per-lobe (low, high) of the normalized bandwidth interval; tan(pi/2 * t)
# then yields lam in [tan(pi/2 lo), tan(pi/2 hi))
LAMBDA_CLAMPS = {
    "sun": (0.9, 1.0 - 1e-6),
    "sky": (0.0, 1.0 - 1e-4),
    "ground": (0.0, 1.0 - 1e-4),
}

LOBE_NAMES = ("sun", "sky", "ground")

UP = np.array([0.0, 1.0, 0.0])


class LightError(Exception):
    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


# ---------------------------------------------------------------------------
# parameter charts


def intensity_map(w_tilde):
    """Map normalized intensity in [0, 1) to [0, inf): w = tan(pi/2 w~)."""
    xp = get_xp(w_tilde)
    return xp.tan(HALF_PI * w_tilde)


def intensity_unmap(w):
    xp = get_xp(w)
    return xp.arctan(w) / HALF_PI


def bandwidth_map(lam_tilde, lobe):
    """Map normalized bandwidth in [0, 1] into the lobe's clamped tan chart."""
    lo, hi = LAMBDA_CLAMPS[lobe]
    xp = get_xp(lam_tilde)
    t = xp.clip(lam_tilde, 0.0, 1.0) * (hi - lo) + lo
    return xp.tan(HALF_PI * t)


def bandwidth_unmap(lam, lobe):
    lo, hi = LAMBDA_CLAMPS[lobe]
    xp = get_xp(lam)
    t = xp.arctan(lam) / HALF_PI
    return (t - lo) / (hi - lo)


def frustum_center(theta_c, phi_c, l_c):
    """Center for a light outside the view, at distance l_c from the camera.

    theta_c in [0, pi - f] is measured from +z (which points away from the
    viewing direction), so any theta_c in range keeps the point outside the
    camera frustum of field of view f.
    """
    xp = get_xp(theta_c, phi_c, l_c)
    st = xp.sin(theta_c)
    d_c = xp.stack([st * xp.cos(phi_c), st * xp.sin(phi_c), xp.cos(theta_c)], -1)
    return d_c * l_c


def window_axes(y_tilde, z, l_x, l_y):
    """Side vectors of a window rectangle from the predicted-axis chart.

    y blends the free vector y_tilde with world up before normalization;
    x completes the frame orthogonally to both z and y. z sets which side
    of the rectangle the normal (unit x cross y) faces.
    """
    xp = get_xp(y_tilde, z)
    if xp is np:
        up = UP
    else:
        import torch

        up = torch.tensor(UP, dtype=y_tilde.dtype)
    y = normalize(xp, y_tilde + up) * l_y
    x = normalize(xp, cross(xp, z, y)) * l_x
    return x, y


# ---------------------------------------------------------------------------
# spherical gaussian lobe containers


@dataclass
class SGLobe:
    w: np.ndarray  # (3,) rgb amplitude
    lam: float
    d: np.ndarray  # (3,) unit axis

    def validate(self, name):
        w = np.asarray(self.w, dtype=np.float64)
        if w.shape != (3,) or np.any(w < 0) or not np.all(np.isfinite(w)):
            raise LightError(f"lobe {name}: w must be 3 finite non-negatives", field=f"{name}.w")
        if not np.isfinite(self.lam) or self.lam <= 0:
            raise LightError(f"lobe {name}: lam must be positive", field=f"{name}.lam")
        d = np.asarray(self.d, dtype=np.float64)
        if d.shape != (3,) or abs(np.linalg.norm(d) - 1.0) > 1e-4:
            raise LightError(f"lobe {name}: d must be unit length", field=f"{name}.d")

    def to_dict(self):
        return {"w": list(map(float, self.w)), "lam": float(self.lam), "d": list(map(float, self.d))}

    @staticmethod
    def from_dict(d):
        return SGLobe(np.asarray(d["w"], dtype=np.float64), float(d["lam"]), np.asarray(d["d"], dtype=np.float64))


@dataclass
class WindowRadiance:
    """Three-lobe directional model: a sharp sun plus broad sky and ground."""

    sun: SGLobe
    sky: SGLobe
    ground: SGLobe

    def lobes(self):
        return [("sun", self.sun), ("sky", self.sky), ("ground", self.ground)]

    def eval(self, dirs):
        """Total radiance along unit direction(s) pointing from the room out."""
        out = 0.0
        for _, lobe in self.lobes():
            out = out + sg_eval(lobe.w, lobe.lam, lobe.d, dirs)
        return out

    def validate(self):
        for name, lobe in self.lobes():
            lobe.validate(name)
            lo, hi = LAMBDA_CLAMPS[name]
            lam_lo = np.tan(HALF_PI * lo)
            if lobe.lam < lam_lo * (1 - 1e-9):
                raise LightError(
                    f"lobe {name}: lam {lobe.lam:.3g} below chart minimum {lam_lo:.3g}",
                    field=f"{name}.lam",
                )
        return self

    def to_dict(self):
        return {name: lobe.to_dict() for name, lobe in self.lobes()}

    @staticmethod
    def from_dict(d):
        return WindowRadiance(*[SGLobe.from_dict(d[n]) for n in LOBE_NAMES])


# ---------------------------------------------------------------------------
# mask morphology and initial placement


def edge_mask(mask: np.ndarray, n: int) -> np.ndarray:
    """Ring of pixels around (n >= 1) or just inside (n = -1) a binary mask."""
    m = mask > 0.5
    if n == -1:
        inner = ndimage.binary_erosion(m, iterations=1)
        return (m & ~inner).astype(np.float64)
    if n >= 1:
        outer = ndimage.binary_dilation(m, iterations=n)
        return (outer & ~m).astype(np.float64)
    raise ValueError("edge width must be -1 or a positive dilation count")


@dataclass
class InitialCenter:
    c: np.ndarray
    used_fallback: bool


def initial_center(scene: Scene, mask: np.ndarray, kind: str) -> InitialCenter:
    """Seed position for a visible light: mean pixel ray times a depth estimate.

    Windows average depth over a 7-pixel ring outside the mask (the glass
    itself has unreliable depth); lamps average over their own pixels. An
    empty ring falls back to mask-interior depth and flags it.
    """
    m = mask > 0.5
    if not m.any():
        raise LightError("mask has no pixels", field="mask")
    rays = scene.camera.pixel_rays()
    mean_ray = rays[m].mean(axis=0)
    used_fallback = False
    if kind == "window":
        ring = edge_mask(mask, 7) > 0.5
        if ring.any():
            depth = scene.depth[ring].mean()
        else:
            depth = scene.depth[m].mean()
            used_fallback = True
    elif kind == "lamp":
        depth = scene.depth[m].mean()
    else:
        raise ValueError(f"unknown light kind {kind!r}")
    return InitialCenter(mean_ray * depth, used_fallback)


# ---------------------------------------------------------------------------
# alias table (O(1) discrete sampling by area)


def alias_table(weights: np.ndarray):
    """Walker alias method: returns (prob, alias) arrays for O(1) sampling."""
    w = np.asarray(weights, dtype=np.float64)
    if np.any(w < 0) or w.sum() <= 0:
        raise ValueError("alias_table needs non-negative weights with positive sum")
    n = w.size
    p = w * (n / w.sum())
    prob = np.ones(n)
    alias = np.arange(n)
    small = [i for i in range(n) if p[i] < 1.0]
    large = [i for i in range(n) if p[i] >= 1.0]
    while small and large:
        s = small.pop()
        l = large.pop()
        prob[s] = p[s]
        alias[s] = l
        p[l] = p[l] - (1.0 - p[s])
        (small if p[l] < 1.0 else large).append(l)
    return prob, alias


def alias_sample(prob: np.ndarray, alias: np.ndarray, sel: np.ndarray) -> np.ndarray:
    """Map uniforms in [0,1) to indices distributed by the table's weights."""
    n = prob.size
    x = np.clip(sel, 0.0, np.nextafter(1.0, 0.0)) * n
    idx = x.astype(np.int64)
    frac = x - idx
    return np.where(frac < prob[idx], idx, alias[idx])


# ---------------------------------------------------------------------------
# light types


@dataclass
class SurfaceSamples:
    q: np.ndarray  # (n, 3) positions
    normal: np.ndarray  # (n, 3)
    pdf: np.ndarray  # (n,) area-measure density (1 / total area)


@dataclass
class WindowLight:
    light_id: str
    c: np.ndarray  # (3,) rectangle center
    x: np.ndarray  # (3,) full side vector
    y: np.ndarray  # (3,) full side vector, orthogonal to x
    radiance: WindowRadiance
    enabled: bool = True
    mask_id: str = None

    kind = "window"
    visible = True

    @property
    def normal(self):
        n = np.cross(self.x, self.y)
        return n / np.linalg.norm(n)

    def area(self):
        return float(np.linalg.norm(self.x) * np.linalg.norm(self.y))

    def validate(self):
        for nm in ("c", "x", "y"):
            v = np.asarray(getattr(self, nm), dtype=np.float64)
            if v.shape != (3,) or not np.all(np.isfinite(v)):
                raise LightError(f"window {nm} must be a finite 3-vector", field=nm)
        nx, ny = np.linalg.norm(self.x), np.linalg.norm(self.y)
        if nx <= 0 or ny <= 0:
            raise LightError("window sides must have positive length", field="x")
        if abs(float(np.dot(self.x, self.y))) > 1e-4 * nx * ny:
            raise LightError("window sides must be orthogonal", field="y")
        self.radiance.validate()
        return self

    def sample_surface(self, u, v, sel=None) -> SurfaceSamples:
        q = self.c[None, :] + 0.5 * u[:, None] * self.x[None, :] + 0.5 * v[:, None] * self.y[None, :]
        n = np.broadcast_to(self.normal, q.shape)
        pdf = np.full(q.shape[0], 1.0 / self.area())
        return SurfaceSamples(q, n, pdf)

    def emitted_radiance(self, dirs_p_to_q):
        """Radiance carried toward the receiver; dirs point from receiver to window."""
        return self.radiance.eval(dirs_p_to_q)

    def to_dict(self):
        return {
            "id": self.light_id,
            "type": "window",
            "enabled": self.enabled,
            "c": list(map(float, self.c)),
            "x": list(map(float, self.x)),
            "y": list(map(float, self.y)),
            "radiance": self.radiance.to_dict(),
            "mask_id": self.mask_id,
        }


@dataclass
class BoxLamp:
    """Axis-parameterized box emitting Lambertian radiance w from all 6 faces."""

    light_id: str
    c: np.ndarray
    axes: np.ndarray  # (3, 3) rows are full side vectors, mutually orthogonal
    w: np.ndarray  # (3,) emitted radiance
    enabled: bool = True
    mask_id: str = None
    visible: bool = False

    kind = "box_lamp"

    def side_lengths(self):
        return np.linalg.norm(self.axes, axis=1)

    def face_areas(self):
        lx, ly, lz = self.side_lengths()
        return np.array([ly * lz, ly * lz, lx * lz, lx * lz, lx * ly, lx * ly])

    def area(self):
        return float(self.face_areas().sum())

    def validate(self):
        c = np.asarray(self.c, dtype=np.float64)
        if c.shape != (3,) or not np.all(np.isfinite(c)):
            raise LightError("box c must be a finite 3-vector", field="c")
        a = np.asarray(self.axes, dtype=np.float64)
        if a.shape != (3, 3) or not np.all(np.isfinite(a)):
            raise LightError("box axes must be a 3x3 matrix", field="axes")
        ls = np.linalg.norm(a, axis=1)
        if np.any(ls <= 0):
            raise LightError("box side lengths must be positive", field="axes")
        g = a @ a.T
        off = g - np.diag(np.diag(g))
        if np.abs(off).max() > 1e-4 * float(ls.max()) ** 2:
            raise LightError("box axes must be mutually orthogonal", field="axes")
        w = np.asarray(self.w, dtype=np.float64)
        if w.shape != (3,) or np.any(w < 0) or not np.all(np.isfinite(w)):
            raise LightError("box w must be 3 finite non-negatives", field="w")
        return self

    def sample_surface(self, u, v, sel) -> SurfaceSamples:
        areas = self.face_areas()
        cdf = np.cumsum(areas / areas.sum())
        face = np.searchsorted(cdf, np.clip(sel, 0, np.nextafter(1.0, 0.0)), side="right")
        q, n = _box_face_points(self.c, self.axes, face, u, v)
        pdf = np.full(face.shape[0], 1.0 / self.area())
        return SurfaceSamples(q, n, pdf)

    def emitted_radiance(self, dirs_p_to_q):
        shape = dirs_p_to_q.shape[:-1] + (3,)
        return np.broadcast_to(np.asarray(self.w, dtype=np.float64), shape)

    def to_dict(self):
        return {
            "id": self.light_id,
            "type": "box_lamp",
            "enabled": self.enabled,
            "c": list(map(float, self.c)),
            "axes": [list(map(float, row)) for row in self.axes],
            "w": list(map(float, self.w)),
            "mask_id": self.mask_id,
            "visible": self.visible,
        }


def _box_face_points(c, axes, face, u, v):
    """Points and outward normals on the selected faces of a box.

    Faces are ordered +x, -x, +y, -y, +z, -z in the box's own axes. All
    array arguments must share one backend; face is a numpy int array.
    """
    xp = get_xp(c, axes)
    fixed = np.array([0, 0, 1, 1, 2, 2])[face]
    sign = np.array([1.0, -1.0, 1.0, -1.0, 1.0, -1.0])[face]
    span_a = np.array([1, 1, 0, 0, 0, 0])[face]
    span_b = np.array([2, 2, 2, 2, 1, 1])[face]
    ax_fixed = axes[fixed]
    ax_a = axes[span_a]
    ax_b = axes[span_b]
    if xp is np:
        sgn = sign[:, None]
    else:
        import torch

        sgn = torch.tensor(sign[:, None], dtype=c.dtype)
    q = c + 0.5 * sgn * ax_fixed + 0.5 * u[:, None] * ax_a + 0.5 * v[:, None] * ax_b
    n = sgn * normalize(xp, ax_fixed)
    return q, n


# surfel plate tangents carry half-extents: q + a t1 + b t2, a, b in [-1, 1]


@dataclass
class SurfelSet:
    q: np.ndarray  # (n, 3)
    normal: np.ndarray  # (n, 3)
    area: np.ndarray  # (n,)
    t1: np.ndarray  # (n, 3) half-extent tangent
    t2: np.ndarray  # (n, 3) half-extent tangent
    kind: np.ndarray = None  # (n,) 0 visible, 1 mirrored, 2 edge

    def total_area(self):
        return float(np.sum(self.area))


def mirror_points(q, c, d_c):
    """Reflect q across the plane through c orthogonal to d_c.

    This is the printed construction 2 (c - (q . d_c) d_c) + q: the axial
    coordinate along d_c mirrors about c while the transverse offset is kept.
    """
    xp = get_xp(q, c, d_c)
    axial = dot(xp, q, d_c)
    return 2.0 * (c - axial[..., None] * d_c) + q


def mirror_normals(n, d_c):
    xp = get_xp(n, d_c)
    return n - 2.0 * dot(xp, n, d_c)[..., None] * d_c


@dataclass
class SurfelLamp:
    """A visible lamp reconstructed from its mask pixels.

    Visible surfels come straight from the depth and normal rasters; a
    mirrored copy approximates the far side, and edge plates stitch the two
    shells along the silhouette. The center sits on the initial viewing ray:
    c = d_init (l_init + delta_l), so one scalar slides the lamp in depth.
    """

    light_id: str
    w: np.ndarray  # (3,) emitted radiance
    d_init: np.ndarray  # (3,) unit ray to the initial center
    l_init: float
    delta_l: float = 0.0
    enabled: bool = True
    mask_id: str = None
    point_reflection: bool = False
    # raster-derived constants
    q_vis: np.ndarray = None  # (n, 3)
    n_vis: np.ndarray = None
    a_vis: np.ndarray = None
    edge_index: np.ndarray = None  # indices into the visible arrays
    edge_side: np.ndarray = None  # (m,) pixel side length at each edge surfel

    kind = "surfel_lamp"
    visible = True

    @property
    def c(self):
        return self.d_init * (self.l_init + self.delta_l)

    def validate(self):
        w = np.asarray(self.w, dtype=np.float64)
        if w.shape != (3,) or np.any(w < 0) or not np.all(np.isfinite(w)):
            raise LightError("surfel lamp w must be 3 finite non-negatives", field="w")
        if not np.isfinite(self.delta_l) or self.l_init + self.delta_l <= 0:
            raise LightError("lamp center must stay in front of the camera", field="delta_l")
        if self.q_vis is None or len(self.q_vis) == 0:
            raise LightError("surfel lamp has no visible surfels", field="mask")
        return self

    def surfels(self, c=None) -> SurfelSet:
        """Assemble visible + mirrored + edge surfels for center c (default: own c)."""
        if c is None:
            c = self.c
        return assemble_surfels(
            self.q_vis,
            self.n_vis,
            self.a_vis,
            self.edge_index,
            self.edge_side,
            c,
            point_reflection=self.point_reflection,
        )

    def area(self):
        return self.surfels().total_area()

    def sample_surface(self, u, v, sel) -> SurfaceSamples:
        s, prob, alias = self._sampling_tables()
        idx = alias_sample(prob, alias, sel)
        q = s.q[idx] + u[:, None] * s.t1[idx] + v[:, None] * s.t2[idx]
        pdf = np.full(idx.shape[0], 1.0 / s.total_area())
        return SurfaceSamples(q, s.normal[idx], pdf)

    def _sampling_tables(self):
        # alias table built once per center position, O(1) per draw after that
        cached = getattr(self, "_tables", None)
        if cached is not None and cached[0] == (self.delta_l, self.point_reflection):
            return cached[1], cached[2], cached[3]
        s = self.surfels()
        prob, alias = alias_table(s.area)
        self._tables = ((self.delta_l, self.point_reflection), s, prob, alias)
        return s, prob, alias

    def emitted_radiance(self, dirs_p_to_q):
        shape = dirs_p_to_q.shape[:-1] + (3,)
        return np.broadcast_to(np.asarray(self.w, dtype=np.float64), shape)

    def to_dict(self):
        return {
            "id": self.light_id,
            "type": "surfel_lamp",
            "enabled": self.enabled,
            "w": list(map(float, self.w)),
            "d_init": list(map(float, self.d_init)),
            "l_init": float(self.l_init),
            "delta_l": float(self.delta_l),
            "mask_id": self.mask_id,
            "point_reflection": self.point_reflection,
            "surfels": {
                "q": self.q_vis.tolist(),
                "n": self.n_vis.tolist(),
                "area": self.a_vis.tolist(),
                "edge_index": self.edge_index.tolist(),
                "edge_side": self.edge_side.tolist(),
            },
        }


def assemble_surfels(q_vis, n_vis, a_vis, edge_index, edge_side, c, point_reflection=False):
    """Build the full surfel set for a lamp center c (numpy or torch).

    Mirrored surfels preserve area; edge plates span the visible-to-mirrored
    gap with the pixel side length across, their normals pointing away from
    the center axis.
    """
    xp = get_xp(q_vis, c)
    d_c = normalize(xp, c)
    if point_reflection:
        q_mir = 2.0 * c - q_vis
    else:
        q_mir = mirror_points(q_vis, c, d_c)
    n_mir = mirror_normals(n_vis, d_c)

    f1_vis, f2_vis = lobe_frame(n_vis)
    half_side = xp.sqrt(a_vis)[..., None] * 0.5
    t1_vis, t2_vis = f1_vis * half_side, f2_vis * half_side
    t1_mir = mirror_normals(t1_vis, d_c)
    t2_mir = mirror_normals(t2_vis, d_c)

    q_e_vis = q_vis[edge_index]
    q_e_mir = q_mir[edge_index]
    q_edge = 0.5 * (q_e_vis + q_e_mir)
    gap = q_e_vis - q_e_mir
    gap_len = xp.sqrt(xp.sum(gap * gap, -1))
    a_edge = gap_len * edge_side
    n_edge = normalize(xp, q_edge - c)
    # plate long axis bridges the shells, short axis runs along the silhouette
    t1_edge = 0.5 * gap
    t2_edge = cross(xp, n_edge, normalize(xp, gap)) * (edge_side[..., None] * 0.5)

    def cat(*parts):
        if xp is np:
            return np.concatenate(parts, axis=0)
        import torch

        return torch.cat(parts, dim=0)

    n_v = q_vis.shape[0]
    n_e = q_edge.shape[0]
    kind = np.concatenate([np.zeros(n_v, np.int8), np.ones(n_v, np.int8), np.full(n_e, 2, np.int8)])
    return SurfelSet(
        q=cat(q_vis, q_mir, q_edge),
        normal=cat(n_vis, n_mir, n_edge),
        area=cat(a_vis, a_vis, a_edge),
        t1=cat(t1_vis, t1_mir, t1_edge),
        t2=cat(t2_vis, t2_mir, t2_edge),
        kind=kind,
    )


def build_visible_lamp(
    scene: Scene,
    mask_id: str,
    light_id: str,
    w=(1.0, 1.0, 1.0),
    delta_l: float = 0.0,
    point_reflection: bool = False,
) -> SurfelLamp:
    """Reconstruct a lamp whose pixels are marked by scene.masks[mask_id]."""
    if mask_id not in scene.masks:
        raise LightError(f"scene has no mask {mask_id!r}", field="mask_id")
    mask = scene.masks[mask_id]
    m = mask > 0.5
    if not m.any():
        raise LightError(f"mask {mask_id!r} has no pixels", field="mask_id")

    init = initial_center(scene, mask, kind="lamp")
    l_init = float(np.linalg.norm(init.c))
    d_init = init.c / l_init

    points = unproject(scene.camera, scene.depth)
    areas = pixel_footprint_area(scene.camera, scene.depth, scene.normal)
    q_vis = points[m]
    n_vis = scene.normal[m]
    a_vis = areas[m]

    inner = edge_mask(mask, -1) > 0.5
    # positions of edge pixels inside the flattened visible arrays
    flat_ids = np.full(mask.shape, -1, dtype=np.int64)
    flat_ids[m] = np.arange(int(m.sum()))
    edge_index = flat_ids[inner & m]
    short = min(scene.camera.width, scene.camera.height)
    side_full = 2.0 * scene.depth * np.tan(scene.camera.fov / 2.0) / short
    edge_side = side_full[inner & m]

    lamp = SurfelLamp(
        light_id=light_id,
        w=np.asarray(w, dtype=np.float64),
        d_init=d_init,
        l_init=l_init,
        delta_l=delta_l,
        mask_id=mask_id,
        point_reflection=point_reflection,
        q_vis=q_vis,
        n_vis=n_vis,
        a_vis=a_vis,
        edge_index=edge_index,
        edge_side=edge_side,
    )
    return lamp.validate()


# ---------------------------------------------------------------------------
# serialization


def light_from_dict(d) -> object:
    t = d.get("type")
    if t == "window":
        light = WindowLight(
            light_id=d["id"],
            c=np.asarray(d["c"], dtype=np.float64),
            x=np.asarray(d["x"], dtype=np.float64),
            y=np.asarray(d["y"], dtype=np.float64),
            radiance=WindowRadiance.from_dict(d["radiance"]),
            enabled=bool(d.get("enabled", True)),
            mask_id=d.get("mask_id"),
        )
    elif t == "box_lamp":
        light = BoxLamp(
            light_id=d["id"],
            c=np.asarray(d["c"], dtype=np.float64),
            axes=np.asarray(d["axes"], dtype=np.float64),
            w=np.asarray(d["w"], dtype=np.float64),
            enabled=bool(d.get("enabled", True)),
            mask_id=d.get("mask_id"),
            visible=bool(d.get("visible", False)),
        )
    elif t == "surfel_lamp":
        s = d["surfels"]
        light = SurfelLamp(
            light_id=d["id"],
            w=np.asarray(d["w"], dtype=np.float64),
            d_init=np.asarray(d["d_init"], dtype=np.float64),
            l_init=float(d["l_init"]),
            delta_l=float(d.get("delta_l", 0.0)),
            enabled=bool(d.get("enabled", True)),
            mask_id=d.get("mask_id"),
            point_reflection=bool(d.get("point_reflection", False)),
            q_vis=np.asarray(s["q"], dtype=np.float64),
            n_vis=np.asarray(s["n"], dtype=np.float64),
            a_vis=np.asarray(s["area"], dtype=np.float64),
            edge_index=np.asarray(s["edge_index"], dtype=np.int64),
            edge_side=np.asarray(s["edge_side"], dtype=np.float64),
        )
    else:
        raise LightError(f"unknown light type {t!r}", field="type")
    return light.validate()


def sample_light_surface(light, u, v, face_selector=None) -> SurfaceSamples:
    """Uniform-by-area surface samples for any light type.

    u, v in [-1, 1] place the point within the chosen face or plate;
    face_selector in [0, 1) picks the face (boxes) or surfel (lamps) and is
    ignored by windows.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if face_selector is None:
        face_selector = np.zeros_like(u)
    else:
        face_selector = np.asarray(face_selector, dtype=np.float64)
    return light.sample_surface(u, v, face_selector)
