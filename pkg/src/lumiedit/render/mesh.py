"""Screen-space depth mesh and segment-occlusion queries.

Every pixel quad becomes two triangles over the unprojected depth raster.
Triangles whose vertices disagree in log depth by more than tau_rel are
dropped: those are the rubber-sheet faces that bridge a foreground object to
its background at occlusion boundaries. Pixels touching a dropped triangle
(dilated a little) form the boundary mask that the shadow inpainting stage
later repairs.

Occlusion queries run on a flat BVH with a numba any-hit kernel. Rays are
given as segments (origin, target); triangles containing either endpoint's
source pixel are skipped, as are triangles belonging to a caller-supplied
pixel mask (the emitting light's own pixels).
"""

from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy import ndimage

from ..scenecore import Scene, unproject

LEAF_SIZE = 8


@dataclass
class DepthMesh:
    vertices: np.ndarray  # (v, 3)
    tris: np.ndarray  # (t, 3) vertex indices
    tri_pixels: np.ndarray  # (t, 3) flat pixel id per vertex, -1 if synthetic
    boundary_mask: np.ndarray = None  # (h, w) 1 where triangles were dropped
    n_dropped: int = 0
    _packed: tuple = field(default=None, repr=False)

    @property
    def n_tris(self):
        return self.tris.shape[0]

    @staticmethod
    def from_triangles(vertices, tris) -> "DepthMesh":
        """Wrap an explicit triangle soup (used for ground-truth meshes)."""
        tris = np.asarray(tris, dtype=np.int64)
        return DepthMesh(
            vertices=np.asarray(vertices, dtype=np.float64),
            tris=tris,
            tri_pixels=np.full_like(tris, -1),
        )

    def packed(self):
        if self._packed is None:
            self._packed = _build_bvh(self.vertices, self.tris, self.tri_pixels)
        return self._packed


def build_depth_mesh(scene: Scene, tau_rel: float = 0.05, boundary_dilate: int = 3) -> DepthMesh:
    h, w = scene.shape
    verts = unproject(scene.camera, scene.depth).reshape(-1, 3)
    idx = np.arange(h * w, dtype=np.int64).reshape(h, w)
    v00 = idx[:-1, :-1].ravel()
    v10 = idx[1:, :-1].ravel()
    v01 = idx[:-1, 1:].ravel()
    v11 = idx[1:, 1:].ravel()
    tris = np.concatenate(
        [np.stack([v00, v10, v01], axis=1), np.stack([v10, v11, v01], axis=1)], axis=0
    )

    logd = np.log(scene.depth).ravel()
    a, b, c = logd[tris[:, 0]], logd[tris[:, 1]], logd[tris[:, 2]]
    spread = np.maximum(np.maximum(np.abs(a - b), np.abs(b - c)), np.abs(a - c))
    keep = spread <= tau_rel

    dropped_px = np.zeros(h * w, dtype=bool)
    dropped_px[tris[~keep].ravel()] = True
    boundary = dropped_px.reshape(h, w)
    if boundary_dilate > 0 and boundary.any():
        boundary = ndimage.binary_dilation(boundary, iterations=boundary_dilate)

    kept = tris[keep]
    return DepthMesh(
        vertices=verts,
        tris=kept,
        tri_pixels=kept.copy(),  # vertex index == flat pixel id for depth meshes
        boundary_mask=boundary.astype(np.float64),
        n_dropped=int((~keep).sum()),
    )


# ---------------------------------------------------------------------------
# BVH build (flat arrays, midpoint split with median fallback)


def _build_bvh(vertices, tris, tri_pixels):
    t = tris.shape[0]
    if t == 0:
        # degenerate but legal: nothing ever occludes
        zero3 = np.zeros((1, 3))
        return (
            np.zeros((1, 3)),
            np.zeros((1, 3)),
            np.full(1, -1, np.int64),
            np.full(1, -1, np.int64),
            np.zeros(1, np.int64),
            np.zeros(1, np.int64),
            zero3,
            zero3,
            zero3,
            np.full((1, 3), -1, np.int64),
        )
    p0 = vertices[tris[:, 0]]
    p1 = vertices[tris[:, 1]]
    p2 = vertices[tris[:, 2]]
    lo = np.minimum(np.minimum(p0, p1), p2)
    hi = np.maximum(np.maximum(p0, p1), p2)
    centroid = (lo + hi) * 0.5

    order = np.arange(t)
    node_min, node_max, left, right, start, count = [], [], [], [], [], []

    def new_node():
        node_min.append(None)
        node_max.append(None)
        left.append(-1)
        right.append(-1)
        start.append(0)
        count.append(0)
        return len(left) - 1

    stack = [(new_node(), 0, t)]
    while stack:
        node, s, e = stack.pop()
        ids = order[s:e]
        node_min[node] = lo[ids].min(axis=0)
        node_max[node] = hi[ids].max(axis=0)
        if e - s <= LEAF_SIZE:
            start[node] = s
            count[node] = e - s
            continue
        cen = centroid[ids]
        ext = cen.max(axis=0) - cen.min(axis=0)
        axis = int(np.argmax(ext))
        mid = 0.5 * (cen[:, axis].max() + cen[:, axis].min())
        sel = cen[:, axis] < mid
        n_left = int(sel.sum())
        if n_left == 0 or n_left == e - s:
            # all centroids coincide on this axis: split by median index
            part = np.argsort(cen[:, axis], kind="stable")
            n_left = (e - s) // 2
            order[s:e] = ids[part]
        else:
            order[s:e] = np.concatenate([ids[sel], ids[~sel]])
        l = new_node()
        r = new_node()
        left[node] = l
        right[node] = r
        stack.append((l, s, s + n_left))
        stack.append((r, s + n_left, e))

    perm = order
    tp0 = np.ascontiguousarray(p0[perm])
    te1 = np.ascontiguousarray(p1[perm] - p0[perm])
    te2 = np.ascontiguousarray(p2[perm] - p0[perm])
    tpx = np.ascontiguousarray(tri_pixels[perm])
    return (
        np.ascontiguousarray(np.array(node_min)),
        np.ascontiguousarray(np.array(node_max)),
        np.asarray(left, np.int64),
        np.asarray(right, np.int64),
        np.asarray(start, np.int64),
        np.asarray(count, np.int64),
        tp0,
        te1,
        te2,
        tpx,
    )


@njit(nogil=True, cache=True, error_model="numpy")
def _any_hit(
    orig,
    delta,
    t_lo,
    t_hi,
    node_min,
    node_max,
    left,
    right,
    start,
    count,
    tri_p0,
    tri_e1,
    tri_e2,
    tri_px,
    tri_masked,
    excl_a,
    excl_b,
    out,
):
    n_rays = orig.shape[0]
    stack = np.empty(128, np.int64)
    for ray in range(n_rays):
        ox, oy, oz = orig[ray, 0], orig[ray, 1], orig[ray, 2]
        dx, dy, dz = delta[ray, 0], delta[ray, 1], delta[ray, 2]
        ea, eb = excl_a[ray], excl_b[ray]
        hit = 0
        sp = 0
        stack[sp] = 0
        sp += 1
        while sp > 0 and hit == 0:
            sp -= 1
            node = stack[sp]
            # slab test against [t_lo, t_hi]
            tn = t_lo
            tf = t_hi
            ok = True
            for ax in range(3):
                o = orig[ray, ax]
                d = delta[ray, ax]
                bmin = node_min[node, ax]
                bmax = node_max[node, ax]
                if abs(d) < 1e-300:
                    if o < bmin or o > bmax:
                        ok = False
                        break
                else:
                    inv = 1.0 / d
                    ta = (bmin - o) * inv
                    tb = (bmax - o) * inv
                    if ta > tb:
                        ta, tb = tb, ta
                    if ta > tn:
                        tn = ta
                    if tb < tf:
                        tf = tb
                    if tn > tf:
                        ok = False
                        break
            if not ok:
                continue
            if count[node] > 0:
                s = start[node]
                for k in range(s, s + count[node]):
                    pa = tri_px[k, 0]
                    pb = tri_px[k, 1]
                    pc = tri_px[k, 2]
                    if tri_masked[k] != 0:
                        continue
                    if ea >= 0 and (pa == ea or pb == ea or pc == ea):
                        continue
                    if eb >= 0 and (pa == eb or pb == eb or pc == eb):
                        continue
                    e1x, e1y, e1z = tri_e1[k, 0], tri_e1[k, 1], tri_e1[k, 2]
                    e2x, e2y, e2z = tri_e2[k, 0], tri_e2[k, 1], tri_e2[k, 2]
                    px = dy * e2z - dz * e2y
                    py = dz * e2x - dx * e2z
                    pz = dx * e2y - dy * e2x
                    det = e1x * px + e1y * py + e1z * pz
                    if abs(det) < 1e-14:
                        continue
                    inv_det = 1.0 / det
                    tvx = ox - tri_p0[k, 0]
                    tvy = oy - tri_p0[k, 1]
                    tvz = oz - tri_p0[k, 2]
                    u = (tvx * px + tvy * py + tvz * pz) * inv_det
                    if u < -1e-12 or u > 1.0 + 1e-12:
                        continue
                    qx = tvy * e1z - tvz * e1y
                    qy = tvz * e1x - tvx * e1z
                    qz = tvx * e1y - tvy * e1x
                    v = (dx * qx + dy * qy + dz * qz) * inv_det
                    if v < -1e-12 or u + v > 1.0 + 1e-12:
                        continue
                    t = (e2x * qx + e2y * qy + e2z * qz) * inv_det
                    if t_lo < t < t_hi:
                        hit = 1
                        break
            else:
                stack[sp] = left[node]
                sp += 1
                stack[sp] = right[node]
                sp += 1
        out[ray] = hit


def segments_occluded(
    mesh: DepthMesh,
    origins: np.ndarray,
    targets: np.ndarray,
    t_lo: float = 1e-4,
    t_hi: float = 1.0 - 1e-4,
    excl_pixel_a=None,
    excl_pixel_b=None,
    masked_pixels=None,
) -> np.ndarray:
    """True where the open segment origin -> target is blocked by the mesh.

    excl_pixel_a/b: per-ray flat pixel ids whose triangles are ignored
    (self-intersection guards for the two endpoints). masked_pixels: flat
    boolean array (h*w) of pixels whose triangles never occlude (the
    emitting light's own footprint).
    """
    packed = mesh.packed()
    (node_min, node_max, left, right, start, count, p0, e1, e2, tpx) = packed
    n = origins.shape[0]
    if excl_pixel_a is None:
        excl_pixel_a = np.full(n, -1, np.int64)
    if excl_pixel_b is None:
        excl_pixel_b = np.full(n, -1, np.int64)
    if masked_pixels is None:
        tri_masked = np.zeros(tpx.shape[0], np.uint8)
    else:
        safe = np.where(tpx >= 0, tpx, 0)
        inmask = masked_pixels[safe] & (tpx >= 0)
        tri_masked = inmask.any(axis=1).astype(np.uint8)
    out = np.empty(n, np.uint8)
    _any_hit(
        np.ascontiguousarray(origins, np.float64),
        np.ascontiguousarray(targets - origins, np.float64),
        t_lo,
        t_hi,
        node_min,
        node_max,
        left,
        right,
        start,
        count,
        p0,
        e1,
        e2,
        tpx,
        tri_masked,
        np.ascontiguousarray(excl_pixel_a, np.int64),
        np.ascontiguousarray(excl_pixel_b, np.int64),
        out,
    )
    return out.astype(bool)
