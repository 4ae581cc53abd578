"""Per-light shadow rasters over the depth mesh.

A shadow raster S_j in [0, 1] is the fraction of light-surface samples each
pixel can see. Receivers are offset a little along their shading normal
before the segment test, the receiving pixel's own triangles are excluded
per ray, and every triangle touching the light's own mask is excluded
globally so the emitter never shadows itself.

Near depth-mesh boundaries the raster is unreliable (the mesh has holes
where rubber-sheet triangles were dropped), so those pixels are replaced by
a weighted-Laplacian inpaint from their trustworthy neighbours.
"""

from concurrent.futures import ThreadPoolExecutor

import numpy as np
import torch
from scipy import sparse
from scipy.sparse.linalg import spsolve

from ..scenecore import Scene, unproject
from .direct import resolve_threads, _chunk_rows
from .mesh import DepthMesh, segments_occluded
from .sampling import build_surface_plan, light_bundle

OFFSET_SCALE = 1e-3  # receiver offset along the normal, times local depth
TAU_REL = 0.05  # log-depth scale shared with the mesh discard rule


def shadow_raster(
    scene: Scene,
    mesh: DepthMesh,
    light,
    spp: int = 16,
    seed: int = 0,
    threads=None,
) -> np.ndarray:
    """Visibility fraction toward `light` for every pixel, before inpainting."""
    h, w = scene.shape
    points = unproject(scene.camera, scene.depth)
    normals = scene.normal
    depth = scene.depth
    mask = scene.masks.get(light.light_id)
    mask_flat = None if mask is None else mask.reshape(-1) > 0.5
    bundle = light_bundle(light)
    out = np.empty((h, w), dtype=np.float64)

    def run(rows):
        plan = build_surface_plan(light, rows, w, spp, seed, purpose="shadow")
        with torch.no_grad():
            q = bundle.surface_points(plan)[0].numpy().reshape(len(rows), w, spp, 3)
        r = len(rows)
        p = points[rows]  # (r, w, 3)
        n = normals[rows]
        eps = OFFSET_SCALE * depth[rows][..., None]
        orig = np.broadcast_to((p + eps * n)[:, :, None, :], q.shape)
        flat_ids = (np.asarray(rows)[:, None] * w + np.arange(w)[None, :]).astype(np.int64)
        excl = np.broadcast_to(flat_ids[:, :, None], q.shape[:3]).reshape(-1)
        hit = segments_occluded(
            mesh,
            orig.reshape(-1, 3),
            q.reshape(-1, 3),
            excl_pixel_a=excl,
            masked_pixels=mask_flat,
        )
        out[rows] = 1.0 - hit.reshape(r, w, spp).mean(axis=2)

    n_threads = resolve_threads(threads)
    chunks = _chunk_rows(h, spp, w)
    if n_threads <= 1 or len(chunks) <= 1:
        for rows in chunks:
            run(rows)
    else:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            list(pool.map(run, chunks))
    return out


def inpaint_shadow(
    s_init: np.ndarray,
    boundary_mask: np.ndarray,
    depth: np.ndarray,
    normal: np.ndarray,
) -> np.ndarray:
    """Replace boundary-mask pixels by a weighted harmonic fill.

    4-neighbour weights fall off with the log-depth gap (same tau as the mesh
    discard rule) and with normal disagreement, so the fill does not bleed
    across the very occlusion edges that made those pixels unreliable.
    Unmasked pixels act as Dirichlet data, so a mask covering the whole image
    leaves nothing to diffuse from and is rejected.
    """
    h, w = s_init.shape
    mask = boundary_mask > 0.5
    n_unknown = int(mask.sum())
    if n_unknown == 0:
        return s_init.copy()
    if n_unknown == h * w:
        raise ValueError("boundary mask covers the entire image; no known pixels to fill from")

    logd = np.log(depth)
    unknown_id = np.full(h * w, -1, dtype=np.int64)
    unknown_id[mask.ravel()] = np.arange(n_unknown)

    rows, cols, vals = [], [], []
    diag = np.zeros(n_unknown)
    rhs = np.zeros(n_unknown)
    ii, jj = np.nonzero(mask)
    for di, dj in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        ni, nj = ii + di, jj + dj
        ok = (ni >= 0) & (ni < h) & (nj >= 0) & (nj < w)
        si, sj, ti, tj = ii[ok], jj[ok], ni[ok], nj[ok]
        dlog = (logd[si, sj] - logd[ti, tj]) / TAU_REL
        ncos = np.clip((normal[si, sj] * normal[ti, tj]).sum(axis=1), 0.0, 1.0)
        wgt = np.exp(-dlog * dlog) * ncos + 1e-6
        a = unknown_id[si * w + sj]
        b = unknown_id[ti * w + tj]
        diag_add = np.zeros(n_unknown)
        np.add.at(diag_add, a, wgt)
        diag += diag_add
        interior = b >= 0
        rows.append(a[interior])
        cols.append(b[interior])
        vals.append(-wgt[interior])
        rhs_add = np.zeros(n_unknown)
        np.add.at(rhs_add, a[~interior], wgt[~interior] * s_init[ti[~interior], tj[~interior]])
        rhs += rhs_add

    rows.append(np.arange(n_unknown))
    cols.append(np.arange(n_unknown))
    vals.append(diag)
    lap = sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_unknown, n_unknown),
    )
    fill = spsolve(lap, rhs)
    out = s_init.copy()
    out[mask] = np.clip(fill, 0.0, 1.0)
    return out


def light_shadow(
    scene: Scene,
    mesh: DepthMesh,
    light,
    spp: int = 16,
    seed: int = 0,
    threads=None,
) -> np.ndarray:
    """shadow_raster followed by boundary inpainting."""
    s0 = shadow_raster(scene, mesh, light, spp=spp, seed=seed, threads=threads)
    if mesh.boundary_mask is None or not mesh.boundary_mask.any():
        return s0
    return inpaint_shadow(s0, mesh.boundary_mask, scene.depth, scene.normal)
