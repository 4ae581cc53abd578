"""One-bounce indirect shading surrogate.

Each pixel gathers bounced light from n_gather other pixels drawn uniformly
from the frame. A gather pixel q re-emits its direct shading diffusely
(albedo/pi), weighted by its footprint area and the usual two-cosine over
squared-distance transfer, with visibility resolved on the depth mesh:

    E_ind(p) = (P / n_gather) * sum_q  A(q) E_d(q)/pi * cos+ cos+ / r~2 * V * area(q)

r~2 is floored at area(q)/pi so transfers between adjacent pixels stay
bounded (a surfel cannot subtend more than a hemisphere). The whole transfer
is a sparse matrix built once per (scene, seed); applying it to albedo*E_d
is linear, so refinement backpropagates through E_d with the gather frozen.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import torch
from scipy import sparse

from ..scenecore import Scene, pixel_footprint_area, unproject
from .direct import resolve_threads, _chunk_rows
from .mesh import DepthMesh, build_depth_mesh, segments_occluded
from . import rng


@dataclass
class GatherPlan:
    """Frozen indirect transfer: E_ind = matrix @ (albedo * E_d), per channel."""

    matrix: sparse.csr_matrix  # (h*w, h*w)
    n_gather: int
    seed: int
    shape: tuple

    def apply(self, e_direct: np.ndarray, albedo: np.ndarray) -> np.ndarray:
        h, w = self.shape
        src = (albedo * e_direct).reshape(h * w, 3)
        return np.asarray(self.matrix @ src).reshape(h, w, 3)

    def apply_torch(self, e_direct: torch.Tensor, albedo: torch.Tensor) -> torch.Tensor:
        coo = self.matrix.tocoo()
        idx = torch.tensor(np.stack([coo.row, coo.col]), dtype=torch.int64)
        m = torch.sparse_coo_tensor(
            idx,
            torch.tensor(coo.data, dtype=torch.float64),
            coo.shape,
            check_invariants=False,
        )
        src = (albedo * e_direct).reshape(-1, 3)
        return torch.sparse.mm(m, src).reshape(e_direct.shape)


def build_gather_plan(
    scene: Scene,
    mesh: DepthMesh = None,
    n_gather: int = 64,
    seed: int = 0,
    threads=None,
) -> GatherPlan:
    h, w = scene.shape
    n_px = h * w
    if mesh is None:
        mesh = build_depth_mesh(scene)
    points = unproject(scene.camera, scene.depth).reshape(n_px, 3)
    normals = scene.normal.reshape(n_px, 3)
    area = pixel_footprint_area(scene.camera, scene.depth, scene.normal).reshape(n_px)

    rows_out = [None] * h

    def run(rows):
        for r in rows:
            u = rng.uniforms((w, n_gather), *rng.row_tags(seed, "__scene__", "gather", r))
            q_idx = np.minimum((u * n_px).astype(np.int64), n_px - 1)
            p_idx = (r * w + np.arange(w))[:, None].astype(np.int64)
            p_idx = np.broadcast_to(p_idx, q_idx.shape)

            d = points[q_idx] - points[p_idx]
            r2 = (d * d).sum(-1)
            a_q = area[q_idx]
            r2f = np.maximum(r2, a_q / np.pi)
            dirn = d / np.sqrt(np.maximum(r2, 1e-30))[..., None]
            cos_p = np.clip((dirn * normals[p_idx]).sum(-1), 0.0, None)
            cos_q = np.clip(-(dirn * normals[q_idx]).sum(-1), 0.0, None)
            val = cos_p * cos_q * a_q / (np.pi * r2f)
            val[q_idx == p_idx] = 0.0

            live = val > 0
            if live.any():
                occ = segments_occluded(
                    mesh,
                    points[p_idx[live]],
                    points[q_idx[live]],
                    excl_pixel_a=p_idx[live],
                    excl_pixel_b=q_idx[live],
                )
                lv = val[live]
                lv[occ] = 0.0
                val[live] = lv
            keep = val > 0
            # uniform picks estimate the all-pixel sum: (P / n_gather) sum_s f(q_s)
            rows_out[r] = (p_idx[keep], q_idx[keep], val[keep] * (n_px / n_gather))

    n_threads = resolve_threads(threads)
    chunks = _chunk_rows(h, n_gather, w)
    if n_threads <= 1 or len(chunks) <= 1:
        for rows in chunks:
            run(rows)
    else:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            list(pool.map(run, chunks))

    pi = np.concatenate([t[0] for t in rows_out])
    qi = np.concatenate([t[1] for t in rows_out])
    vv = np.concatenate([t[2] for t in rows_out])
    m = sparse.csr_matrix((vv, (pi, qi)), shape=(n_px, n_px))
    return GatherPlan(matrix=m, n_gather=n_gather, seed=seed, shape=(h, w))


def indirect_one_bounce(
    scene: Scene,
    e_direct: np.ndarray,
    n_gather: int = 64,
    seed: int = 0,
    mesh: DepthMesh = None,
    plan: GatherPlan = None,
    threads=None,
) -> np.ndarray:
    """Screen-space one-bounce gather of the direct shading e_direct."""
    if plan is None:
        plan = build_gather_plan(scene, mesh=mesh, n_gather=n_gather, seed=seed, threads=threads)
    return plan.apply(e_direct, scene.albedo)
