"""Scene data model: camera intrinsics, rasters, and scene IO.

Camera convention: right-handed camera space, looking down -z with y up.
Pixel (0, 0) is the top-left corner, pixel centers sit at half-integer
offsets, and the field of view applies to the short image axis, so the
image-plane coordinate of the short axis spans +-tan(f/2) at the edges.
A depth value is the distance along -z (planar depth, not ray length).

Rasters are numpy float64 in memory and float32 PFM on disk (float32 embeds
exactly into float64, so a save/load/save cycle is byte-stable).
"""

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .pfm import read_pfm, write_pfm


class SceneError(Exception):
    """Base class for scene construction and validation failures."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class DescriptorError(SceneError):
    pass


class MissingRasterError(SceneError):
    pass


class DimensionMismatchError(SceneError):
    pass


class NonFiniteRasterError(SceneError):
    pass


class DepthRangeError(SceneError):
    pass


class NormalLengthError(SceneError):
    pass


class MaskValueError(SceneError):
    pass


@dataclass(frozen=True)
class CameraIntrinsics:
    width: int
    height: int
    fov: float  # radians, short axis

    @property
    def pixel_scale(self) -> float:
        """Image-plane extent of one pixel."""
        return 2.0 * np.tan(self.fov / 2.0) / min(self.width, self.height)

    def pixel_coords(self):
        """Image-plane (X, Y) of every pixel center, each shaped (h, w)."""
        s = self.pixel_scale
        j = np.arange(self.width, dtype=np.float64)
        i = np.arange(self.height, dtype=np.float64)
        x = (j + 0.5 - self.width / 2.0) * s
        y = (self.height / 2.0 - (i + 0.5)) * s
        return np.broadcast_to(x, (self.height, self.width)), np.broadcast_to(
            y[:, None], (self.height, self.width)
        )

    def pixel_rays(self) -> np.ndarray:
        """Per-pixel ray vectors [X, Y, -1], shaped (h, w, 3). Not normalized."""
        x, y = self.pixel_coords()
        return np.stack([x, y, -np.ones_like(x)], axis=-1)

    def to_dict(self):
        return {"width": self.width, "height": self.height, "fov_deg": float(np.degrees(self.fov))}

    @staticmethod
    def from_dict(d):
        for k in ("width", "height", "fov_deg"):
            if k not in d:
                raise DescriptorError(f"camera missing field {k!r}", field=f"camera.{k}")
        return CameraIntrinsics(int(d["width"]), int(d["height"]), float(np.radians(d["fov_deg"])))


def unproject(camera: CameraIntrinsics, depth: np.ndarray, pixel=None):
    """3D camera-space point(s) for pixel center(s) at the given depth.

    With pixel=None, unprojects the whole raster to (h, w, 3). Otherwise
    pixel is (i, j) (row, column) and a single point is returned.
    """
    rays = camera.pixel_rays()
    if pixel is None:
        return rays * np.asarray(depth, dtype=np.float64)[..., None]
    i, j = pixel
    return rays[i, j] * float(depth if np.isscalar(depth) else depth[i, j])


def project(camera: CameraIntrinsics, points: np.ndarray) -> np.ndarray:
    """Inverse of unproject: camera-space points (..., 3) to (i, j) pixel coords.

    Points must be in front of the camera (z < 0).
    """
    pts = np.asarray(points, dtype=np.float64)
    z = pts[..., 2]
    x = pts[..., 0] / -z
    y = pts[..., 1] / -z
    s = camera.pixel_scale
    j = x / s + camera.width / 2.0 - 0.5
    i = camera.height / 2.0 - y / s - 0.5
    return np.stack([i, j], axis=-1)


def normalize_depth(depth: np.ndarray, target_mean: float = 3.0) -> np.ndarray:
    """Rescale a depth raster so its mean is exactly target_mean.

    A single scalar multiply, so per-pixel ratios are preserved exactly and
    the operation is idempotent.
    """
    depth = np.asarray(depth, dtype=np.float64)
    if depth.size == 0:
        raise DepthRangeError("empty depth raster", field="depth")
    if not np.all(np.isfinite(depth)):
        raise NonFiniteRasterError("depth contains non-finite values", field="depth")
    if np.any(depth <= 0):
        raise DepthRangeError("depth must be strictly positive everywhere", field="depth")
    return depth * (target_mean / depth.mean())


def pixel_footprint_area(
    camera: CameraIntrinsics,
    depth: np.ndarray,
    normal: np.ndarray,
    paper_literal_footprint: bool = False,
    cos_floor: float = 1e-3,
) -> np.ndarray:
    """Approximate scene-surface area covered by each pixel.

    A pixel spans side 2*D*tan(f/2)/S on a fronto-parallel surface at depth D
    (S = short axis pixel count); tilting by the surface normal divides by the
    foreshortening cosine, floored to keep grazing pixels finite.

    paper_literal_footprint switches to the uncorrected published form
    ((1/S) tan(f/2))^2 / cos, which has no depth dependence; it is kept only
    for comparisons.
    """
    depth = np.asarray(depth, dtype=np.float64)
    normal = np.asarray(normal, dtype=np.float64)
    short = min(camera.width, camera.height)
    cos = np.clip(normal[..., 2], cos_floor, None)
    if paper_literal_footprint:
        side = np.tan(camera.fov / 2.0) / short
        return np.full_like(depth, side * side) / cos
    side = 2.0 * depth * np.tan(camera.fov / 2.0) / short
    return side * side / cos


@dataclass
class Scene:
    """A single posed view with geometry rasters and a set of light sources.

    masks maps light id to a binary {0,1} raster marking that light's pixels.
    image is the observed LDR image in [0, 1] used as the refinement target;
    roughness is carried for completeness but the diffuse pipeline ignores it.
    """

    camera: CameraIntrinsics
    depth: np.ndarray
    normal: np.ndarray
    albedo: np.ndarray
    image: np.ndarray = None
    roughness: np.ndarray = None
    masks: dict = field(default_factory=dict)
    lights: list = field(default_factory=list)

    @property
    def shape(self):
        return self.depth.shape

    def points(self) -> np.ndarray:
        return unproject(self.camera, self.depth)

    def light(self, light_id):
        for l in self.lights:
            if l.light_id == light_id:
                return l
        raise KeyError(f"no light with id {light_id!r}")

    def enabled_lights(self):
        return [l for l in self.lights if l.enabled]

    def validate(self):
        h, w = self.camera.height, self.camera.width
        named = {
            "depth": (self.depth, (h, w)),
            "normal": (self.normal, (h, w, 3)),
            "albedo": (self.albedo, (h, w, 3)),
        }
        if self.image is not None:
            named["image"] = (self.image, (h, w, 3))
        if self.roughness is not None:
            named["roughness"] = (self.roughness, (h, w))
        for name, (arr, shape) in named.items():
            if arr is None:
                raise MissingRasterError(f"scene is missing raster {name!r}", field=name)
            if arr.shape != shape:
                raise DimensionMismatchError(
                    f"raster {name!r} has shape {arr.shape}, camera expects {shape}", field=name
                )
            if not np.all(np.isfinite(arr)):
                raise NonFiniteRasterError(f"raster {name!r} contains non-finite values", field=name)
        if np.any(self.depth <= 0):
            raise DepthRangeError("depth must be strictly positive", field="depth")
        nlen = np.linalg.norm(self.normal, axis=-1)
        if np.any(np.abs(nlen - 1.0) > 1e-4):
            raise NormalLengthError(
                f"normals must be unit length within 1e-4 (worst {np.abs(nlen - 1.0).max():.2e})",
                field="normal",
            )
        for mid, mask in self.masks.items():
            if mask.shape != (h, w):
                raise DimensionMismatchError(
                    f"mask {mid!r} has shape {mask.shape}, camera expects {(h, w)}",
                    field=f"masks.{mid}",
                )
            vals = np.unique(mask)
            if not np.all(np.isin(vals, (0.0, 1.0))):
                raise MaskValueError(f"mask {mid!r} must be binary 0/1", field=f"masks.{mid}")
        return self


def _load_raster(root, rel, field_name, channels):
    path = os.path.join(root, rel)
    if not os.path.exists(path):
        raise MissingRasterError(f"raster file not found for {field_name!r}: {path}", field=field_name)
    img = read_pfm(path).astype(np.float64)
    got = 1 if img.ndim == 2 else img.shape[2]
    if got != channels:
        raise DimensionMismatchError(
            f"raster {field_name!r} has {got} channel(s), expected {channels}", field=field_name
        )
    return img


def load_scene(path) -> Scene:
    """Load a scene from a JSON descriptor (paths are relative to it)."""
    from .lightgeom import light_from_dict

    if os.path.isdir(path):
        path = os.path.join(path, "scene.json")
    if not os.path.exists(path):
        raise DescriptorError(f"scene descriptor not found: {path}", field="path")
    with open(path) as f:
        try:
            desc = json.load(f)
        except json.JSONDecodeError as e:
            raise DescriptorError(f"malformed scene descriptor: {e}", field="descriptor")

    if "camera" not in desc:
        raise DescriptorError("descriptor missing 'camera'", field="camera")
    if "rasters" not in desc or "depth" not in desc.get("rasters", {}):
        raise DescriptorError("descriptor missing 'rasters.depth'", field="rasters.depth")
    camera = CameraIntrinsics.from_dict(desc["camera"])

    root = os.path.dirname(os.path.abspath(path))
    rasters = desc["rasters"]
    scene = Scene(
        camera=camera,
        depth=_load_raster(root, rasters["depth"], "depth", 1),
        normal=_load_raster(root, rasters["normal"], "normal", 3),
        albedo=_load_raster(root, rasters["albedo"], "albedo", 3),
        image=_load_raster(root, rasters["image"], "image", 3) if "image" in rasters else None,
        roughness=_load_raster(root, rasters["roughness"], "roughness", 1)
        if "roughness" in rasters
        else None,
    )
    for mid, rel in desc.get("masks", {}).items():
        scene.masks[mid] = _load_raster(root, rel, f"masks.{mid}", 1)
    if desc.get("normalize_depth", False):
        scene.depth = normalize_depth(scene.depth)
    scene.lights = [light_from_dict(d) for d in desc.get("lights", [])]
    return scene.validate()


def save_scene(scene: Scene, dirpath) -> str:
    """Write a scene directory (scene.json plus PFM rasters). Returns the descriptor path."""
    os.makedirs(dirpath, exist_ok=True)
    rasters = {"depth": "depth.pfm", "normal": "normal.pfm", "albedo": "albedo.pfm"}
    write_pfm(os.path.join(dirpath, "depth.pfm"), scene.depth.astype(np.float32))
    write_pfm(os.path.join(dirpath, "normal.pfm"), scene.normal.astype(np.float32))
    write_pfm(os.path.join(dirpath, "albedo.pfm"), scene.albedo.astype(np.float32))
    if scene.image is not None:
        rasters["image"] = "image.pfm"
        write_pfm(os.path.join(dirpath, "image.pfm"), scene.image.astype(np.float32))
    if scene.roughness is not None:
        rasters["roughness"] = "roughness.pfm"
        write_pfm(os.path.join(dirpath, "roughness.pfm"), scene.roughness.astype(np.float32))
    masks = {}
    for mid, mask in scene.masks.items():
        rel = f"mask_{mid}.pfm"
        masks[mid] = rel
        write_pfm(os.path.join(dirpath, rel), mask.astype(np.float32))
    desc = {
        "camera": scene.camera.to_dict(),
        "rasters": rasters,
        "masks": masks,
        "normalize_depth": False,
        "lights": [l.to_dict() for l in scene.lights],
    }
    out = os.path.join(dirpath, "scene.json")
    with open(out, "w") as f:
        json.dump(desc, f, indent=2)
    return out
