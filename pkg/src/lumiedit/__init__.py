"""Physically based light editing for single indoor images."""

__version__ = "0.1.0"

from .scenecore import (
    CameraIntrinsics,
    Scene,
    load_scene,
    normalize_depth,
    pixel_footprint_area,
    project,
    save_scene,
    unproject,
)

__all__ = [
    "CameraIntrinsics",
    "Scene",
    "load_scene",
    "save_scene",
    "normalize_depth",
    "pixel_footprint_area",
    "project",
    "unproject",
    "__version__",
]
