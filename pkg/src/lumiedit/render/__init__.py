from .compose import (
    ShadingSet,
    compose_and_rerender,
    compose_direct,
    encode_png,
    render_manifest,
    render_scene,
    write_manifest,
    write_png,
)
from .direct import direct_angular, direct_area, direct_mis
from .indirect import GatherPlan, build_gather_plan, indirect_one_bounce
from .mesh import DepthMesh, build_depth_mesh, segments_occluded
from .shadow import inpaint_shadow, light_shadow, shadow_raster

__all__ = [
    "direct_area",
    "direct_angular",
    "direct_mis",
    "DepthMesh",
    "build_depth_mesh",
    "segments_occluded",
    "shadow_raster",
    "inpaint_shadow",
    "light_shadow",
    "GatherPlan",
    "build_gather_plan",
    "indirect_one_bounce",
    "ShadingSet",
    "render_scene",
    "compose_direct",
    "compose_and_rerender",
    "render_manifest",
    "write_manifest",
    "encode_png",
    "write_png",
]
