"""Shared analytic test scenes: a flat wall receiver plus one emitter.

These are used by the estimator tests, the oracle generator, and the
acceptance suite, so they live outside any test module. Geometry is kept
simple enough that dense quadrature is an unambiguous reference.
"""

import numpy as np

from lumiedit.lightgeom import BoxLamp, SGLobe, WindowLight, WindowRadiance
from lumiedit.scenecore import CameraIntrinsics, Scene


def wall_scene(h=8, w=8, depth=3.0, fov=np.pi / 3, albedo=0.5) -> Scene:
    """Fronto-parallel wall at constant depth, normals facing the camera."""
    cam = CameraIntrinsics(width=w, height=h, fov=fov)
    normal = np.zeros((h, w, 3))
    normal[..., 2] = 1.0
    scene = Scene(
        camera=cam,
        depth=np.full((h, w), float(depth)),
        normal=normal,
        albedo=np.full((h, w, 3), float(albedo)),
    )
    return scene.validate()


def quad_lamp() -> BoxLamp:
    """Thin box parallel to the wall, 2 m in front of it."""
    return BoxLamp(
        light_id="lamp_a",
        c=np.array([0.0, 0.0, -1.0]),
        axes=np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.02]]),
        w=np.array([1.0, 0.8, 0.6]),
    ).validate()


def tilted_lamp() -> BoxLamp:
    """Same box tilted 30 degrees about x and shifted off-axis."""
    c30, s30 = np.cos(np.pi / 6), np.sin(np.pi / 6)
    axes = np.array([[1.0, 0.0, 0.0], [0.0, c30, s30], [0.0, -0.02 * s30, 0.02 * c30]])
    return BoxLamp(
        light_id="lamp_b",
        c=np.array([0.2, -0.1, -1.2]),
        axes=axes,
        w=np.array([0.9, 1.0, 0.7]),
    ).validate()


SUN_DIR = np.array([0.05, 0.1, 1.0]) / np.linalg.norm([0.05, 0.1, 1.0])


def sun_window(lam_sun=100.0, w_sun=(50.0, 45.0, 40.0), w_sky=(0.0, 0.0, 0.0), w_grd=(0.0, 0.0, 0.0)) -> WindowLight:
    """Window behind the camera shining onto the wall.

    Defaults give a pure-sun emitter; pass nonzero ambient weights for the
    sky/ground variants. The lobe axes point receiver-to-source.
    """
    radiance = WindowRadiance(
        sun=SGLobe(np.asarray(w_sun, dtype=np.float64), float(lam_sun), SUN_DIR.copy()),
        sky=SGLobe(np.asarray(w_sky, dtype=np.float64), 2.0, np.array([0.0, 1.0, 0.0])),
        ground=SGLobe(np.asarray(w_grd, dtype=np.float64), 1.5, np.array([0.0, -1.0, 0.0])),
    )
    light = WindowLight(
        light_id="win_c",
        c=np.array([0.0, 0.2, 0.6]),
        x=np.array([0.9, 0.0, 0.0]),
        y=np.array([0.0, -0.8, 0.0]),
        radiance=radiance,
    )
    return light.validate()


def ambient_window() -> WindowLight:
    """Sun weight zero; sky and ground carry all the energy."""
    return sun_window(
        lam_sun=1000.0, w_sun=(0.0, 0.0, 0.0), w_sky=(5.0, 5.0, 5.5), w_grd=(2.0, 1.8, 1.6)
    )


def scene_with(light, **kw) -> Scene:
    scene = wall_scene(**kw)
    scene.lights = [light]
    return scene


def plate_scene(h=32, w=32, fov=np.pi / 3, wall_depth=3.0, plate_depth=1.5, plate=(12, 20, 12, 20)) -> Scene:
    """Floating square plate in front of a wall, both fronto-parallel.

    plate gives (row_start, row_stop, col_start, col_stop) of the plate
    pixels. The depth step at the silhouette is what the mesh discard rule
    and the shadow inpainting are exercised on.
    """
    scene = wall_scene(h=h, w=w, depth=wall_depth, fov=fov)
    r0, r1, c0, c1 = plate
    scene.depth[r0:r1, c0:c1] = plate_depth
    return scene.validate()


def plate_extent(scene: Scene, plate=(12, 20, 12, 20)):
    """World-space (x_lo, x_hi, y_lo, y_hi, z) spanned by the plate pixel centers."""
    r0, r1, c0, c1 = plate
    pts = scene.points()[r0:r1, c0:c1]
    return (
        pts[..., 0].min(),
        pts[..., 0].max(),
        pts[..., 1].min(),
        pts[..., 1].max(),
        float(pts[..., 2].mean()),
    )


def corner_scene(h=32, w=32, fov=np.pi / 3, wall_depth=3.0, corner_y=-1.0) -> Scene:
    """Vertical wall meeting a 45-degree ramp, a concave corner.

    The ramp plane satisfies z + y = corner_y - wall_depth, so its pixels
    stay camera-facing (normal (0,1,1)/sqrt2) and depth varies smoothly
    across the corner; the two faces see each other for bounce transfer.
    """
    cam = CameraIntrinsics(width=w, height=h, fov=fov)
    rays = cam.pixel_rays()  # (h, w, 3) = [X, Y, -1]
    y_img = rays[..., 1]
    d_ramp = (wall_depth - corner_y) / (1.0 - y_img)
    depth = np.where(d_ramp < wall_depth, d_ramp, wall_depth)
    is_ramp = d_ramp < wall_depth
    normal = np.zeros((h, w, 3))
    normal[..., 2] = 1.0
    normal[is_ramp] = np.array([0.0, 1.0, 1.0]) / np.sqrt(2.0)
    scene = Scene(
        camera=cam,
        depth=depth,
        normal=normal,
        albedo=np.full((h, w, 3), 0.6),
    )
    return scene.validate()


def box_face_rects(lamp: BoxLamp):
    """The six faces as (center, side_a, side_b) with outward a x b.

    Restates the box's face layout for oracle use: fixed axis pushed to
    +/- half-extent, the other two axes spanning the face, ordered so the
    cross product of the returned sides points out of the box.
    """
    c = np.asarray(lamp.c, dtype=np.float64)
    ax = np.asarray(lamp.axes, dtype=np.float64)
    rects = []
    for fixed, (a, b) in ((0, (1, 2)), (1, (2, 0)), (2, (0, 1))):
        for sign in (1.0, -1.0):
            center = c + 0.5 * sign * ax[fixed]
            side_a, side_b = ax[a], ax[b]
            if np.dot(np.cross(side_a, side_b), sign * ax[fixed]) < 0:
                side_a, side_b = side_b, side_a
            rects.append((center, side_a, side_b))
    return rects


def window_rect(light: WindowLight):
    """(center, side_a, side_b) with a x b along the emitting normal."""
    x = np.asarray(light.x, dtype=np.float64)
    y = np.asarray(light.y, dtype=np.float64)
    return np.asarray(light.c, dtype=np.float64), x, y
