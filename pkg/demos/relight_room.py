"""Relight a synthetic room: render it, then change the lights and re-render.

Builds a 48x48 scene from scratch (a wall with a floating plate in front of
it), places a box lamp that throws the plate's shadow onto the wall plus a
window bringing in sun and sky, renders, and then applies two edits:

  * the lamp is switched off, and
  * the sun lobe is made four times brighter and twice as sharp.

Outputs land in demos/out/: before.png / after.png, the HDR irradiance of
both states, and the lamp's shadow raster on its own.

Run from the repository root after installing the package:

    python3 demos/relight_room.py
"""

import dataclasses
import json
import os

import numpy as np

from lumiedit.lightgeom import BoxLamp, SGLobe, WindowLight, WindowRadiance
from lumiedit.pfm import write_pfm
from lumiedit.render import compose_and_rerender, render_manifest, render_scene, write_png
from lumiedit.scenecore import CameraIntrinsics, Scene

OUT = os.path.join(os.path.dirname(__file__), "out")


def unit(v):
    v = np.asarray(v, dtype=np.float64)
    return v / np.linalg.norm(v)


def build_room(h=48, w=48) -> Scene:
    """Back wall meeting a 45-degree floor ramp, plus a floating plate.

    The ramp faces the wall, so one-bounce transfer between the two is
    nonzero; the plate at 1.5 m throws a hard shadow from the lamp.
    """
    cam = CameraIntrinsics(width=w, height=h, fov=np.pi / 3)
    wall_depth, corner_y = 3.0, -1.0
    y_img = cam.pixel_rays()[..., 1]
    d_ramp = (wall_depth - corner_y) / (1.0 - y_img)
    depth = np.where(d_ramp < wall_depth, d_ramp, wall_depth)
    is_ramp = d_ramp < wall_depth
    normal = np.zeros((h, w, 3))
    normal[..., 2] = 1.0
    normal[is_ramp] = np.array([0.0, 1.0, 1.0]) / np.sqrt(2.0)
    depth[14:24, 19:29] = 1.5
    normal[14:24, 19:29] = [0.0, 0.0, 1.0]
    albedo = np.full((h, w, 3), [0.55, 0.5, 0.45])
    return Scene(camera=cam, depth=depth, normal=normal, albedo=albedo).validate()


def build_lights():
    lamp = BoxLamp(
        light_id="desk_lamp",
        c=np.array([0.9, 0.7, -0.4]),
        axes=np.eye(3) * [0.25, 0.25, 0.05],
        w=np.array([6.0, 5.2, 4.0]),
    ).validate()
    window = WindowLight(
        light_id="window",
        c=np.array([-0.3, 0.2, 0.8]),
        x=np.array([0.9, 0.0, 0.0]),
        y=np.array([0.0, -0.8, 0.0]),
        radiance=WindowRadiance(
            sun=SGLobe(np.array([30.0, 27.0, 22.0]), 300.0, unit([0.25, 0.35, 1.0])),
            sky=SGLobe(np.array([1.5, 1.7, 2.4]), 2.0, np.array([0.0, 1.0, 0.0])),
            ground=SGLobe(np.array([0.6, 0.55, 0.4]), 1.5, np.array([0.0, -1.0, 0.0])),
        ),
    ).validate()
    return [lamp, window]


def report(tag, scene, shading):
    print(f"\n[{tag}] manifest: {json.dumps(render_manifest(shading))}")
    for lid, e in shading.components.items():
        shaded = e * shading.shadows[lid][..., None]
        print(f"  {lid:10s} mean direct irradiance {shaded.mean():8.4f}")
    print(f"  indirect   mean irradiance        {shading.e_indirect.mean():8.4f}")


def main():
    os.makedirs(OUT, exist_ok=True)
    scene = build_room()
    scene.lights = build_lights()

    shading = render_scene(scene, spp=128, seed=0)
    _, ldr = compose_and_rerender(scene, shading)
    write_png(os.path.join(OUT, "before.png"), ldr)
    write_pfm(os.path.join(OUT, "before_e_total.pfm"), shading.e_total.astype(np.float32))
    write_pfm(
        os.path.join(OUT, "lamp_shadow.pfm"),
        shading.shadows["desk_lamp"].astype(np.float32),
    )
    report("before", scene, shading)

    # edit 1: lamp off; edit 2: sharper, brighter sun
    lamp, window = scene.lights
    sun = window.radiance.sun
    brighter = dataclasses.replace(
        window,
        radiance=dataclasses.replace(
            window.radiance,
            sun=SGLobe(np.asarray(sun.w) * 4.0, sun.lam * 2.0, sun.d),
        ),
    ).validate()
    scene.lights = [dataclasses.replace(lamp, enabled=False), brighter]

    shading = render_scene(scene, spp=128, seed=0)
    _, ldr = compose_and_rerender(scene, shading)
    write_png(os.path.join(OUT, "after.png"), ldr)
    write_pfm(os.path.join(OUT, "after_e_total.pfm"), shading.e_total.astype(np.float32))
    report("after", scene, shading)

    print(f"\nwrote {OUT}/before.png and {OUT}/after.png")


if __name__ == "__main__":
    main()
