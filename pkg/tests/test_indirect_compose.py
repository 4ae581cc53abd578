"""One-bounce gather and final composition."""

import numpy as np
import pytest

import oracles
import scenes
from lumiedit.render import (
    ShadingSet,
    build_depth_mesh,
    build_gather_plan,
    compose_and_rerender,
    compose_direct,
    encode_png,
    indirect_one_bounce,
    render_manifest,
    render_scene,
)

PATCH = (8, 16, 12, 20)  # wall emitter rows/cols in the corner scene


def patch_e_direct(scene, patch=PATCH, value=1.0):
    e = np.zeros(scene.shape + (3,))
    r0, r1, c0, c1 = patch
    e[r0:r1, c0:c1] = value
    return e


# ---------------------------------------------------------------------------
# gather


def test_black_albedo_gives_zero():
    scene = scenes.corner_scene()
    scene.albedo[:] = 0.0
    e_ind = indirect_one_bounce(scene, patch_e_direct(scene), n_gather=32, seed=0)
    assert np.all(e_ind == 0.0)


def test_albedo_scaling_is_exactly_linear():
    scene = scenes.corner_scene()
    e_d = patch_e_direct(scene)
    plan = build_gather_plan(scene, n_gather=64, seed=0)
    full = plan.apply(e_d, scene.albedo)
    half = plan.apply(e_d, scene.albedo * 0.5)
    assert np.allclose(half, 0.5 * full, rtol=1e-13, atol=0)


def test_gather_matches_patch_form_factor_oracle():
    # Lit patch on the wall, dark receivers on the ramp: the gather must
    # reproduce the continuum transfer integral of a diffuse emitter with
    # radiance albedo*E_d/pi over the patch rectangle.
    scene = scenes.corner_scene()
    scene.albedo[:] = 1.0
    e_d = patch_e_direct(scene)
    e_ind = indirect_one_bounce(scene, e_d, n_gather=10_000, seed=0)

    r0, r1, c0, c1 = PATCH
    px = scene.camera.pixel_scale * scene.depth[r0, c0]
    centers = scene.points()[r0:r1, c0:c1]
    c = centers.reshape(-1, 3).mean(axis=0)
    x = np.array([(c1 - c0) * px, 0.0, 0.0])
    y = np.array([0.0, (r1 - r0) * px, 0.0])
    radiance = oracles.lambertian_radiance(np.full(3, 1.0 / np.pi))

    rows, cols = slice(28, 31), slice(12, 20)
    pts = scene.points()[rows, cols].reshape(-1, 3)
    nrm = scene.normal[rows, cols].reshape(-1, 3)
    ref = np.stack(
        [oracles.irradiance_from_rect(p, n, c, x, y, radiance, n=512) for p, n in zip(pts, nrm)]
    )
    got = e_ind[rows, cols].reshape(-1, 3)
    assert np.all(ref[:, 0] > 0)
    rel = abs(got.mean() - ref.mean()) / ref.mean()
    assert rel < 0.05


def test_indirect_monotone_in_albedo():
    scene = scenes.corner_scene()
    e_d = patch_e_direct(scene)
    rng = np.random.default_rng(11)
    hi = np.full(scene.shape + (3,), 0.8)
    lo = hi * rng.uniform(0.3, 0.9, size=scene.shape + (3,))
    plan = build_gather_plan(scene, n_gather=64, seed=0)
    e_hi = plan.apply(e_d, hi)
    e_lo = plan.apply(e_d, lo)
    assert np.all(e_lo <= e_hi + 1e-15)
    assert np.all(e_hi >= 0.0)


def test_gather_plan_reused_by_indirect_entry_point():
    scene = scenes.corner_scene()
    e_d = patch_e_direct(scene)
    plan = build_gather_plan(scene, n_gather=48, seed=5)
    a = indirect_one_bounce(scene, e_d, plan=plan)
    b = indirect_one_bounce(scene, e_d, n_gather=48, seed=5)
    assert np.array_equal(a, b)


def test_gather_torch_apply_matches_numpy():
    torch = pytest.importorskip("torch")
    scene = scenes.corner_scene()
    e_d = patch_e_direct(scene)
    plan = build_gather_plan(scene, n_gather=64, seed=0)
    ref = plan.apply(e_d, scene.albedo)
    got = plan.apply_torch(
        torch.tensor(e_d, dtype=torch.float64),
        torch.tensor(scene.albedo, dtype=torch.float64),
    )
    assert np.allclose(got.numpy(), ref, rtol=1e-12, atol=1e-15)


# ---------------------------------------------------------------------------
# composition


def two_light_scene():
    scene = scenes.wall_scene(h=8, w=8)
    scene.lights = [scenes.quad_lamp(), scenes.tilted_lamp()]
    return scene


def test_direct_composition_identity():
    scene = two_light_scene()
    shading = render_scene(scene, spp=8, seed=0, estimator="area", shadow_spp=4, n_gather=16)
    manual = compose_direct(shading.components, shading.shadows)
    assert np.max(np.abs(shading.e_direct - manual)) < 1e-6
    assert np.allclose(shading.e_total, shading.e_direct + shading.e_indirect, atol=0)


def test_disabling_light_subtracts_exactly_its_term():
    scene = two_light_scene()
    both = render_scene(scene, spp=8, seed=0, estimator="area", shadow_spp=4, n_gather=16)
    scene.lights[1].enabled = False
    one = render_scene(scene, spp=8, seed=0, estimator="area", shadow_spp=4, n_gather=16)
    lid = scene.lights[1].light_id
    term = both.components[lid] * both.shadows[lid][..., None]
    # adding the term back reproduces the two-light sum to the bit; the
    # subtracted form only matches to rounding because fp addition re-rounds
    assert np.array_equal(one.e_direct + term, both.e_direct)
    assert np.allclose(one.e_direct, both.e_direct - term, rtol=0, atol=1e-12)
    assert np.array_equal(one.components["lamp_a"], both.components["lamp_a"])


def test_all_lights_disabled_renders_black():
    scene = two_light_scene()
    for l in scene.lights:
        l.enabled = False
    shading = render_scene(scene, spp=8, seed=0)
    e, ldr = compose_and_rerender(scene, shading)
    assert np.all(e == 0.0) and np.all(shading.e_indirect == 0.0) and np.all(ldr == 0.0)


def test_single_light_unit_shadow_passthrough():
    scene = scenes.wall_scene(h=8, w=8)
    scene.lights = [scenes.quad_lamp()]
    shading = render_scene(
        scene, spp=8, seed=0, estimator="area", with_shadows=False, with_indirect=False
    )
    assert np.array_equal(shading.e_total, shading.components["lamp_a"])


def test_rerender_clamps_saturated_pixels():
    scene = scenes.wall_scene(h=8, w=8)
    lamp = scenes.quad_lamp()
    lamp.w = lamp.w * 1e4
    scene.lights = [lamp]
    shading = render_scene(scene, spp=8, seed=0, estimator="area", with_shadows=False)
    e, ldr = compose_and_rerender(scene, shading)
    assert np.max(e * scene.albedo) > 1.0
    assert np.max(ldr) == 1.0 and np.min(ldr) >= 0.0


def test_render_scene_byte_identical_across_threads():
    scene = scenes.plate_scene(h=16, w=16, plate=(6, 10, 6, 10))
    scene.lights = [scenes.quad_lamp()]
    a = render_scene(scene, spp=8, seed=2, threads=1, shadow_spp=8, n_gather=32)
    b = render_scene(scene, spp=8, seed=2, threads=4, shadow_spp=8, n_gather=32)
    assert np.array_equal(a.e_total, b.e_total)
    assert np.array_equal(a.shadows["lamp_a"], b.shadows["lamp_a"])


def test_manifest_fields():
    scene = two_light_scene()
    shading = render_scene(scene, spp=8, seed=1, estimator="mis", shadow_spp=4, n_gather=16)
    m = render_manifest(shading)
    assert m["seed"] == 1 and m["spp"] == 8 and m["estimator"] == "mis"
    assert set(m["sample_counts"]) == {"lamp_a", "lamp_b"}
    assert all(v > 0 for v in m["timings"].values() if v) or m["timings"]


def test_png_encoding_shape_and_signature():
    rng = np.random.default_rng(0)
    img = rng.uniform(size=(5, 7, 3))
    data = encode_png(img)
    assert data[:8] == b"\x89PNG\r\n\x1a\n"
    # IHDR payload: width, height big-endian at fixed offsets
    assert int.from_bytes(data[16:20], "big") == 7
    assert int.from_bytes(data[20:24], "big") == 5
    assert data.rstrip(b"\x00")[-8:-4] == b"IEND" or b"IEND" in data[-16:]
