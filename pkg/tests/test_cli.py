"""CLI behavior: every subcommand is library calls plus file plumbing, so
these tests check the plumbing (artifacts, determinism, error contract) and
spot-check façade equivalence against direct library calls."""

import json
import os
import subprocess
import sys

import numpy as np
import pytest

from lumiedit import load_scene, save_scene
from lumiedit.cli import run
from lumiedit.optimize import sig_loss
from lumiedit.pfm import read_pfm, write_pfm
from lumiedit.render import compose_and_rerender, render_scene

from scenes import SUN_DIR, quad_lamp, scene_with, sun_window, tilted_lamp


@pytest.fixture(scope="module")
def lamp_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("lamp_scene")
    save_scene(scene_with(quad_lamp()), str(d))
    return str(d)


@pytest.fixture(scope="module")
def window_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("window_scene")
    save_scene(scene_with(sun_window()), str(d))
    return str(d)


def invoke(*argv, expect=0):
    """run() in-process, capturing stdout/stderr."""
    import io
    from contextlib import redirect_stderr, redirect_stdout

    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = run(list(argv))
    assert code == expect, f"exit {code}: {err.getvalue()!r}"
    return out.getvalue(), err.getvalue()


# ---------------------------------------------------------------------------
# render


def test_render_writes_all_artifacts(lamp_dir, tmp_path):
    out = str(tmp_path / "out")
    stdout, _ = invoke("render", "--scene", lamp_dir, "--out", out, "--spp", "8", "--seed", "3")
    names = set(os.listdir(out))
    assert {"direct_lamp_a.pfm", "shadow_lamp_a.pfm", "e_direct.pfm",
            "e_indirect.pfm", "e_total.pfm", "render.png", "manifest.json"} <= names
    report = json.loads(stdout)
    assert report["out"] == out
    man = json.load(open(os.path.join(out, "manifest.json")))
    assert man["seed"] == 3 and man["spp"] == 8
    with open(os.path.join(out, "render.png"), "rb") as f:
        assert f.read(8) == b"\x89PNG\r\n\x1a\n"


def test_render_same_seed_byte_identical(lamp_dir, tmp_path):
    a, b = str(tmp_path / "a"), str(tmp_path / "b")
    invoke("render", "--scene", lamp_dir, "--out", a, "--spp", "8", "--seed", "7")
    invoke("render", "--scene", lamp_dir, "--out", b, "--spp", "8", "--seed", "7")
    for name in ("e_total.pfm", "e_direct.pfm", "render.png"):
        ba = open(os.path.join(a, name), "rb").read()
        bb = open(os.path.join(b, name), "rb").read()
        assert ba == bb, name


def test_render_matches_library_call(lamp_dir, tmp_path):
    out = str(tmp_path / "out")
    invoke("render", "--scene", lamp_dir, "--out", out, "--spp", "8", "--seed", "5")
    scene = load_scene(lamp_dir)
    shading = render_scene(scene, spp=8, seed=5)
    np.testing.assert_array_equal(
        read_pfm(os.path.join(out, "e_total.pfm")), shading.e_total.astype(np.float32)
    )


def test_render_components_subset_limits_artifacts(lamp_dir, tmp_path):
    out = str(tmp_path / "out")
    invoke("render", "--scene", lamp_dir, "--out", out, "--spp", "4", "--seed", "0",
           "--components", "direct")
    names = set(os.listdir(out))
    assert "e_direct.pfm" in names and "e_total.pfm" in names
    assert not any(n.startswith("shadow_") for n in names)
    assert "e_indirect.pfm" not in names


def test_render_component_single_pfm(lamp_dir, tmp_path):
    out = str(tmp_path / "one.pfm")
    invoke("render-component", "--scene", lamp_dir, "--component", "direct",
           "--light", "lamp_a", "--out", out, "--spp", "8", "--seed", "5")
    scene = load_scene(lamp_dir)
    shading = render_scene(scene, spp=8, seed=5, with_shadows=False, with_indirect=False)
    np.testing.assert_array_equal(read_pfm(out), shading.components["lamp_a"].astype(np.float32))


def test_render_unknown_scene_exits_one(tmp_path):
    import io
    from contextlib import redirect_stderr, redirect_stdout

    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = run(["render", "--scene", str(tmp_path / "nope"), "--out", str(tmp_path / "o")])
    assert code == 1
    lines = [l for l in err.getvalue().splitlines() if l]
    assert len(lines) == 1
    assert "error" in json.loads(lines[0])


# ---------------------------------------------------------------------------
# edit + façade equivalence


def test_edit_disable_then_render_excludes_light(lamp_dir, tmp_path):
    edited = str(tmp_path / "off.json")
    invoke("edit", "--scene", lamp_dir, "--disable", "lamp_a", "--out", edited)
    out = str(tmp_path / "out")
    invoke("render", "--scene", edited, "--out", out, "--spp", "4", "--seed", "1")
    assert read_pfm(os.path.join(out, "e_direct.pfm")).max() == 0.0


def test_edit_set_intensity_round_trips(window_dir, tmp_path):
    edited = str(tmp_path / "s2.json")
    invoke("edit", "--scene", window_dir, "--out", edited,
           "--set", "lights[win_c].radiance.sun.lam=123.5",
           "--set", "lights[win_c].radiance.sky.w=1,2,3")
    desc = json.load(open(edited))
    (light,) = desc["lights"]
    assert light["radiance"]["sun"]["lam"] == 123.5
    assert light["radiance"]["sky"]["w"] == [1.0, 2.0, 3.0]
    # raster paths were re-rooted so the edited descriptor still loads
    scene = load_scene(edited)
    assert scene.light("win_c").radiance.sun.lam == 123.5


def test_edit_add_and_remove(lamp_dir, tmp_path):
    extra = str(tmp_path / "extra.json")
    json.dump(tilted_lamp().to_dict(), open(extra, "w"))
    added = str(tmp_path / "added.json")
    invoke("edit", "--scene", lamp_dir, "--add", extra, "--out", added)
    assert [l["id"] for l in json.load(open(added))["lights"]] == ["lamp_a", "lamp_b"]
    removed = str(tmp_path / "removed.json")
    invoke("edit", "--scene", added, "--remove", "lamp_a", "--out", removed)
    assert [l["id"] for l in json.load(open(removed))["lights"]] == ["lamp_b"]


def test_edit_rejects_physically_invalid(window_dir, tmp_path):
    import io
    from contextlib import redirect_stderr, redirect_stdout

    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = run(["edit", "--scene", window_dir, "--out", str(tmp_path / "bad.json"),
                    "--set", "lights[win_c].radiance.sun.lam=-5"])
    assert code == 1
    assert "lam" in json.loads(err.getvalue().strip())["error"]


# ---------------------------------------------------------------------------
# diff


def test_diff_identical_prints_zero(lamp_dir, tmp_path):
    p = str(tmp_path / "x.pfm")
    write_pfm(p, np.random.default_rng(0).random((5, 4, 3)).astype(np.float32))
    for metric in ("l1", "l2", "sig"):
        stdout, _ = invoke("diff", p, p, "--metric", metric)
        assert float(stdout.strip()) == 0.0


def test_diff_matches_library_metrics(tmp_path):
    rng = np.random.default_rng(4)
    a = rng.random((6, 5, 3)).astype(np.float32) + 0.1
    b = rng.random((6, 5, 3)).astype(np.float32) + 0.1
    pa, pb = str(tmp_path / "a.pfm"), str(tmp_path / "b.pfm")
    write_pfm(pa, a)
    write_pfm(pb, b)
    out, _ = invoke("diff", pa, pb, "--metric", "l1")
    assert float(out) == pytest.approx(np.mean(np.abs(a.astype(np.float64) - b)), rel=1e-10)
    out, _ = invoke("diff", pa, pb, "--metric", "l2")
    assert float(out) == pytest.approx(np.mean((a.astype(np.float64) - b) ** 2), rel=1e-10)
    out, _ = invoke("diff", pa, pb, "--metric", "sig")
    assert float(out) == pytest.approx(sig_loss(a, b), rel=1e-9)


def test_diff_shape_mismatch_errors(tmp_path):
    import io
    from contextlib import redirect_stderr, redirect_stdout

    pa, pb = str(tmp_path / "a.pfm"), str(tmp_path / "b.pfm")
    write_pfm(pa, np.zeros((4, 4, 3), np.float32))
    write_pfm(pb, np.zeros((5, 4, 3), np.float32))
    with redirect_stdout(io.StringIO()), redirect_stderr(io.StringIO()) as err:
        assert run(["diff", pa, pb]) == 1


# ---------------------------------------------------------------------------
# fit-window / refine plumbing (short budgets; recovery quality is covered by
# the optimizer tests and the acceptance suite)


def test_fit_window_emits_light_json_and_history(window_dir, tmp_path):
    scene = load_scene(window_dir)
    shading = render_scene(scene, spp=16, seed=5, with_shadows=False, with_indirect=False)
    target = str(tmp_path / "target.pfm")
    write_pfm(target, shading.e_direct.astype(np.float32))
    out, hist = str(tmp_path / "fit.json"), str(tmp_path / "fit.csv")
    hint = ",".join(f"{v:.8f}" for v in SUN_DIR)
    invoke("fit-window", "--scene", window_dir, "--target", target, "--light", "win_c",
           "--sun-hint", hint, "--out", out, "--history", hist,
           "--iters", "10", "--spp", "8", "--seed", "2")
    fitted = json.load(open(out))
    assert fitted["type"] == "window" and fitted["id"] == "win_c"
    assert set(fitted["radiance"]) == {"sun", "sky", "ground"}
    rows = open(hist).read().splitlines()
    assert rows[0] == "iteration,total,render_l1"
    assert len(rows) == 11
    it, total, term = rows[1].split(",")
    assert it == "0" and float(total) == float(term)


def test_refine_emits_lights_json_and_history(tmp_path):
    scene = scene_with(quad_lamp())
    shading = render_scene(scene, spp=16, seed=3)
    _, ldr = compose_and_rerender(scene, shading)
    scene.image = ldr
    d = str(tmp_path / "scene")
    save_scene(scene, d)
    out, hist = str(tmp_path / "ref.json"), str(tmp_path / "ref.csv")
    invoke("refine", "--scene", d, "--iters", "4", "--spp", "8", "--seed", "3",
           "--out", out, "--history", hist)
    lights = json.load(open(out))["lights"]
    assert [l["id"] for l in lights] == ["lamp_a"]
    rows = open(hist).read().splitlines()
    assert rows[0] == "iteration,total,render_mse"
    assert len(rows) == 5


# ---------------------------------------------------------------------------
# process-level entry point


def test_console_entry_point_runs():
    r = subprocess.run(
        [sys.executable, "-m", "lumiedit.cli", "--help"], capture_output=True, text=True
    )
    assert r.returncode == 0
    for name in ("render", "fit-window", "refine", "edit", "diff", "serve"):
        assert name in r.stdout


def test_threads_env_fallback(lamp_dir, tmp_path, monkeypatch):
    # LUMIEDIT_THREADS must not change results, only worker count
    a, b = str(tmp_path / "a"), str(tmp_path / "b")
    invoke("render", "--scene", lamp_dir, "--out", a, "--spp", "8", "--seed", "2",
           "--threads", "1")
    monkeypatch.setenv("LUMIEDIT_THREADS", "3")
    invoke("render", "--scene", lamp_dir, "--out", b, "--spp", "8", "--seed", "2")
    assert open(os.path.join(a, "e_total.pfm"), "rb").read() == \
        open(os.path.join(b, "e_total.pfm"), "rb").read()
