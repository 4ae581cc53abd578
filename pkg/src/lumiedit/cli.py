"""Command-line entry points for rendering, fitting, refinement, and editing.

The CLI is a thin façade: every subcommand is a couple of library calls, and
anything it does is reachable through those calls with identical results.
All randomness enters through --seed; worker counts come from --threads or
the LUMIEDIT_THREADS environment variable, so runs are byte-reproducible.

On failure every subcommand exits 1 after printing a single JSON line
{"error": "..."} to stderr.
"""

import argparse
import csv
import dataclasses
import json
import os
import re
import sys

import numpy as np

from .lightgeom import light_from_dict
from .optimize import OptimConfig, fit_window, loss_render_direct, refine_lights, sig_loss
from .pfm import read_pfm, write_pfm
from .render import compose_and_rerender, render_scene, write_manifest, write_png
from .scenecore import load_scene

COMPONENTS = ("direct", "shadow", "indirect")


class CLIError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse prints multi-line usage and exits 2; the contract is a
    # single-line error and exit 1, so route parse failures through CLIError
    def error(self, message):
        raise CLIError(f"{self.prog}: {message}")


def _threads(args):
    if getattr(args, "threads", None) is not None:
        return args.threads
    env = os.environ.get("LUMIEDIT_THREADS")
    return int(env) if env else None


def _parse_components(text):
    comps = tuple(c.strip() for c in text.split(",") if c.strip())
    for c in comps:
        if c not in COMPONENTS:
            raise CLIError(f"unknown component {c!r}; expected subset of {','.join(COMPONENTS)}")
    if not comps:
        raise CLIError("--components given but empty")
    return comps


def _parse_vec3(text, flag):
    parts = text.split(",")
    if len(parts) != 3:
        raise CLIError(f"{flag} expects x,y,z")
    try:
        return np.array([float(p) for p in parts], dtype=np.float64)
    except ValueError:
        raise CLIError(f"{flag} expects three numbers, got {text!r}")


def _write_history(path, history, term_name):
    """Loss-history CSV: iteration, total, and the per-term columns.

    Both descent objectives are single-term, so there is exactly one term
    column and it equals the total.
    """
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["iteration", "total", term_name])
        for i, v in enumerate(history):
            w.writerow([i, repr(float(v)), repr(float(v))])


def _optim_config(args, default_lr):
    return OptimConfig(
        lr=args.lr if args.lr is not None else default_lr,
        max_iters=args.iters,
        spp=args.spp,
        seed=args.seed,
    )


# ---------------------------------------------------------------------------
# subcommands


def cmd_render(args):
    scene = load_scene(args.scene)
    comps = _parse_components(args.components) if args.components else COMPONENTS
    shading = render_scene(
        scene,
        spp=args.spp,
        seed=args.seed,
        estimator=args.estimator,
        threads=_threads(args),
        with_shadows="shadow" in comps,
        with_indirect="indirect" in comps,
    )
    os.makedirs(args.out, exist_ok=True)
    written = []

    def emit(name, raster):
        write_pfm(os.path.join(args.out, name), np.asarray(raster, dtype=np.float32))
        written.append(name)

    if "direct" in comps:
        for lid, e in shading.components.items():
            emit(f"direct_{lid}.pfm", e)
        emit("e_direct.pfm", shading.e_direct)
    if "shadow" in comps:
        for lid, s in shading.shadows.items():
            emit(f"shadow_{lid}.pfm", s)
    if "indirect" in comps:
        emit("e_indirect.pfm", shading.e_indirect)
    emit("e_total.pfm", shading.e_total)
    _, ldr = compose_and_rerender(scene, shading)
    write_png(os.path.join(args.out, "render.png"), ldr)
    written.append("render.png")
    write_manifest(os.path.join(args.out, "manifest.json"), shading)
    written.append("manifest.json")
    print(json.dumps({"out": args.out, "written": written}))
    return 0


def cmd_render_component(args):
    """Alias of `render --components ...` that writes exactly one PFM."""
    scene = load_scene(args.scene)
    kind = args.component
    shading = render_scene(
        scene,
        spp=args.spp,
        seed=args.seed,
        estimator=args.estimator,
        threads=_threads(args),
        with_shadows=kind in ("shadow", "total"),
        with_indirect=kind in ("indirect", "total"),
    )
    if kind in ("direct", "shadow") and args.light:
        table = shading.components if kind == "direct" else shading.shadows
        if args.light not in table:
            raise CLIError(f"no enabled light with id {args.light!r}")
        raster = table[args.light]
    elif kind == "direct":
        raster = shading.e_direct
    elif kind == "shadow":
        raise CLIError("--component shadow requires --light")
    elif kind == "indirect":
        raster = shading.e_indirect
    else:
        raster = shading.e_total
    write_pfm(args.out, np.asarray(raster, dtype=np.float32))
    print(json.dumps({"out": args.out, "component": kind}))
    return 0


def cmd_fit_window(args):
    scene = load_scene(args.scene)
    window = scene.light(args.light)
    if window.kind != "window":
        raise CLIError(f"light {args.light!r} is a {window.kind}, fit-window needs a window")
    target = read_pfm(args.target).astype(np.float64)
    hint = _parse_vec3(args.sun_hint, "--sun-hint")
    cfg = _optim_config(args, default_lr=1e-2)
    radiance, history = fit_window(scene, target, window, hint, cfg)
    fitted = dataclasses.replace(window, radiance=radiance)
    with open(args.out, "w") as f:
        json.dump(fitted.to_dict(), f, indent=2)
    if args.history:
        _write_history(args.history, history, "render_l1")
    print(json.dumps({"out": args.out, "iterations": len(history), "final_loss": history[-1]}))
    return 0


def cmd_refine(args):
    scene = load_scene(args.scene)
    image = read_pfm(args.image).astype(np.float64) if args.image else None
    cfg = _optim_config(args, default_lr=1e-2)
    lights, history = refine_lights(
        scene,
        input_image=image,
        config=cfg,
        unfreeze_sun_dir=args.unfreeze_sun_dir,
        estimator=args.estimator,
        threads=_threads(args),
    )
    with open(args.out, "w") as f:
        json.dump({"lights": [l.to_dict() for l in lights]}, f, indent=2)
    if args.history:
        _write_history(args.history, history, "render_mse")
    print(json.dumps({"out": args.out, "iterations": len(history), "final_loss": min(history)}))
    return 0


_SET_RE = re.compile(r"^lights\[([^\]]+)\]\.(.+)$")


def _parse_set_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        pass
    parts = text.split(",")
    try:
        return [float(p) for p in parts] if len(parts) > 1 else float(text)
    except ValueError:
        raise CLIError(f"cannot parse value {text!r}; use JSON or comma-separated numbers")


def _descriptor_path(scene_arg):
    if os.path.isdir(scene_arg):
        return os.path.join(scene_arg, "scene.json")
    return scene_arg


def _apply_set(desc, expr):
    m = _SET_RE.match(expr.split("=", 1)[0].strip())
    if m is None or "=" not in expr:
        raise CLIError(f"--set expects lights[id].path=value, got {expr!r}")
    lid, path = m.group(1), m.group(2)
    value = _parse_set_value(expr.split("=", 1)[1])
    light = _find_light(desc, lid)
    node = light
    keys = path.split(".")
    for k in keys[:-1]:
        if not isinstance(node, dict) or k not in node:
            raise CLIError(f"light {lid!r} has no field {path!r}")
        node = node[k]
    if not isinstance(node, dict) or keys[-1] not in node:
        raise CLIError(f"light {lid!r} has no field {path!r}")
    node[keys[-1]] = value
    return lid


def _find_light(desc, lid):
    for d in desc.get("lights", []):
        if d.get("id") == lid:
            return d
    raise CLIError(f"no light with id {lid!r}")


def cmd_edit(args):
    src = _descriptor_path(args.scene)
    with open(src) as f:
        desc = json.load(f)
    touched = set()
    for lid in args.disable or []:
        _find_light(desc, lid)["enabled"] = False
    for lid in args.enable or []:
        _find_light(desc, lid)["enabled"] = True
    for path in args.add or []:
        with open(path) as f:
            d = json.load(f)
        if any(l.get("id") == d.get("id") for l in desc.get("lights", [])):
            raise CLIError(f"light id {d.get('id')!r} already exists")
        desc.setdefault("lights", []).append(d)
        touched.add(d.get("id"))
    for lid in args.remove or []:
        _find_light(desc, lid)
        desc["lights"] = [l for l in desc["lights"] if l.get("id") != lid]
    for expr in args.set or []:
        touched.add(_apply_set(desc, expr))
    for d in desc.get("lights", []):
        if d.get("id") in touched:
            light_from_dict(d).validate()  # reject physically invalid edits

    # a descriptor references rasters relative to itself; keep those
    # references valid when the edited copy lands in another directory
    src_dir = os.path.dirname(os.path.abspath(src))
    out_dir = os.path.dirname(os.path.abspath(args.out)) or src_dir
    for table in ("rasters", "masks"):
        for key, rel in list((desc.get(table) or {}).items()):
            desc[table][key] = os.path.relpath(os.path.join(src_dir, rel), out_dir)
    with open(args.out, "w") as f:
        json.dump(desc, f, indent=2)
    print(json.dumps({"out": args.out, "lights": len(desc.get("lights", []))}))
    return 0


def cmd_diff(args):
    a = read_pfm(args.a).astype(np.float64)
    b = read_pfm(args.b).astype(np.float64)
    if a.shape != b.shape:
        raise CLIError(f"raster shapes differ: {a.shape} vs {b.shape}")
    if args.metric == "l1":
        v = loss_render_direct(a, b)
    elif args.metric == "l2":
        v = float(np.mean((a - b) ** 2))
    else:
        v = sig_loss(a, b)
    print(f"{v:.12g}")
    return 0


def cmd_serve(args):
    import uvicorn

    from .service import build_app

    scene = load_scene(args.scene)
    app = build_app(scene, threads=_threads(args), static_dir=args.ui)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_render_flags(p, spp=64):
    p.add_argument("--spp", type=int, default=spp)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--estimator", choices=("area", "angular", "mis"), default="mis")
    p.add_argument("--threads", type=int, default=None)


def _add_optim_flags(p):
    p.add_argument("--iters", type=int, default=2000)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--spp", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None)


def _build_parser():
    top = _Parser(prog="lumiedit", description=__doc__.splitlines()[0])
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", help="render all shading components of a scene")
    p.add_argument("--scene", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--components", default=None, help="comma subset of direct,shadow,indirect")
    _add_render_flags(p)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("render-component", help="render one component to a single PFM")
    p.add_argument("--scene", required=True)
    p.add_argument("--component", required=True, choices=("direct", "shadow", "indirect", "total"))
    p.add_argument("--light", default=None)
    p.add_argument("--out", required=True)
    _add_render_flags(p)
    p.set_defaults(func=cmd_render_component)

    p = sub.add_parser("fit-window", help="fit window radiance lobes to a target shading raster")
    p.add_argument("--scene", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--light", required=True)
    p.add_argument("--sun-hint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--history", default=None)
    _add_optim_flags(p)
    p.set_defaults(func=cmd_fit_window)

    p = sub.add_parser("refine", help="refine enabled lights against an input image")
    p.add_argument("--scene", required=True)
    p.add_argument("--image", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--history", default=None)
    p.add_argument("--unfreeze-sun-dir", action="store_true")
    p.add_argument("--estimator", choices=("area", "angular", "mis"), default="mis")
    _add_optim_flags(p)
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("edit", help="transform a scene descriptor (no rendering)")
    p.add_argument("--scene", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--set", action="append", metavar="lights[id].path=value")
    p.add_argument("--disable", action="append", metavar="id")
    p.add_argument("--enable", action="append", metavar="id")
    p.add_argument("--add", action="append", metavar="light.json")
    p.add_argument("--remove", action="append", metavar="id")
    p.set_defaults(func=cmd_edit)

    p = sub.add_parser("diff", help="print a scalar difference between two PFMs")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--metric", choices=("l1", "l2", "sig"), default="l1")
    p.set_defaults(func=cmd_diff)

    p = sub.add_parser("serve", help="start the HTTP editing service")
    p.add_argument("--scene", required=True)
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--ui", default=None, help="directory of static editor files to serve at /")
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_serve)
    return top


def run(argv=None) -> int:
    """Parse argv, dispatch, and map any failure to exit code 1."""
    try:
        args = _build_parser().parse_args(argv)
        return args.func(args)
    except SystemExit as e:  # argparse --help
        return 0 if e.code in (0, None) else 1
    except Exception as e:
        line = " ".join(str(e).split()) or type(e).__name__
        print(json.dumps({"error": line}), file=sys.stderr)
        return 1


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
