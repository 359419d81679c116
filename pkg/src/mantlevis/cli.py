"""Command-line entry points: generate, preprocess, render, serve."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import mvol
from .brush import BrushSet, preset
from .grid import ShellGrid
from .pathlines import generate_pathlines, write_mpath
from .preprocess import add_derived, build_lod, extract_samples, write_msamp
from .render import Camera, RenderState, default_camera, diverging_tf, encode_png, render_volume
from .synthetic import SyntheticScenario, generate_synthetic


class CliError(Exception):
    pass


def _parse_dims(text):
    parts = text.split(",")
    if len(parts) != 3:
        raise CliError(f"--dims expects R,LAT,LON, got {text!r}")
    return tuple(int(p) for p in parts)


def _parse_size(text):
    w, _, h = text.partition("x")
    return int(w), int(h)


def cmd_generate(args):
    scenario = SyntheticScenario(kind=args.scenario, seed=args.seed)
    n_r, n_lat, n_lon = _parse_dims(args.dims)
    grid = ShellGrid(n_r=n_r, n_lat=n_lat, n_lon=n_lon)
    times = [args.spacing * i for i in range(args.steps)]
    volumes = generate_synthetic(scenario, grid, times)
    mvol.save_series(volumes, args.out)
    print(f"wrote {len(volumes)} steps to {args.out}")
    return 0


def cmd_preprocess(args):
    in_dir = Path(args.input)
    if not in_dir.is_dir() or not (in_dir / mvol.INDEX_NAME).exists():
        raise CliError(f"input directory {in_dir} has no series index")
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)

    series = [add_derived(v) for v in mvol.load_series(in_dir)]
    names = mvol.save_series(series, out_dir)
    for i, (v, name) in enumerate(zip(series, names)):
        pyramid = build_lod(v)
        mvol.save_volume(pyramid.level(1), out_dir / f"{name}.L1")
        mvol.save_volume(pyramid.level(2), out_dir / f"{name}.L2")
        table = extract_samples(v, cap=args.samples, seed=args.seed)
        (out_dir / f"samples_{i:04d}.msamp").write_text(write_msamp(table), encoding="utf-8")
    lines = generate_pathlines(series)
    (out_dir / "pathlines.mpath").write_bytes(write_mpath(lines))
    print(f"preprocessed {len(series)} steps, {len(lines)} pathlines -> {out_dir}")
    return 0


def _load_render_state(args, dataset):
    if args.preset:
        p = preset(args.preset)
        b = p.brush
        lo, hi = dataset.variable_ranges.get(p.color_variable, (0.0, 1.0))
        tf = diverging_tf(p.color_variable, lo, hi)
    elif args.brush:
        obj = json.loads(Path(args.brush).read_text(encoding="utf-8"))
        b = BrushSet.from_json_obj(obj.get("brush", obj))
        var = obj.get("color_variable", "temp_anomaly")
        lo, hi = dataset.variable_ranges.get(var, (0.0, 1.0))
        tf = diverging_tf(var, lo, hi)
    else:
        b = BrushSet.create()
        lo, hi = dataset.variable_ranges.get("temp_anomaly", (0.0, 1.0))
        tf = diverging_tf("temp_anomaly", lo, hi)

    width, height = _parse_size(args.size)
    if args.camera:
        cam = Camera.from_json_obj(json.loads(Path(args.camera).read_text(encoding="utf-8")))
        cam = Camera(
            eye=cam.eye, look_at=cam.look_at, up=cam.up, fov_deg=cam.fov_deg, width=width, height=height
        )
    else:
        cam = default_camera(dataset.grid, width=width, height=height)
    return RenderState(
        step_index=args.step, brush=b, transfer=tf, camera=cam, generation=1, pass_budget=args.passes
    )


def cmd_render(args):
    from .service import Dataset

    data_dir = args.data or os.environ.get("MANTLEVIS_DATA")
    if not data_dir:
        raise CliError("--data (or MANTLEVIS_DATA) is required")
    dataset = Dataset(data_dir)
    if not (0 <= args.step < dataset.n_steps):
        raise CliError(f"--step {args.step} out of range (dataset has {dataset.n_steps} steps)")
    state = _load_render_state(args, dataset)
    frame = render_volume(state, dataset.pyramid(args.step), passes=args.passes)
    Path(args.out).write_bytes(encode_png(frame.display()))
    print(f"rendered step {args.step} with {args.passes} passes -> {args.out}")
    return 0


def cmd_serve(args):
    import uvicorn

    from .service import create_app

    data_dir = args.data or os.environ.get("MANTLEVIS_DATA")
    app = create_app(data_dir=data_dir, pass_budget=args.passes)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="mantlevis")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic volume series")
    g.add_argument("--scenario", required=True, choices=("plume", "slab", "rigid_rotation", "convection_cells"))
    g.add_argument("--seed", type=int, default=42)
    g.add_argument("--dims", default="32,32,64", help="R,LAT,LON node counts")
    g.add_argument("--steps", type=int, default=12)
    g.add_argument("--spacing", type=float, default=2.0, help="Myr between steps")
    g.add_argument("--out", required=True)
    g.set_defaults(fn=cmd_generate)

    p = sub.add_parser("preprocess", help="LOD levels, derived variables, samples, pathlines")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--levels", type=int, default=2, help="extra LOD levels (fixed at 2)")
    p.add_argument("--samples", type=int, default=100000)
    p.add_argument("--seed", type=int, default=42)
    p.set_defaults(fn=cmd_preprocess)

    r = sub.add_parser("render", help="batch still render to PNG")
    r.add_argument("--data")
    r.add_argument("--step", type=int, default=0)
    r.add_argument("--preset")
    r.add_argument("--brush", help="JSON file with a brush (and optional color_variable)")
    r.add_argument("--camera", help="JSON camera file")
    r.add_argument("--passes", type=int, default=4)
    r.add_argument("--size", default="256x256")
    r.add_argument("--out", required=True)
    r.set_defaults(fn=cmd_render)

    s = sub.add_parser("serve", help="start the interactive protocol endpoint")
    s.add_argument("--data")
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=8747)
    s.add_argument("--passes", type=int, default=8)
    s.set_defaults(fn=cmd_serve)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # one-line diagnostic per failure
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
