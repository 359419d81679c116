"""Compare the compiled ray-marching kernel against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--size 128] [--dims 32,32,64]
"""

import argparse
import time

import numpy as np

from mantlevis import _kernels
from mantlevis.brush import BrushSet
from mantlevis.grid import ShellGrid
from mantlevis.preprocess import add_derived
from mantlevis.render import RenderState, default_camera, diverging_tf, march_image, pass_jitter
from mantlevis.synthetic import SyntheticScenario, generate_time_step


def build_scene(dims, width):
    grid = ShellGrid(*dims)
    vol = add_derived(generate_time_step(SyntheticScenario(kind="plume"), grid, 0.0))
    cam = default_camera(grid, width=width, height=width)
    f = vol.scalars["temp_anomaly"]
    tf = diverging_tf("temp_anomaly", f.v_min, f.v_max)
    return vol, cam, tf


def bench(backend, vol, cam, tf, brush, repeats):
    state = RenderState(step_index=0, brush=brush, transfer=tf, camera=cam, generation=1)
    jitter = pass_jitter(cam.width * cam.height, 0)
    march_image(state, vol, jitter, backend=backend)  # warm up
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        rgba, _, _ = march_image(state, vol, jitter, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best, rgba


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--size", type=int, default=128, help="image width = height")
    ap.add_argument("--dims", default="32,32,64")
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()
    dims = tuple(int(d) for d in args.dims.split(","))

    vol, cam, tf = build_scene(dims, args.size)
    scenes = {
        "no brush": BrushSet.create(),
        "2 vars": BrushSet.create({"temp_anomaly": (-1e6, 1e6), "depth": (0.0, 2891.0)}),
        "4 vars": BrushSet.create(
            {
                "temp_anomaly": (-1e6, 1e6),
                "depth": (0.0, 2891.0),
                "z": (-7000.0, 7000.0),
                "expansivity": (-2.0, 2.0),
            }
        ),
    }

    backends = ["python"]
    try:
        _kernels.get_backend("native")
        backends.append("native")
    except Exception:
        print("compiled kernel not available; timing the fallback only")

    print(f"grid {dims}, image {args.size}x{args.size}, best of {args.repeats}")
    header = f"{'scene':12s}" + "".join(f"{b:>12s}" for b in backends) + f"{'speedup':>10s}"
    print(header)
    for label, brush in scenes.items():
        row = f"{label:12s}"
        results = {}
        for b in backends:
            t, rgba = bench(b, vol, cam, tf, brush, args.repeats)
            results[b] = (t, rgba)
            row += f"{t * 1000:10.1f}ms"
        if len(backends) == 2:
            (tp, ra), (tn, rb) = results["python"], results["native"]
            assert np.allclose(ra, rb, atol=1e-5), "backends disagree"
            row += f"{tp / tn:9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
