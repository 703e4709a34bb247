"""Benchmark: compiled vs pure Python orbit kernel on a potential grid.

Usage: python benchmarks/bench_green.py [--nx 128] [--n-max 60] [--family skew|squaring]
"""

import argparse
import time

import numpy as np

from degreelab import models as M
from degreelab._kernels import available_backends, backend_module
from degreelab.currents import slice_points
from degreelab.models import _lift_coeff_scale


def build(family):
    if family == "squaring":
        return M.build_model("CremonaComposite",
                             {"factors": [{"kind": "power", "exponent": 2}]})
    return M.build_model("PolynomialSkew", {"q_coeffs": [[0, 0, 0, 1], [0], [1]]})


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--nx", type=int, default=128)
    ap.add_argument("--n-max", type=int, default=60)
    ap.add_argument("--family", choices=("skew", "squaring"), default="skew")
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    model = build(args.family)
    slice_spec = {"kind": "p2", "base": [0, 0, 1], "u": [1, 0, 0],
                  "v": [0, 1, 0], "s_range": [-2, 2], "t_range": [-2, 2]}
    _, _, pts = slice_points(slice_spec, (args.nx, args.nx))
    (e0, c0), (e1, c1), (e2, c2) = model.lift_arrays()
    delta = model.algebraic_degree
    lam1 = float(model.pullback_matrix[0][0])
    scale = _lift_coeff_scale(model)

    backends = available_backends()
    print(f"family={args.family} grid={args.nx}x{args.nx} n_max={args.n_max} "
          f"backends={backends}")
    results = {}
    values = {}
    for name in backends:
        mod = backend_module(name)
        best = None
        for _ in range(args.repeats):
            t0 = time.perf_counter()
            out = mod.green_grid(e0, c0, e1, c1, e2, c2, delta, lam1, pts,
                                 1e-12, args.n_max, 1e-12, scale)
            dt = time.perf_counter() - t0
            best = dt if best is None else min(best, dt)
        results[name] = best
        values[name] = out[0]
        cells_per_s = args.nx * args.nx / best
        print(f"  {name:9s} {best:8.3f} s   {cells_per_s:10.0f} cells/s")
    if len(backends) == 2:
        diff = float(np.nanmax(np.abs(values["python"] - values["compiled"])))
        print(f"  speedup: {results['python'] / results['compiled']:.1f}x, "
              f"max |python - compiled| = {diff:.3e}")


if __name__ == "__main__":
    main()
