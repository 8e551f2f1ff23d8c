"""
Cross-check the closed-form evaluator against the spectral quadrature.

For k0 = 0 the generalized covariance is compared pointwise; for k0 >= 1 it is
only defined up to an even polynomial, so third differences along a line are
compared instead.

Run:  python3 demos/oracle_check.py
"""

import time

from spacetime_gc import ModelParams, gc_eval, oracle_point_k0, oracle_quadform
from spacetime_gc.oracle import alc_line_config
from spacetime_gc.validation import gc_quadform


def pointwise(params, points):
    print(f"k0 = 0: alpha1={params.alpha1:g}, nu={params.nu:.6g}")
    for r, s in points:
        t0 = time.perf_counter()
        o = oracle_point_k0(r, s, params)
        dt = time.perf_counter() - t0
        g = gc_eval(r, s, params)
        print(f"  r={r:5g} s={s:5g}  closed form {g.value:22.15g} [{g.branch.value}]"
              f"  quadrature {o.value:22.15g}  rel diff {abs(g.value - o.value) / abs(o.value):8.1e}"
              f"  ({dt:.2f} s)")


def differences(params, steps):
    print(f"k0 = {params.k0}: alpha1={params.alpha1:g}, nu={params.nu:.6g}, third differences")
    for dr, ds in steps:
        cfg = alc_line_config(2, dr, ds, params.d1, params.d2)
        o = oracle_quadform(cfg, params)
        g, _, _ = gc_quadform(cfg.x, cfg.y, cfg.weights, params)
        print(f"  dr={dr:4g} ds={ds:4g}  closed form {g:22.15g}  quadrature {o.value:22.15g}"
              f"  rel diff {abs(g - o.value) / abs(o.value):8.1e}")


if __name__ == "__main__":
    pointwise(ModelParams(2.0, 0.95), [(1.0, 1.0), (0.05, 3.0), (8.0, 0.02)])
    print()
    differences(ModelParams(2.0, 2.0), [(0.1, 0.2), (1.0, 0.7), (3.0, 4.0)])
