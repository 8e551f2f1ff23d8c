"""
How the evaluator picks a formula.

Walks a fixed r along decreasing s and prints which branch the dispatcher
uses, the value, and its error estimate.  Large z = (s/2)**(2/alpha1) / (r/2)**2
goes to the convergent series, small z to the asymptotic expansion, and s = 0
to the spatial-axis closed form.  A second table uses a singular nu
(theta = 1), where the asymptotic branch switches internally to its
perturbation scheme around the pole.

Run:  python3 demos/branches.py
"""

import numpy as np

from spacetime_gc import ModelParams, gc_eval
from spacetime_gc.engine import crossover_z, gc_asymptotic, gc_series


def table(params, r, s_values):
    print(f"alpha1={params.alpha1:g} nu={params.nu:.6g} d1={params.d1} d2={params.d2} "
          f"(theta'={params.theta_prime:.4g}, k0={params.k0}), r={r:g}")
    print(f"{'s':>10} {'z':>10} {'branch':>11} {'value':>24} {'err_est':>10}")
    for s in s_values:
        g = gc_eval(r, s, params)
        z = crossover_z(r, s, params.alpha1) if s > 0 else 0.0
        print(f"{s:10.3g} {z:10.3g} {g.branch.value:>11} {g.value:24.17g} {g.err_est:10.2g}")
    print()


def overlap(params, r):
    print("series vs asymptotic in the overlap window (r fixed):")
    print(f"{'z':>8} {'series':>22} {'asymptotic':>22} {'rel diff':>10} {'asy err_est':>12}")
    for z in np.geomspace(0.02, 1.0, 6):
        s = 2 * (z * (r / 2) ** 2) ** (params.alpha1 / 2)
        a = gc_series(r, s, params, warn=False)
        b = gc_asymptotic(r, s, params, warn=False)
        print(f"{z:8.3g} {a.value:22.15g} {b.value:22.15g} "
              f"{abs(a.value - b.value) / abs(a.value):10.2g} {b.err_est / abs(a.value):12.2g}")
    print()


if __name__ == "__main__":
    p = ModelParams(1.5, 2.0)
    table(p, 1.0, [10.0, 2.0, 0.5, 0.1, 1e-2, 1e-4, 0.0])
    overlap(p, 1.0)
    # theta = 1 is a whole number: the plain formulas have poles here
    table(ModelParams.from_theta_prime(2.5, 0.8), 2.0, [3.0, 0.5, 0.05, 0.01, 1e-3])
