"""
Executable checks of the theoretical properties of the generalized
covariance: conditional positive definiteness, absence of dimples, agreement
between formula branches, oracle equivalence and special-function identities.

Every check produces rows of a :class:`ValidationReport`; reports are
deterministic given the seed and the parameter grids.
"""

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from . import special
from .engine import (
    DEFAULT_POLICY,
    gc_asymptotic,
    gc_axis_r,
    gc_eval,
    gc_series,
    h_asym_coeffs,
)
from .oracle import (
    AnnihilationError,
    ANNIHILATION_TOL,
    alc_line_config,
    annihilation_residual,
    monomial_exponents,
    oracle_point_k0,
    oracle_quadform,
)

__all__ = [
    "Check",
    "ValidationReport",
    "dim_poly",
    "monomial_matrix",
    "random_alc_weights",
    "gc_quadform",
    "cpd_suite",
    "dimple_scan",
    "branch_continuity",
    "small_s_exponent",
    "oracle_sweep",
    "identity_suite",
]

CPD_REL_TOL = 1e-8


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    measured: float
    threshold: float
    detail: str = ""
    gating: bool = True


@dataclass
class ValidationReport:
    """
    Ordered collection of checks.

    Non-gating checks are reported (and written to CSV) but do not count as
    failures; they record targets that are known to be unattainable.
    """

    checks: list = field(default_factory=list)
    seed: int = 0

    def add(self, name, passed, measured, threshold, detail="", gating=True):
        self.checks.append(
            Check(name, bool(passed), float(measured), float(threshold), detail, bool(gating))
        )

    def extend(self, other):
        self.checks.extend(other.checks)
        return self

    @property
    def n_failed(self):
        return len(self.failures())

    @property
    def all_passed(self):
        return self.n_failed == 0

    def failures(self):
        return [c for c in self.checks if c.gating and not c.passed]

    def to_csv(self, path_or_buf):
        """Write ``name,status,measured,threshold,gating,detail`` rows."""
        own = isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__")
        fh = open(path_or_buf, "w", newline="", encoding="utf-8") if own else path_or_buf
        try:
            w = csv.writer(fh)
            w.writerow(["name", "status", "measured", "threshold", "gating", "detail"])
            for c in self.checks:
                w.writerow([
                    c.name,
                    "pass" if c.passed else "fail",
                    f"{c.measured:.17g}",
                    f"{c.threshold:.17g}",
                    "yes" if c.gating else "no",
                    c.detail,
                ])
        finally:
            if own:
                fh.close()

    def summary(self):
        groups = {}
        for c in self.checks:
            key = c.name.split("[", 1)[0]
            g = groups.setdefault(key, [0, 0, c.gating])
            g[0] += 1
            g[1] += not c.passed
        out = io.StringIO()
        out.write(f"seed {self.seed}: {len(self.checks)} checks, {self.n_failed} failed\n")
        for key, (n, nf, gating) in groups.items():
            status = "ok" if nf == 0 else ("FAIL" if gating else "fail (informational)")
            out.write(f"  {key:<28s} {n - nf:>5d}/{n:<5d} {status}\n")
        for c in self.failures()[:20]:
            out.write(
                f"  FAIL {c.name}: measured {c.measured:.6g} vs threshold {c.threshold:.6g}"
                f"{' ' + c.detail if c.detail else ''}\n"
            )
        return out.getvalue()


def dim_poly(k, dim):
    """Dimension of the space of polynomials of total degree ``<= k`` in ``dim`` variables."""
    return math.comb(k + dim, dim)


def monomial_matrix(points, k):
    """Design matrix of the monomials of total degree ``<= k`` at ``points``."""
    z = np.asarray(points, dtype=float)
    cols = [np.prod(z ** np.array(e), axis=1) for e in monomial_exponents(z.shape[1], k)]
    return np.column_stack(cols)


def random_alc_weights(points, k, rng):
    """
    Random weights annihilating all polynomials of degree ``<= k`` at
    ``points``: a Gaussian vector projected onto the null space of the
    transposed design matrix, normalized to unit Euclidean length.
    """
    P = monomial_matrix(points, k)
    ns = linalg.null_space(P.T)
    if ns.shape[1] == 0:
        raise ValueError("no nonzero annihilating weights exist for these points")
    w = ns @ rng.standard_normal(ns.shape[1])
    return w / np.linalg.norm(w)


def gc_quadform(x, y, weights, params, policy=DEFAULT_POLICY, order=None):
    """
    ``sum_{l,j} lambda_l lambda_j G(z_l - z_j)`` from :func:`gc_eval`.

    The weights are first checked to annihilate polynomials of degree
    ``order`` (default ``k0``); configurations that fail are rejected with
    :class:`AnnihilationError` before any evaluation.

    Returns ``(value, max |G| over pairs, summed error estimate)``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    w = np.asarray(weights, dtype=float)
    k = params.k0 if order is None else order
    res = annihilation_residual(np.hstack((x, y)), w, k)
    if res > ANNIHILATION_TOL:
        raise AnnihilationError(
            f"weights do not annihilate polynomials of degree <= {k}: relative residual {res:.3g}"
        )
    terms = []
    gmax = 0.0
    err = 0.0
    n = len(w)
    for i in range(n):
        for j in range(i + 1, n):
            r = float(np.linalg.norm(x[i] - x[j]))
            s = float(np.linalg.norm(y[i] - y[j]))
            g = gc_eval(r, s, params, policy)
            terms.append(2.0 * w[i] * w[j] * g.value)
            gmax = max(gmax, abs(g.value))
            err += 2.0 * abs(w[i] * w[j]) * g.err_est
    # G(0, 0) = 0, so the diagonal does not contribute
    return math.fsum(terms), gmax, err


def cpd_suite(params, n_configs, seed=0, policy=DEFAULT_POLICY):
    """
    Conditional positive definiteness on random ALC-``k0`` configurations.

    Each configuration has ``dim_poly(k0) + 4`` uniform points in the unit
    cube of dimension ``d1 + d2``.  A check fails when the quadratic form is
    below ``-1e-8 (sum |lambda|)**2 max |G|``.
    """
    if n_configs < 1:
        raise ValueError(f"n_configs must be >= 1: got {n_configs}")
    rng = np.random.default_rng(seed)
    d1, d2, k = params.d1, params.d2, params.k0
    n_pts = dim_poly(k, d1 + d2) + 4
    report = ValidationReport(seed=seed)
    for c in range(n_configs):
        z = rng.random((n_pts, d1 + d2))
        w = random_alc_weights(z, k, rng)
        q, gmax, _ = gc_quadform(z[:, :d1], z[:, d1:], w, params, policy)
        thr = -CPD_REL_TOL * float(np.sum(np.abs(w))) ** 2 * gmax
        detail = ""
        if q < thr:
            detail = json.dumps({"points": z.tolist(), "weights": w.tolist()})
        report.add(f"cpd[{c}]", q >= thr, q, thr, detail)
    return report


def dimple_scan(params, r_grid, s_grid, policy=DEFAULT_POLICY):
    """
    Check that ``-G`` increases off both axes.

    For every ``r`` in the grid, ``G(r, 0) > G(r, s1)`` with ``s1`` the smallest
    positive grid ``s``; for every ``s``, ``G(0, s) > G(r1, s)`` likewise.
    A difference is only flagged when it is negative beyond the combined
    error estimates.
    """
    if params.k0 != 0:
        raise ValueError(f"dimple_scan needs k0 = 0: got k0={params.k0}")
    r_grid = np.unique(np.asarray(r_grid, dtype=float))
    s_grid = np.unique(np.asarray(s_grid, dtype=float))
    report = ValidationReport()
    s_pos = s_grid[s_grid > 0]
    r_pos = r_grid[r_grid > 0]
    if len(s_pos):
        s1 = float(s_pos[0])
        for r in r_grid:
            a = gc_eval(r, 0.0, params, policy)
            b = gc_eval(r, s1, params, policy)
            diff = a.value - b.value
            tol = a.err_est + b.err_est
            report.add(f"dimple_s[r={r:.6g}]", diff > -tol, diff, -tol, f"s={s1:.6g}")
    if len(r_pos):
        r1 = float(r_pos[0])
        for s in s_grid:
            a = gc_eval(0.0, s, params, policy)
            b = gc_eval(r1, s, params, policy)
            diff = a.value - b.value
            tol = a.err_est + b.err_est
            report.add(f"dimple_r[s={s:.6g}]", diff > -tol, diff, -tol, f"r={r1:.6g}")
    return report


def _s_for_z(z, r, alpha1):
    return 2.0 * (z * (0.5 * r) ** 2) ** (0.5 * alpha1)


def branch_continuity(params_grid, policy=DEFAULT_POLICY, z_grid=None, r_values=(0.5, 2.0),
                      tol=1e-8, strict_overlap=True):
    """
    Series/asymptotic agreement on ``z`` in ``[0.2, 1]`` and the axis limit of
    the asymptotic branch.

    Two agreement checks are recorded per grid cell: ``overlap`` (the
    discrepancy must be ``<= tol``) and ``overlap_est`` (it must be within
    ``max(tol, combined err_est)``).  ``axis_limit`` requires
    ``|gc_asymptotic(r, s) - gc_axis_r(r)|`` to decrease over
    ``s = 1e-2, 1e-4, 1e-6``; a step is exempt when either gap is below the
    branch's ``err_est`` (the gap is not resolved there).

    With ``strict_overlap=False`` the fixed-tolerance ``overlap`` rows are
    kept but marked non-gating: for ``alpha1 > 1`` the truncated asymptotic
    series cannot reach ``1e-8`` on the whole overlap window.

    Rows with ``alpha1 == 1`` are skipped: the closed form is used there and
    there are no branches to compare.
    """
    if z_grid is None:
        z_grid = np.geomspace(0.2, 1.0, 9)
    report = ValidationReport()
    for p in params_grid:
        if p.is_isotropic:
            continue
        tag = f"a={p.alpha1:g},nu={p.nu:.6g},d1={p.d1},d2={p.d2}"
        for r in r_values:
            for z in z_grid:
                s = _s_for_z(z, r, p.alpha1)
                ser = gc_series(r, s, p, policy, warn=False)
                asy = gc_asymptotic(r, s, p, policy, warn=False)
                diff = abs(ser.value - asy.value) / abs(ser.value)
                comb = (ser.err_est + asy.err_est) / abs(ser.value)
                name = f"[{tag},r={r:g},z={z:.4g}]"
                report.add("overlap" + name, diff <= tol, diff, tol, gating=strict_overlap)
                report.add("overlap_est" + name, diff <= max(tol, comb), diff, max(tol, comb))
            ax = gc_axis_r(r, p).value
            gaps, ests = [], []
            for s in (1e-2, 1e-4, 1e-6):
                g = gc_asymptotic(r, s, p, policy, warn=False)
                gaps.append(abs(g.value - ax))
                ests.append(g.err_est)
            # each step must shrink the gap unless one of the two gaps is
            # not resolved by the branch's own error estimate
            ok = all(gaps[i] > gaps[i + 1] or gaps[i + 1] <= ests[i + 1] or gaps[i] <= ests[i]
                     for i in range(2))
            report.add(f"axis_limit[{tag},r={r:g}]", ok, gaps[-1], gaps[0],
                       " > ".join(f"{g:.3g}" for g in gaps))
    return report


def small_s_exponent(params, r=0.5, s_values=None, policy=DEFAULT_POLICY):
    """
    Log-log slope of ``G(r, s) - A0 - A1 s**2`` over small ``s``.

    ``A0 = G(r, 0)`` and ``A1`` is the ``s**2`` coefficient of the analytic
    part of the small-``s`` expansion (from the ``l = 1`` coefficient of the
    asymptotic series).  The fitted slope is the exponent of the first
    non-analytic correction.
    """
    if s_values is None:
        s_values = np.geomspace(1e-3, 1e-2, 6)
    s_values = np.asarray(s_values, dtype=float)
    a = params.alpha1
    lg_nu, _ = special.lgamma_sign(params.nu)
    pre = math.exp(0.5 * (params.d1 + params.d2) * math.log(math.pi) - lg_nu) / a
    _, h21 = h_asym_coeffs(1, params, policy)
    A0 = gc_axis_r(r, params).value
    A1 = pre * h21 * (0.5 * r) ** (2 * a * params.theta_prime) * 0.25 / (0.5 * r) ** (2 * a)
    rem = np.array([gc_eval(r, s, params, policy).value - A0 - A1 * s * s for s in s_values])
    slope = np.polyfit(np.log(s_values), np.log(np.abs(rem)), 1)[0]
    return float(slope)


def oracle_sweep(params_grid, rs_grid, policy=DEFAULT_POLICY, tol=1e-6):
    """
    Compare ``gc_eval`` with the quadrature oracle.

    ``k0 = 0`` rows compare pointwise at each ``(r, s)``; ``k0 >= 1`` rows
    compare quadratic forms of collinear ``(k0+1)``-th difference
    configurations with steps ``(r, s)``, since ``G`` is only determined up to
    a polynomial there.  One check per row records the worst relative error.
    """
    report = ValidationReport()
    for p in params_grid:
        tag = f"a={p.alpha1:g},nu={p.nu:.6g},d1={p.d1},d2={p.d2}"
        worst = 0.0
        where = ""
        for r, s in rs_grid:
            if p.k0 == 0:
                o = oracle_point_k0(r, s, p).value
                g = gc_eval(r, s, p, policy).value
            else:
                cfg = alc_line_config(p.k0, r, s, p.d1, p.d2)
                o = oracle_quadform(cfg, p).value
                g, _, _ = gc_quadform(cfg.x, cfg.y, cfg.weights, p, policy)
            rel = abs(g - o) / abs(o) if o != 0 else abs(g)
            if rel >= worst:
                worst, where = rel, f"r={r:.6g},s={s:.6g}"
        report.add(f"oracle[{tag},k0={p.k0}]", worst <= tol, worst, tol, where)
    return report


def identity_suite():
    """Special-function identities used throughout the formulas."""
    rep = ValidationReport()

    # m! (1/2)_m 4**m / (2m)! = 1
    worst = max(
        abs(math.factorial(m) * special.pochhammer(0.5, m) * 4.0**m / math.factorial(2 * m) - 1)
        for m in range(31)
    )
    rep.add("comb_id", worst <= 1e-13, worst, 1e-13, "m=0..30")

    xs = [x for x in np.linspace(-4.95, 4.95, 199) if abs(x - round(x)) > 0.05]
    worst = max(
        abs(special.gamma_fn(x) * special.gamma_fn(1 - x) * special.sinpi(x) / math.pi - 1)
        for x in xs
    )
    rep.add("gamma_reflection", worst <= 1e-12, worst, 1e-12)

    xs = [x for x in np.linspace(-9.7, 30.3, 401) if abs(x - round(x)) > 1e-3]
    worst = max(
        abs(special.gamma_fn(x + 1) / (x * special.gamma_fn(x)) - 1) for x in xs
    )
    rep.add("gamma_recurrence", worst <= 1e-13, worst, 1e-13)

    worst = max(
        abs(special.digamma(x + 1) - special.digamma(x) - 1 / x) / max(1.0, abs(special.digamma(x + 1)))
        for x in xs
    )
    rep.add("digamma_recurrence", worst <= 1e-13, worst, 1e-13)

    worst = 0.0
    for th in (0.7, 1.5, 2.3):
        for t in (0.1, 1.0, 5.0):
            h = 1e-5 * t
            fd = (special.matern(th, t + h) - special.matern(th, t - h)) / (2 * h)
            ref = -t * special.matern(th - 1, t)
            worst = max(worst, abs(fd / ref - 1))
    rep.add("matern_derivative", worst <= 1e-6, worst, 1e-6)

    # remainder after the constant and t**(2 theta) terms scales like t**2
    worst = 0.0
    for th in (0.2, 0.5, 0.8):
        u0 = 2 ** (th - 1) * special.gamma_fn(th)
        v = 2 ** (-th - 1)
        rems = [
            special.matern(th, t) - (u0 + v * special.power_law_gc(th, t)) for t in (1e-3, 1e-4)
        ]
        slope = math.log10(abs(rems[0] / rems[1]))
        worst = max(worst, abs(slope - 2))
    rep.add("matern_small_t", worst <= 0.05, worst, 0.05, "|fitted exponent - 2|")

    worst = 0.0
    for d in range(1, 8):
        t = special.LAMBDA_SWITCH
        a = float(special._lambda_series(d, np.array([t]))[0])
        b = float(special._lambda_bessel(d, np.array([t]))[0])
        worst = max(worst, abs(a - b))
    rep.add("lambda_switch", worst <= 1e-12, worst, 1e-12)

    t = np.linspace(0, 40, 2001)
    worst = max(
        float(np.max(np.abs(special.lambda_d(1, t) - np.cos(t)))),
        float(np.max(np.abs(special.lambda_d(3, t[1:]) - np.sin(t[1:]) / t[1:]))),
    )
    rep.add("lambda_closed_forms", worst <= 1e-12, worst, 1e-12)

    worst = max(float(np.max(np.abs(special.lambda_d(d, t)))) for d in range(2, 8))
    rep.add("lambda_bounded", worst <= 1 + 1e-14, worst, 1.0)
    return rep
