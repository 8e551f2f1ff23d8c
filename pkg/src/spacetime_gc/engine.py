"""
Evaluation of the space-time generalized covariance ``G(r, s)`` for the
spectral density ``(|tau|**(2 alpha1) + |omega|**2)**(-nu)``.

Four formula families are available:

* the convergent power series in ``r**2`` (``alpha1 > 1``, ``s > 0``),
* closed forms on the two axes ``s = 0`` and ``r = 0``,
* the closed form for ``alpha1 = 1``, where the function is isotropic,
* the asymptotic expansion for small ``z = (s/2)**(2/alpha1) / (r/2)**2``.

:func:`gc_eval` picks a branch from ``z`` and falls back to the other one
whenever the first reports an error estimate above the requested tolerance.
"""

import enum
import functools
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .special import (
    INT_TOL,
    PoleError,
    digamma,
    gamma_fn,
    lgamma_sign,
    power_law_gc,
    sinpi,
)

__all__ = [
    "ModelParams",
    "EvalPolicy",
    "GCValue",
    "Branch",
    "InvalidParameterError",
    "ConvergenceError",
    "CancellationWarning",
    "DivergenceWarning",
    "derive",
    "c_coeff",
    "series_terms",
    "gc_series",
    "gc_axis_r",
    "gc_axis_s",
    "gc_isotropic",
    "h_asym_coeffs",
    "gc_asymptotic",
    "gc_eval",
    "gc_aniso",
]

EPS = np.finfo(float).eps
_LOG_PI = math.log(math.pi)


class InvalidParameterError(ValueError):
    """Model or policy parameters violate their invariants."""


class ConvergenceError(ArithmeticError):
    """A series did not reach its stopping criterion within the term budget."""


class CancellationWarning(RuntimeWarning):
    """The convergent series lost more digits than the tolerance allows."""


class DivergenceWarning(RuntimeWarning):
    """The asymptotic expansion is used outside its useful range."""


class Branch(str, enum.Enum):
    SERIES = "series"
    AXIS_R = "axis_r"
    AXIS_S = "axis_s"
    ISOTROPIC = "isotropic"
    ASYMPTOTIC = "asymptotic"


def _near_int(x, tol=INT_TOL):
    n = round(x)
    return abs(x - n) <= tol * max(1.0, abs(x)), int(n)


@dataclass(frozen=True)
class ModelParams:
    """
    Parameters of the spectral model.

    ``alpha1`` is the smoothness exponent of the first (spatial) block,
    ``nu`` the overall decay exponent, ``d1``/``d2`` the block dimensions and
    ``b1``/``b2`` scale factors applied to the lags before evaluation.
    """

    alpha1: float
    nu: float
    d1: int = 1
    d2: int = 1
    b1: float = 1.0
    b2: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.alpha1) and self.alpha1 >= 1.0):
            raise InvalidParameterError(f"alpha1 must be >= 1: got {self.alpha1}")
        for name in ("d1", "d2"):
            d = getattr(self, name)
            if int(d) != d or d < 1:
                raise InvalidParameterError(f"{name} must be a positive integer: got {d}")
            object.__setattr__(self, name, int(d))
        for name in ("b1", "b2"):
            b = getattr(self, name)
            if not (math.isfinite(b) and b > 0):
                raise InvalidParameterError(f"{name} must be positive: got {b}")
        if not math.isfinite(self.nu):
            raise InvalidParameterError(f"nu must be finite: got {self.nu}")
        if self.theta <= 0:
            raise InvalidParameterError(f"theta must be positive: got {self.theta:.12g}")
        if self.theta_prime <= 0:
            raise InvalidParameterError(
                f"theta_prime must be positive: got {self.theta_prime:.12g}"
            )

    @classmethod
    def from_theta_prime(cls, alpha1, theta_prime, d1=1, d2=1, b1=1.0, b2=1.0):
        nu = theta_prime + d1 / (2.0 * alpha1) + d2 / 2.0
        return cls(alpha1, nu, d1, d2, b1, b2)

    @property
    def theta(self):
        return self.nu - 0.5 * self.d2

    @property
    def theta_prime(self):
        return self.theta - self.d1 / (2.0 * self.alpha1)

    @property
    def k0(self):
        x = self.alpha1 * self.theta_prime
        is_int, n = _near_int(x)
        return n if is_int else int(math.floor(x))

    @property
    def is_isotropic(self):
        return abs(self.alpha1 - 1.0) <= 1e-12

    def with_nu(self, nu):
        return replace(self, nu=nu)

    def unit_scale(self):
        return replace(self, b1=1.0, b2=1.0)


@dataclass(frozen=True)
class EvalPolicy:
    """
    Numerical knobs for :func:`gc_eval`.

    ``z_crossover`` picks the first branch tried (series at or above it,
    asymptotic below); the other branch is consulted whenever the first one
    reports ``err_est > rel_tol * |value|``.
    """

    rel_tol: float = 1e-10
    max_terms: int = 500
    z_crossover: float = 0.05
    singular_guard: float = 1e-4
    perturb_eps: float = 1e-5

    def __post_init__(self):
        for name in ("rel_tol", "max_terms", "z_crossover", "singular_guard", "perturb_eps"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise InvalidParameterError(f"{name} must be positive: got {v}")
        if not self.z_crossover < 2:
            raise InvalidParameterError(
                f"z_crossover must lie in (0, 2): got {self.z_crossover}"
            )
        if int(self.max_terms) != self.max_terms:
            raise InvalidParameterError(f"max_terms must be an integer: got {self.max_terms}")


DEFAULT_POLICY = EvalPolicy()


@dataclass(frozen=True)
class GCValue:
    value: float
    branch: Branch
    err_est: float
    terms: int

    def __float__(self):
        return float(self.value)


def derive(params):
    """Return ``(theta, theta_prime, k0)`` for ``params``."""
    return params.theta, params.theta_prime, params.k0


def _log_c(m, alpha1, d1, d2):
    lg1, _ = lgamma_sign((d1 + 2.0 * m) / (2.0 * alpha1))
    lg2, _ = lgamma_sign(m + 0.5 * d1)
    return 0.5 * (d1 + d2) * _LOG_PI + lg1 - math.lgamma(m + 1.0) - lg2


def c_coeff(m, params):
    """
    Series coefficient
    ``pi**((d1+d2)/2) Gamma((d1+2m)/(2 alpha1)) / (m! Gamma(m + d1/2))``.
    """
    if m < 0 or int(m) != m:
        raise ValueError(f"m must be a nonnegative integer: got {m}")
    return math.exp(_log_c(int(m), params.alpha1, params.d1, params.d2))


def _rgamma_envelope(x):
    """``log Gamma(x)`` for ``x >= 1/2``, else ``log(pi / Gamma(1 - x))``."""
    if x >= 0.5:
        return math.lgamma(x)
    return _LOG_PI - math.lgamma(1.0 - x)


class _Tables:
    """Read-only coefficient tables for one ``(alpha1, nu, d1, d2)``."""

    def __init__(self, alpha1, nu, d1, d2, nmax):
        self.alpha1 = alpha1
        self.nu = nu
        self.d1 = d1
        self.d2 = d2
        theta = nu - 0.5 * d2
        thp = theta - d1 / (2.0 * alpha1)
        self.theta = theta
        self.theta_prime = thp
        self.nmax = nmax
        lg_nu, _ = lgamma_sign(nu)
        self.log_norm = -math.log(alpha1) - lg_nu  # 1 / (alpha1 Gamma(nu))

        # convergent series: term_m = A_m (-1)^m (r/2)^(2m) gamma_{zeta_m}(s/2)
        m = np.arange(nmax)
        zeta = thp - m / alpha1
        log_a = np.empty(nmax)
        sign = np.empty(nmax)
        err = np.empty(nmax)
        int_idx = []
        for j in range(nmax):
            lc = _log_c(j, alpha1, d1, d2)
            is_int, n = _near_int(zeta[j])
            if is_int and n >= 0:
                int_idx.append((j, n))
                log_a[j] = lc + self.log_norm
                sign[j] = 1.0 if j % 2 == 0 else -1.0
                err[j] = EPS * (abs(lc) + abs(self.log_norm) + 2)
                continue
            lg, sg = lgamma_sign(-zeta[j])
            log_a[j] = lc + self.log_norm + lg
            sign[j] = sg * (1.0 if j % 2 == 0 else -1.0)
            err[j] = EPS * (abs(lc) + abs(self.log_norm) + abs(lg) + 2)
        self.zeta = zeta
        self.series_log = log_a
        self.series_sign = sign
        self.series_err = err
        self.series_int = tuple(int_idx)

        # asymptotic coefficients h1*, h2*; None when a pole is hit
        (
            self.h1_log, self.h1_sign, self.h2_log, self.h2_sign, self.h_err,
            self.h1_env, self.h2_env,
        ) = self._asym_tables(alpha1, theta, thp, d1, nmax)
        for arr in (self.series_log, self.series_sign, self.series_err, self.zeta):
            arr.setflags(write=False)

    @staticmethod
    def _asym_tables(alpha1, theta, thp, d1, nmax):
        h1_log = np.full(nmax, -np.inf)
        h1_sign = np.zeros(nmax)
        h2_log = np.full(nmax, -np.inf)
        h2_sign = np.zeros(nmax)
        h_err = np.zeros(nmax)
        # log-magnitudes with the oscillating factor sin(pi x) of 1/Gamma(x)
        # removed; used to locate the smallest term of the envelope
        h1_env = np.full(nmax, -np.inf)
        h2_env = np.full(nmax, -np.inf)
        la = math.log(alpha1)
        try:
            for ell in range(nmax):
                pm = 1.0 if ell % 2 == 0 else -1.0
                lf = math.lgamma(ell + 1.0)
                x = -ell * alpha1
                if not (x <= 0 and x == math.floor(x)):
                    g1, s1 = lgamma_sign(-theta - ell)
                    g2, s2 = lgamma_sign(0.5 * d1 + ell * alpha1)
                    g3, s3 = lgamma_sign(x)
                    h1_log[ell] = la + g1 + g2 - g3 - lf
                    h1_sign[ell] = pm * s1 * s2 * s3
                    h1_env[ell] = la + g1 + g2 - _rgamma_envelope(x) - lf
                    h_err[ell] = EPS * (abs(g1) + abs(g2) + abs(g3) + lf + 2)
                y = alpha1 * (theta - ell)
                if not (y <= 0 and y == math.floor(y)):
                    g1, s1 = lgamma_sign(theta - ell)
                    g2, s2 = lgamma_sign((ell - thp) * alpha1)
                    g3, s3 = lgamma_sign(y)
                    h2_log[ell] = la + g1 + g2 - g3 - lf
                    h2_sign[ell] = pm * s1 * s2 * s3
                    h2_env[ell] = la + g1 + g2 - _rgamma_envelope(y) - lf
                    h_err[ell] = max(
                        h_err[ell], EPS * (abs(g1) + abs(g2) + abs(g3) + lf + 2)
                    )
        except PoleError:
            return (None,) * 7
        out = (h1_log, h1_sign, h2_log, h2_sign, h_err, h1_env, h2_env)
        for arr in out:
            arr.setflags(write=False)
        return out

    @property
    def asym_ok(self):
        return self.h1_log is not None


@functools.lru_cache(maxsize=256)
def _tables_cached(alpha1, nu, d1, d2, nmax):
    return _Tables(alpha1, nu, d1, d2, nmax)


def _tables(params, policy):
    return _tables_cached(params.alpha1, params.nu, params.d1, params.d2, int(policy.max_terms))


def _series_chunk(tab, r, s, start, stop):
    """Terms ``start..stop-1`` of the convergent series and their relative errors."""
    m = np.arange(start, stop)
    lr = math.log(0.5 * r)
    ls = math.log(0.5 * s)
    zeta = tab.zeta[start:stop]
    extra = 2.0 * m * lr + 2.0 * zeta * ls
    with np.errstate(over="ignore"):
        t = tab.series_sign[start:stop] * np.exp(tab.series_log[start:stop] + extra)
    rel = tab.series_err[start:stop] + EPS * (np.abs(extra) + 1.0)
    for j, n in tab.series_int:
        if start <= j < stop:
            # log-form power-law kernel at an integer index
            mag = math.exp(tab.series_log[j] + 2.0 * j * lr)
            t[j - start] = tab.series_sign[j] * mag * power_law_gc(n, 0.5 * s)
    return t, rel


def series_terms(r, s, params, n_terms=20, policy=DEFAULT_POLICY):
    """The first ``n_terms`` terms of the convergent series at ``(r, s)``."""
    tab = _tables(params, policy)
    if r == 0:
        t = np.zeros(n_terms)
        t[0], _ = _series_chunk(tab, 1.0, s, 0, 1)
        return t
    t, _ = _series_chunk(tab, r, s, 0, n_terms)
    return t


def _stop_index(abs_t, partial, rel_tol, prev_abs):
    """First index j with three consecutive small, decreasing terms j, j+1, j+2."""
    n = len(abs_t)
    prev = np.concatenate(([prev_abs], abs_t[:-1]))
    ok = (abs_t <= rel_tol * np.abs(partial)) & (abs_t < prev)
    for j in range(n - 2):
        if ok[j] and ok[j + 1] and ok[j + 2]:
            return j
    return None


def gc_series(r, s, params, policy=DEFAULT_POLICY, warn=True):
    """
    Convergent power series in ``r**2``, valid for ``alpha1 > 1`` and ``s > 0``.

    The error estimate adds the first neglected term to a rounding estimate
    ``sum_m |term_m| * (relative error of term_m)``, which dominates when the
    terms cancel (small ``z``).
    """
    if params.is_isotropic:
        raise InvalidParameterError("the series needs alpha1 > 1; use gc_isotropic")
    if not s > 0:
        raise ValueError(f"gc_series needs s > 0: got {s}")
    if r < 0:
        raise ValueError(f"gc_series needs r >= 0: got {r}")
    if r == 0:
        # only the m = 0 term survives; shared with gc_axis_s
        v, err = _axis_s_value(s, params)
        return GCValue(v, Branch.SERIES, err, 1)
    tab = _tables(params, policy)

    chunk = 32
    terms = []
    rels = []
    partial = 0.0
    prev_abs = np.inf
    start = 0
    nmax = tab.nmax
    stop_at = None
    while start < nmax:
        stop = min(start + chunk, nmax)
        t, rel = _series_chunk(tab, r, s, start, stop)
        terms.append(t)
        rels.append(rel)
        if not np.all(np.isfinite(t)):
            break
        abs_t = np.abs(t)
        cums = partial + np.cumsum(t)
        j = _stop_index(abs_t, cums, policy.rel_tol, prev_abs)
        if j is not None and start + j + 3 < nmax:
            stop_at = start + j + 3
            if stop_at >= stop:
                t2, r2 = _series_chunk(tab, r, s, stop, stop_at + 1)
                terms.append(t2)
                rels.append(r2)
            break
        partial = float(cums[-1])
        prev_abs = float(abs_t[-1])
        start = stop
        chunk *= 2

    t_all = np.concatenate(terms)
    rel_all = np.concatenate(rels)
    if not np.all(np.isfinite(t_all)):
        return GCValue(math.nan, Branch.SERIES, math.inf, len(t_all))
    if stop_at is None:
        raise ConvergenceError(
            f"series did not converge within {nmax} terms at r={r}, s={s}"
        )
    used = t_all[:stop_at]
    value = math.fsum(used)
    trunc = abs(float(t_all[stop_at]))
    cancel = float(np.sum(np.abs(used) * rel_all[:stop_at]))
    err = trunc + cancel
    if warn and err > policy.rel_tol * abs(value):
        warnings.warn(
            f"series lost accuracy at r={r}, s={s}: err_est={err:.3g}, value={value:.6g}",
            CancellationWarning,
            stacklevel=2,
        )
    return GCValue(value, Branch.SERIES, err, stop_at)


def _axis_r_const(params):
    """``pi**((d1+d2)/2) Gamma(theta) / (Gamma(nu) Gamma(alpha1 theta))``."""
    th = params.theta
    g1, s1 = lgamma_sign(th)
    g2, s2 = lgamma_sign(params.nu)
    g3, s3 = lgamma_sign(params.alpha1 * th)
    return s1 * s2 * s3 * math.exp(0.5 * (params.d1 + params.d2) * _LOG_PI + g1 - g2 - g3)


def gc_axis_r(r, params):
    """
    ``G(r, 0)``: a multiple of ``gamma_{alpha1 theta'}(r/2)``, or its
    logarithmic limit when ``alpha1 theta'`` is an integer.
    """
    if r < 0:
        raise ValueError(f"gc_axis_r needs r >= 0: got {r}")
    if r == 0:
        return GCValue(0.0, Branch.AXIS_R, 0.0, 1)
    a = params.alpha1
    is_int, k0 = _near_int(a * params.theta_prime)
    if not is_int:
        v = _axis_r_const(params) * power_law_gc(a * params.theta_prime, 0.5 * r)
        return GCValue(v, Branch.AXIS_R, 8 * EPS * abs(v), 1)
    d1, d2 = params.d1, params.d2
    nu0 = (k0 + 0.5 * d1) / a + 0.5 * d2
    c = math.exp(_log_c(k0, a, d1, d2))
    bracket = (
        2.0 * math.log(0.5 * r)
        + digamma((2.0 * k0 + d1) / (2.0 * a)) / a
        + digamma(1.0) / a
        - digamma(k0 + 0.5 * d1)
        - digamma(k0 + 1.0)
    )
    v = -c / gamma_fn(nu0) * (-(0.25 * r * r)) ** k0 * bracket
    err = 8 * EPS * abs(c / gamma_fn(nu0) * (0.25 * r * r) ** k0) * (abs(bracket) + 4)
    return GCValue(v, Branch.AXIS_R, err, 1)


def gc_axis_s(s, params):
    """``G(0, s) = c_0 / (alpha1 Gamma(nu)) * gamma_{theta'}(s/2)``."""
    if s < 0:
        raise ValueError(f"gc_axis_s needs s >= 0: got {s}")
    if s == 0:
        return GCValue(0.0, Branch.AXIS_S, 0.0, 1)
    v, err = _axis_s_value(s, params)
    return GCValue(v, Branch.AXIS_S, err, 1)


def _axis_s_value(s, params):
    lg_nu, _ = lgamma_sign(params.nu)
    pref = math.exp(_log_c(0, params.alpha1, params.d1, params.d2) - lg_nu) / params.alpha1
    v = pref * power_law_gc(params.theta_prime, 0.5 * s)
    return v, 8 * EPS * abs(v)


def gc_isotropic(r, s, params):
    """Closed form for ``alpha1 = 1``; depends on ``(r, s)`` only through ``r**2 + s**2``."""
    if not params.is_isotropic:
        raise InvalidParameterError(f"gc_isotropic needs alpha1 = 1: got {params.alpha1}")
    if r < 0 or s < 0:
        raise ValueError("gc_isotropic needs r, s >= 0")
    rho2 = r * r + s * s
    if rho2 == 0:
        return GCValue(0.0, Branch.ISOTROPIC, 0.0, 1)
    thp = params.theta_prime
    d = params.d1 + params.d2
    lg_nu, _ = lgamma_sign(params.nu)
    is_int, n = _near_int(thp)
    if is_int:
        sign = 1.0 if (n + 1) % 2 == 0 else -1.0
        mag = math.exp(
            0.5 * d * _LOG_PI - math.lgamma(n + 1.0) - lg_nu - 2 * n * math.log(2.0)
            + n * math.log(rho2)
        )
        v = sign * mag * math.log(rho2)
    else:
        lg, _ = lgamma_sign(thp + 1.0)
        mag = math.exp(
            0.5 * (d + 2) * _LOG_PI - lg - lg_nu - 2 * thp * math.log(2.0)
            + thp * math.log(rho2)
        )
        v = -mag / sinpi(thp)
    return GCValue(v, Branch.ISOTROPIC, 8 * EPS * abs(v), 1)


def _asym_singularities(params):
    """
    Values of ``nu`` near ``params.nu`` where the asymptotic coefficients have
    poles, paired with the series indices ``m`` whose power-law order becomes a
    whole number there.  Returns a list of ``(distance, nu0, ms)``.

    Both pole families (``theta`` whole, ``(theta' - l) alpha1`` whole) can
    coincide at one ``nu0``; candidates are merged so that every singular
    series index is accounted for.
    """
    a, d1, d2 = params.alpha1, params.d1, params.d2
    nu = params.nu
    th, thp = params.theta, params.theta_prime
    shift = d1 / (2 * a) + 0.5 * d2
    cands = []
    n = round(th)
    if n >= 1:
        cands.append(n + 0.5 * d2)
    for ell in range(0, int(math.floor(thp)) + 2):
        m = round(a * (thp - ell))
        if m >= 0:
            cands.append(ell + m / a + shift)
    merged = []
    for nu0 in sorted(cands):
        if not merged or abs(nu0 - merged[-1]) > 1e-12 * max(1.0, nu0):
            merged.append(nu0)
    out = []
    for nu0 in merged:
        thp0 = nu0 - shift
        ms = []
        for ell2 in range(0, int(math.floor(thp0 + 1e-12)) + 1):
            mm = a * (thp0 - ell2)
            if abs(mm - round(mm)) < 1e-12 * max(1.0, mm) and round(mm) >= 0:
                ms.append(int(round(mm)))
        out.append((abs(nu - nu0), nu0, tuple(sorted(set(ms)))))
    out.sort()
    return out


def h_asym_coeffs(ell, params, policy=DEFAULT_POLICY):
    """
    Coefficients ``(h1*, h2*)`` of the small-``z`` expansion.

    Computed from the gamma-function forms with the reciprocal gamma taken as
    zero at its zeros, so ``h1*_0 = 0`` and ``h1*_l = 0`` for integer
    ``alpha1``.

    Raises
    ------
    PoleError
        If ``theta`` or ``(theta' - l) alpha1`` is within
        ``policy.singular_guard`` of a whole number, or ``(theta - l) alpha1``
        of a positive integer.  (The last case is finite in the gamma form and
        :func:`gc_asymptotic` does not need to avoid it.)
    """
    if ell < 0 or int(ell) != ell:
        raise ValueError(f"ell must be a nonnegative integer: got {ell}")
    ell = int(ell)
    guard = policy.singular_guard
    a, th, thp = params.alpha1, params.theta, params.theta_prime
    checks = [("theta", th, 0)]
    checks.append((f"(theta' - {ell}) alpha1", (thp - ell) * a, 0))
    checks.append((f"(theta - {ell}) alpha1", (th - ell) * a, 1))
    for name, q, lowest in checks:
        n = round(q)
        if n >= lowest and abs(q - n) < guard:
            raise PoleError(
                f"{name} = {q:.12g} is within {guard:g} of the whole number {n}; "
                "the asymptotic coefficients are excluded there"
            )
    tab = _Tables._asym_tables(params.alpha1, params.theta, params.theta_prime, params.d1, ell + 1)
    h1 = tab[1][ell] * math.exp(tab[0][ell]) if tab[1][ell] != 0 else 0.0
    h2 = tab[3][ell] * math.exp(tab[2][ell]) if tab[3][ell] != 0 else 0.0
    return h1, h2


def _optimal_sum(t, rel, log_env):
    """
    Sum a divergent asymptotic series up to (excluding) its smallest term.

    The truncation point is the minimum of the smooth envelope ``log_env``,
    not of ``|t|``: the coefficients carry factors ``sin(pi l alpha1)`` that
    can make an individual term spuriously small long after the series has
    started to diverge.

    Returns ``(value, truncation error, rounding error, n_terms)``.
    """
    live = np.isfinite(log_env) & (t != 0)
    nz = np.flatnonzero(live)
    if len(nz) == 0:
        return 0.0, 0.0, 0.0, 0
    if len(nz) == 1:
        k = len(t)
    else:
        cand = nz[1:]
        k = int(cand[np.argmin(log_env[cand])])
    used = t[:k]
    value = math.fsum(used)
    a = np.abs(t)
    trunc = float(np.max(a[k : k + 2])) if k < len(t) else 0.0
    cancel = float(np.sum(np.abs(used) * rel[:k]))
    return value, trunc, cancel, k


def _asym_raw(r, s, params, policy):
    tab = _tables(params, policy)
    a = params.alpha1
    d1 = params.d1
    th, thp = params.theta, params.theta_prime
    lr = math.log(0.5 * r)
    ls = math.log(0.5 * s)
    lu = 2.0 * ls - 2.0 * a * lr
    lg_nu, _ = lgamma_sign(params.nu)
    lpre = 0.5 * (d1 + params.d2) * _LOG_PI - lg_nu - math.log(a)
    n = tab.nmax
    ell = np.arange(n)
    x1 = lpre + 2.0 * th * ls - d1 * lr + ell * lu
    x2 = lpre + 2.0 * a * thp * lr + ell * lu
    with np.errstate(over="ignore", invalid="ignore"):
        t1 = np.where(tab.h1_sign != 0, tab.h1_sign * np.exp(tab.h1_log + x1), 0.0)
        t2 = np.where(tab.h2_sign != 0, tab.h2_sign * np.exp(tab.h2_log + x2), 0.0)
    # drop the tail once terms overflow; truncation happens well before
    t1 = np.where(np.isfinite(t1), t1, np.inf)
    t2 = np.where(np.isfinite(t2), t2, np.inf)
    rel1 = tab.h_err + EPS * (np.abs(x1) + 1)
    rel2 = tab.h_err + EPS * (np.abs(x2) + 1)
    v1, e1, c1, n1 = _optimal_sum(t1, rel1, tab.h1_env + x1)
    v2, e2, c2, n2 = _optimal_sum(t2, rel2, tab.h2_env + x2)
    stokes = _stokes_bound(a, tab.h1_log + x1, tab.h1_sign) + _stokes_bound(
        a, tab.h2_log + x2, tab.h2_sign
    )
    return v1 + v2, e1 + e2 + c1 + c2 + stokes, max(n1, n2)


# safety factor on the exponentially small remainder (prefactor not modelled)
_STOKES_FACTOR = 100.0


def _stokes_bound(alpha1, log_terms, signs):
    """
    Bound on the exponentially small remainder beyond optimal truncation.

    The terms grow like ``Gamma(l alpha1)**2 / l!**2``; a saddle-point analysis
    of the underlying Mellin-Barnes integral gives a remainder of size
    ``exp(beta T cos(pi/beta))`` with ``beta = 2 (alpha1 - 1) / alpha1``, while
    the smallest term is ``exp(-beta T)``.  For ``alpha1 >= 2`` this exceeds
    the smallest term, so the bound is
    ``F * |largest term|**(1 - kappa) * |smallest term|**kappa`` with
    ``kappa = -cos(pi / beta)``.  For ``alpha1 < 2`` the remainder is of the
    order of the smallest term and ``kappa = 1`` (its value at
    ``alpha1 = 2``) is used, keeping the bound continuous in ``alpha1``.
    """
    live = signs != 0
    if not np.any(live):
        return 0.0
    lt = np.where(live, log_terms, np.inf)
    k = int(np.argmin(lt[1:])) + 1 if len(lt) > 1 else 0
    if not np.isfinite(lt[k]):
        return 0.0
    lmax = float(np.max(np.where(live[: k + 1], log_terms[: k + 1], -np.inf)))
    if alpha1 < 2.0:
        kappa = 1.0
    else:
        beta = 2.0 * (alpha1 - 1.0) / alpha1
        kappa = -math.cos(math.pi / beta)
    return _STOKES_FACTOR * math.exp((1.0 - kappa) * lmax + kappa * float(lt[k]))


def _singular_terms(r, s, params, ms):
    """Sum of the series terms with indices ``ms`` (the ones with integer order)."""
    if not ms:
        return 0.0
    a = params.alpha1
    lg_nu, _ = lgamma_sign(params.nu)
    total = 0.0
    for m in ms:
        pref = math.exp(_log_c(m, a, params.d1, params.d2) - lg_nu) / a
        total += pref * (-(0.25 * r * r)) ** m * power_law_gc(params.theta_prime - m / a, 0.5 * s)
    return total


def _asym_perturbed(r, s, params, policy, nu0, ms, dist):
    """
    Asymptotic value near a coefficient singularity at ``nu0``.

    The part of ``G`` that stays smooth in ``nu`` (everything except the
    series terms whose order becomes a whole number at ``nu0``) is evaluated
    at ``nu0 +- h`` and ``nu0 +- 2h`` and interpolated to ``nu`` with the cubic
    through those nodes.  At ``nu = nu0`` this is the even Richardson step
    ``(4 A(h) - A(2h)) / 3`` with ``A`` the symmetric average.
    """
    h = max(policy.perturb_eps, 1.5 * dist)
    nodes = np.array([nu0 - 2 * h, nu0 - h, nu0 + h, nu0 + 2 * h])
    vals = []
    err = 0.0
    n_terms = 0
    for nu_i in nodes:
        p_i = params.with_nu(float(nu_i))
        v, e, k = _asym_raw(r, s, p_i, policy)
        sing = _singular_terms(r, s, p_i, ms)
        vals.append(v - sing)
        # the pole factors see nu - nu0 with relative rounding eps * nu0 / h
        pole = (abs(v) + abs(sing)) * EPS * 2.0 * max(1.0, abs(nu0)) / abs(nu_i - nu0)
        err = max(err, e + EPS * abs(v) * 4 + pole)
        n_terms = max(n_terms, k)
    vals = np.array(vals)
    x = params.nu
    # Lagrange cubic through the four nodes
    w = np.ones(4)
    for i in range(4):
        for j in range(4):
            if i != j:
                w[i] *= (x - nodes[j]) / (nodes[i] - nodes[j])
    regular = float(np.dot(w, vals))
    # the linear interpolant on the inner nodes gauges the interpolation error
    lin = vals[1] + (vals[2] - vals[1]) * (x - nodes[1]) / (nodes[2] - nodes[1])
    interp_err = abs(regular - lin) * (h / max(h, 1.0)) ** 2
    value = regular + _singular_terms(r, s, params, ms)
    return value, err * float(np.sum(np.abs(w))) + interp_err, n_terms


def gc_asymptotic(r, s, params, policy=DEFAULT_POLICY, warn=True):
    """
    Small-``z`` asymptotic expansion, optimally truncated.

    Each of the two interleaved sub-series is cut just before its smallest
    term; that term is the truncation error estimate.  Parameters within
    ``policy.singular_guard`` of a coefficient pole are handled by
    interpolation in ``nu`` (see :func:`_asym_perturbed`).
    """
    if params.is_isotropic:
        raise InvalidParameterError("the asymptotic expansion needs alpha1 > 1")
    if not r > 0:
        raise ValueError(f"gc_asymptotic needs r > 0: got {r}")
    if s < 0:
        raise ValueError(f"gc_asymptotic needs s >= 0: got {s}")
    if s == 0:
        v = gc_axis_r(r, params)
        return GCValue(v.value, Branch.ASYMPTOTIC, v.err_est, 1)
    sing = _asym_singularities(params)
    tab = _tables(params, policy)
    if (sing and sing[0][0] < policy.singular_guard) or not tab.asym_ok:
        dist, nu0, ms = sing[0]
        value, err, k = _asym_perturbed(r, s, params, policy, nu0, ms, dist)
    else:
        value, err, k = _asym_raw(r, s, params, policy)
    if warn and err > policy.rel_tol * abs(value):
        warnings.warn(
            f"asymptotic expansion not accurate at r={r}, s={s}: "
            f"err_est={err:.3g}, value={value:.6g}",
            DivergenceWarning,
            stacklevel=2,
        )
    return GCValue(value, Branch.ASYMPTOTIC, err, k)


def crossover_z(r, s, alpha1):
    """``z = (s/2)**(2/alpha1) / (r/2)**2``."""
    return (0.5 * s) ** (2.0 / alpha1) / (0.5 * r) ** 2


def _try(fn, *args):
    try:
        return fn(*args)
    except (ConvergenceError, PoleError, OverflowError):
        return None


def gc_eval(r, s, params, policy=DEFAULT_POLICY):
    """
    Evaluate ``G(b1 r, b2 s)``, choosing the formula family automatically.

    Returns the candidate with the smaller error estimate when the first
    branch is not accurate to ``policy.rel_tol``; the returned ``err_est`` is
    always the estimate of the branch actually used.
    """
    r = float(r)
    s = float(s)
    if not (math.isfinite(r) and math.isfinite(s)) or r < 0 or s < 0:
        raise ValueError(f"gc_eval needs finite r, s >= 0: got r={r}, s={s}")
    r *= params.b1
    s *= params.b2
    if params.is_isotropic:
        return gc_isotropic(r, s, params)
    if s == 0:
        return gc_axis_r(r, params)
    if r == 0:
        return gc_axis_s(s, params)
    z = crossover_z(r, s, params.alpha1)
    first, second = gc_series, gc_asymptotic
    if z < policy.z_crossover:
        first, second = second, first
    a = _try(first, r, s, params, policy, False)
    if a is not None and a.err_est <= policy.rel_tol * abs(a.value):
        return a
    b = _try(second, r, s, params, policy, False)
    cands = [c for c in (a, b) if c is not None and math.isfinite(c.value)]
    if not cands:
        raise ConvergenceError(f"no branch converged at r={r}, s={s}")
    return min(cands, key=lambda c: c.err_est)


def gc_aniso(x, y, A, B, params, policy=DEFAULT_POLICY):
    """Geometrically anisotropic version ``G(|A x|, |B y|)``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if x.shape != (params.d1,) or y.shape != (params.d2,):
        raise ValueError(
            f"expected x of length {params.d1} and y of length {params.d2}, "
            f"got {x.shape} and {y.shape}"
        )
    if A.shape != (params.d1, params.d1) or B.shape != (params.d2, params.d2):
        raise ValueError(
            f"expected A {params.d1}x{params.d1} and B {params.d2}x{params.d2}, "
            f"got {A.shape} and {B.shape}"
        )
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
        raise ValueError("anisotropy matrices must be finite")
    return gc_eval(float(np.linalg.norm(A @ x)), float(np.linalg.norm(B @ y)), params, policy)
