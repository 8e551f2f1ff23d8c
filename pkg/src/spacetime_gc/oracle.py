"""
Independent reference values from the one-dimensional spectral integral.

For an authorized linear combination (ALC) with weights ``lambda_j`` at
points ``(x_j, y_j)`` the quadratic form ``sum lambda_l lambda_j G(z_l - z_j)``
equals

    K * int_0^inf u**(d1 - 1 - 2 alpha1 theta)
          * sum_{l,j} lambda_l lambda_j Lambda_d1(r_lj u) M_theta(s_lj u**alpha1) du

with ``K = 4 pi**((d1+d2)/2) / (2**theta Gamma(nu) Gamma(d1/2))``,
``Lambda_d`` the isotropic Fourier kernel and ``M_theta(x) = x**theta K_theta(x)``.
For two points this gives ``G(r, s) = -K int u**(...) (M(0) - Lambda M) du``.

The integral is split into three parts:

* ``[0, u0]``: the pair sum cancels to high order, so it is expanded in
  powers of ``u`` (with ``u**(2 alpha1 theta)`` and, for integer ``theta``,
  logarithmic factors) and integrated term by term.  Moments that the
  annihilation conditions force to zero are set to exactly zero.
* ``[u0, U]``: adaptive Gauss-Kronrod on panels no wider than half an
  oscillation of ``Lambda_d``; pair sums are compensated.
* ``[U, inf)``: only non-decaying pairs remain (``s = 0``); the constant part
  is integrated in closed form and the oscillating part panel by panel with
  Wynn's epsilon acceleration.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import _quadrature as quad
from .special import INT_TOL, digamma, lgamma_sign, matern, lambda_d, rgamma

__all__ = [
    "ALCConfig",
    "QuadResult",
    "AnnihilationError",
    "IntegrabilityError",
    "alc_line_weights",
    "alc_line_config",
    "monomial_exponents",
    "annihilation_residual",
    "oracle_quadform",
    "oracle_point_k0",
    "spectral_scale_factor",
]

ANNIHILATION_TOL = 1e-10
THETA_PRIME_GUARD = 1e-3
_REL_TARGET = 1e-10
_SERIES_ORDER = 40
_MAX_EVALS = 20_000_000


class AnnihilationError(ValueError):
    """ALC weights fail to annihilate the required polynomials."""


class IntegrabilityError(ValueError):
    """The spectral integral is (nearly) divergent for these parameters."""


@dataclass(frozen=True)
class QuadResult:
    value: float
    abs_err_est: float
    evaluations: int

    def __post_init__(self):
        if not self.abs_err_est >= 0:
            raise ValueError(f"abs_err_est must be nonnegative: got {self.abs_err_est}")


def monomial_exponents(dim, k):
    """All exponent tuples of total degree ``<= k`` in ``dim`` variables."""
    out = []
    for deg in range(k + 1):
        for combo in itertools.combinations_with_replacement(range(dim), deg):
            e = [0] * dim
            for c in combo:
                e[c] += 1
            out.append(tuple(e))
    return out


def annihilation_residual(points, weights, k):
    """
    Largest relative violation of ``sum_j lambda_j P(z_j) = 0`` over the
    monomials of total degree ``<= k``.

    Points are centred first (annihilation is translation invariant), and
    each residual is divided by ``sum_j |lambda_j P(z_j)|``.
    """
    z = np.asarray(points, dtype=float)
    w = np.asarray(weights, dtype=float)
    if z.ndim != 2 or len(z) != len(w):
        raise ValueError("points must be an (n, dim) array matching the weights")
    if not np.any(w):
        return 0.0
    z = z - z.mean(axis=0)
    scale = np.max(np.abs(z)) if np.any(z) else 1.0
    z = z / scale
    worst = 0.0
    for e in monomial_exponents(z.shape[1], k):
        p = np.prod(z ** np.array(e), axis=1)
        terms = w * p
        mag = math.fsum(np.abs(terms))
        if mag == 0:
            continue
        worst = max(worst, abs(math.fsum(terms)) / mag)
    return worst


@dataclass(frozen=True)
class ALCConfig:
    """
    Authorized linear combination: weights at space-time points that
    annihilate every polynomial of total degree ``<= order``.
    """

    x: np.ndarray
    y: np.ndarray
    weights: np.ndarray
    order: int
    check: bool = field(default=True, compare=False)

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        y = np.atleast_2d(np.asarray(self.y, dtype=float))
        w = np.asarray(self.weights, dtype=float).ravel()
        if x.shape[0] != len(w) or y.shape[0] != len(w):
            raise ValueError(
                f"x ({x.shape[0]}), y ({y.shape[0]}) and weights ({len(w)}) "
                "must have the same length"
            )
        if self.order < 0 or int(self.order) != self.order:
            raise ValueError(f"order must be a nonnegative integer: got {self.order}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "order", int(self.order))
        if self.check:
            res = annihilation_residual(np.hstack((x, y)), w, self.order)
            if res > ANNIHILATION_TOL:
                raise AnnihilationError(
                    f"weights do not annihilate polynomials of degree <= {self.order}: "
                    f"relative residual {res:.3g} > {ANNIHILATION_TOL:g}"
                )

    @property
    def d1(self):
        return self.x.shape[1]

    @property
    def d2(self):
        return self.y.shape[1]


def alc_line_weights(k):
    """``(-1)**j binom(k+1, j)``, the ``(k+1)``-th difference weights."""
    if k < 0 or int(k) != k:
        raise ValueError(f"k must be a nonnegative integer: got {k}")
    k = int(k)
    return np.array([(-1) ** j * math.comb(k + 1, j) for j in range(k + 2)], dtype=float)


def alc_line_config(k, dr, ds, d1=1, d2=1):
    """
    ``k+2`` equally spaced collinear points, spatial step ``dr`` along the first
    spatial axis and temporal step ``ds`` along the first temporal axis, with
    ``(k+1)``-th difference weights.
    """
    n = k + 2
    x = np.zeros((n, d1))
    y = np.zeros((n, d2))
    x[:, 0] = dr * np.arange(n)
    y[:, 0] = ds * np.arange(n)
    return ALCConfig(x, y, alc_line_weights(k), k)


def _pairs(cfg):
    """Collapse the double sum into distinct ``(r, s)`` with summed weights."""
    w = cfg.weights
    dx = cfg.x[:, None, :] - cfg.x[None, :, :]
    dy = cfg.y[:, None, :] - cfg.y[None, :, :]
    r = np.sqrt(np.sum(dx * dx, axis=-1)).ravel()
    s = np.sqrt(np.sum(dy * dy, axis=-1)).ravel()
    ww = (w[:, None] * w[None, :]).ravel()
    acc = {}
    for ri, si, wi in zip(r, s, ww):
        acc.setdefault((float(ri), float(si)), []).append(float(wi))
    keys = sorted(acc)
    rr = np.array([k[0] for k in keys])
    ss = np.array([k[1] for k in keys])
    wt = np.array([math.fsum(acc[k]) for k in keys])
    keep = wt != 0
    return rr[keep], ss[keep], wt[keep]


class _Integrand:
    """The weighted pair sum ``u**p0 * sum_p w_p Lambda(r_p u) M(s_p u**a)``."""

    def __init__(self, r, s, w, params):
        order = np.argsort(-np.abs(w), kind="stable")
        self.r = r[order]
        self.s = s[order]
        self.w = w[order]
        self.a = params.alpha1
        self.theta = params.theta
        self.d1 = params.d1
        self.p0 = params.d1 - 1 - 2 * params.alpha1 * params.theta
        self.m0 = float(matern(self.theta, 0.0))

    def pair_sum(self, u, mask=None):
        u = np.asarray(u, dtype=float)
        total = np.zeros_like(u)
        comp = np.zeros_like(u)
        idx = range(len(self.w)) if mask is None else np.flatnonzero(mask)
        for p in idx:
            r, s, w = self.r[p], self.s[p], self.w[p]
            lam = lambda_d(self.d1, r * u) if r > 0 else 1.0
            m = matern(self.theta, s * u ** self.a) if s > 0 else self.m0
            term = w * lam * m
            # Neumaier compensated accumulation
            t = total + term
            big = np.abs(total) >= np.abs(term)
            comp += np.where(big, (total - t) + term, (term - t) + total)
            total = t
        return total + comp

    def __call__(self, u, mask=None):
        return u ** self.p0 * self.pair_sum(u, mask)


def _matern_coeffs(theta, K):
    """
    Small-argument expansion of ``M_theta(x)``.

    Returns ``(U, A, B, n)`` with
    ``M(x) = sum_k U_k x**(2k) + sum_k x**(2n + 2k) (A_k + B_k log(x/2))``,
    where ``n = theta`` and ``B = 0`` unless ``theta`` is an integer.
    """
    k = np.arange(K)
    n = round(theta)
    if abs(theta - n) <= INT_TOL * max(1.0, theta):
        n = int(n)
        U = np.zeros(K)
        for j in range(min(n, K)):
            U[j] = 0.5 * 2.0**n * math.factorial(n - j - 1) / math.factorial(j) * (-0.25) ** j
        B = np.array([
            (-1) ** (n + 1) * 2.0 ** (-n) * 0.25**j / (math.factorial(j) * math.factorial(n + j))
            for j in range(K)
        ])
        A = np.array([
            (-1) ** n * 0.5 * 2.0 ** (-n) * (digamma(j + 1.0) + digamma(n + j + 1.0))
            * 0.25**j / (math.factorial(j) * math.factorial(n + j))
            for j in range(K)
        ])
        return U, A, B, float(n)
    f = math.pi / (2.0 * math.sin(math.pi * theta))
    U = np.array([f * 2.0**theta * 0.25**j / math.factorial(j) * rgamma(j + 1 - theta) for j in k])
    A = np.array([-f * 2.0 ** (-theta) * 0.25**j / math.factorial(j) * rgamma(j + 1 + theta) for j in k])
    return U, A, np.zeros(K), theta


def _small_u_part(r, s, w, params, order, u0):
    """Integral over ``[0, u0]`` from the term-by-term expansion."""
    a = params.alpha1
    d1 = params.d1
    p0 = d1 - 1 - 2 * a * params.theta
    K = _SERIES_ORDER
    m = np.arange(K)
    # Lambda_d1(t) = sum_m lam_m t**(2m)
    lam = np.empty(K)
    lam[0] = 1.0
    for j in range(1, K):
        lam[j] = lam[j - 1] * (-0.25) / (j * (0.5 * d1 + j - 1))
    U, A, B, n = _matern_coeffs(params.theta, K)
    integer_theta = bool(np.any(B))
    lu0 = math.log(u0)

    # scaled separations keep the moments O(1)
    rs = r * u0
    ss = s * u0**a
    pos = ss > 0
    log_half_s = np.zeros_like(s)
    log_half_s[pos] = np.log(0.5 * s[pos])

    total = []
    bound = []

    def add(coef_matrix, moment, q, with_log):
        # int_0^u0 u**(q-1) [log u] du, expressed with the u0 scaling folded in
        if with_log:
            base = u0 ** (p0 + 1) * (lu0 / q - 1.0 / q**2)
        else:
            base = u0 ** (p0 + 1) / q
        total.append(coef_matrix * moment * base)

    rpow = rs[None, :] ** (2 * m[:, None])  # (K, P)
    spow = ss[None, :] ** (2 * m[:, None])
    with np.errstate(divide="ignore", invalid="ignore"):
        snon = np.where(pos[None, :], ss[None, :] ** (2 * n + 2 * m[:, None]), 0.0)
    for mi in range(K):
        for ki in range(K):
            # analytic part: u**(p0 + 2 mi + 2 a ki)
            if U[ki] != 0 and mi + ki > order:
                q = p0 + 1 + 2 * mi + 2 * a * ki
                if q <= 0:
                    raise IntegrabilityError(
                        f"moment ({mi}, {ki}) does not vanish but its power is not integrable; "
                        f"the configuration order {order} is too low"
                    )
                terms = w * rpow[mi] * spow[ki]
                mom = math.fsum(terms)
                add(lam[mi] * U[ki], mom, q, False)
                bound.append(abs(lam[mi] * U[ki] * u0 ** (p0 + 1) / q) * quad._EPS
                             * math.fsum(np.abs(terms)) * 4)
            # non-analytic part: u**(p0 + 2 mi + 2 a (n + ki)) [A + B log(s u**a / 2)]
            if not np.any(pos) or (A[ki] == 0 and B[ki] == 0):
                continue
            q = p0 + 1 + 2 * mi + 2 * a * (n + ki)
            base_terms = w * rpow[mi] * snon[ki]
            # for integer theta, the pieces polynomial in (r, s) vanish by annihilation
            poly_vanishes = integer_theta and mi + int(n) + ki <= order
            coef = B[ki] * log_half_s if poly_vanishes else A[ki] + B[ki] * log_half_s
            mom = math.fsum(base_terms * coef)
            add(lam[mi], mom, q, False)
            if B[ki] != 0 and not poly_vanishes:
                add(lam[mi], math.fsum(base_terms) * B[ki] * a, q, True)
            bound.append(abs(lam[mi] * u0 ** (p0 + 1) / q) * quad._EPS * 4
                         * math.fsum(np.abs(base_terms) * (abs(A[ki]) + abs(B[ki])
                                                           * (np.abs(log_half_s) + abs(lu0) + 1))))
    # truncation after _SERIES_ORDER terms in each index is far below rounding
    # because |r u0|, |s u0**a| <= 2; the error is the rounding bound
    return math.fsum(total), math.fsum(bound)


def _oracle_pairs(r, s, w, params, order, rel_target=_REL_TARGET):
    """``int_0^inf u**p0 sum w Lambda(r u) M(s u**a) du`` for collapsed pairs."""
    a = params.alpha1
    thp = params.theta_prime
    if thp < THETA_PRIME_GUARD:
        raise IntegrabilityError(
            f"theta_prime={thp:.6g} is within {THETA_PRIME_GUARD:g} of 0; "
            "the spectral integral is marginally divergent"
        )
    if order < params.k0:
        raise IntegrabilityError(
            f"configuration order {order} is below k0={params.k0}; the integral diverges at 0"
        )
    if len(w) == 0:
        return QuadResult(0.0, 0.0, 0)
    f = _Integrand(r, s, w, params)
    r_max = float(np.max(r))
    s_max = float(np.max(s))
    cands = [1.0]
    if r_max > 0:
        cands.append(2.0 / r_max)
    if s_max > 0:
        cands.append((2.0 / s_max) ** (1.0 / a))
    u0 = min(cands) if len(cands) > 1 else 1.0

    small, small_err = _small_u_part(r, s, w, params, order, u0)

    # cut-off where every pair with s > 0 has decayed below 1e-18 of M(0)
    decaying = s > 0
    if np.any(decaying):
        x_cut = 40.0
        while matern(params.theta, x_cut) > 1e-18 * f.m0:
            x_cut *= 1.25
        s_min = float(np.min(s[decaying]))
        U = max((x_cut / s_min) ** (1.0 / a), 2.0 * u0)
    else:
        U = 2.0 * u0
    # panels: geometric near u0, at most half an oscillation of the fastest Lambda
    width = math.pi / r_max if r_max > 0 else math.inf
    edges = [u0]
    while edges[-1] < U:
        edges.append(min(edges[-1] + min(edges[-1], width), U))
    edges = np.array(edges)

    # rounding floor of the cancelling pair sum: eps times the integral of the
    # uncancelled magnitudes, bounded by its value with Lambda = 1, M = M(0)
    noise = quad._EPS * math.fsum(np.abs(w)) * f.m0 * u0 ** (f.p0 + 1) / (2 * a * thp)
    mid, mid_err, evals, _ = quad.integrate(
        f, edges, abs_tol=64 * noise, rel_tol=1e-13, max_evals=_MAX_EVALS
    )
    mid_err += 4 * noise

    # tail beyond U: constant pairs analytically, oscillating pairs by panels
    tail = 0.0
    tail_err = 0.0
    c0 = math.fsum(f.w[(f.r == 0) & (f.s == 0)]) * f.m0
    if c0 != 0:
        tail += c0 * U ** (f.p0 + 1) / (-(f.p0 + 1))
    osc = (f.r > 0) & (f.s == 0)
    if np.any(osc):
        L = math.pi / float(np.min(f.r[osc]))
        tol = 1e-2 * rel_target * max(abs(small + mid + tail), 1e-300)
        partial = []
        acc = 0.0
        lo = U
        for _ in range(400):
            v, e, n_e, _ = quad.integrate(
                lambda u: f(u, osc), np.linspace(lo, lo + L, 3), abs_tol=1e-3 * tol, rel_tol=1e-12
            )
            evals += n_e
            tail_err += e
            acc += v
            partial.append(acc)
            lo += L
            if len(partial) >= 12:
                est, werr = quad.wynn_epsilon(partial[-40:])
                if werr <= tol:
                    break
        est, werr = quad.wynn_epsilon(partial[-40:])
        tail += est
        tail_err += werr

    value = small + mid + tail
    err = small_err + mid_err + tail_err
    return QuadResult(value, err, evals)


def _spectral_const(params):
    lg_nu, _ = lgamma_sign(params.nu)
    lg_h, _ = lgamma_sign(0.5 * params.d1)
    return 4.0 * math.exp(
        0.5 * (params.d1 + params.d2) * math.log(math.pi)
        - params.theta * math.log(2.0) - lg_nu - lg_h
    )


def spectral_scale_factor(params):
    """
    Amplitude ``b1**d1 * b2**d2`` of the scaled spectral model.

    The spectral density ``{(|tau|/b1)**(2 alpha1) + (|omega|/b2)**2}**(-nu)``
    has generalized covariance ``b1**d1 b2**d2 G(b1 x, b2 y)``; ``gc_eval``
    returns the lag-scaled part ``G(b1 r, b2 s)``.
    """
    return params.b1 ** params.d1 * params.b2 ** params.d2


def oracle_quadform(cfg, params):
    """
    Quadratic form ``sum_{l,j} lambda_l lambda_j G(z_l - z_j)`` by quadrature
    of the spectral integral.

    With scale factors ``b1``, ``b2`` this is the quadratic form of the scaled
    spectral model, i.e. ``spectral_scale_factor(params)`` times the form of
    ``gc_eval`` (which scales lags only).  Substituting ``u -> u / b1`` in the
    spectral integral turns the scaled model into the unit one at separations
    ``(b1 r, b2 s)``.

    Raises
    ------
    AnnihilationError
        If the configuration weights do not annihilate the required degree.
    IntegrabilityError
        If ``cfg.order < k0`` or ``theta'`` is too close to zero.
    spacetime_gc._quadrature.QuadratureError
        If the error target is not met within the evaluation budget.
    """
    if cfg.d1 != params.d1 or cfg.d2 != params.d2:
        raise ValueError(
            f"configuration dimensions ({cfg.d1}, {cfg.d2}) do not match "
            f"the model ({params.d1}, {params.d2})"
        )
    if not cfg.check:
        res = annihilation_residual(np.hstack((cfg.x, cfg.y)), cfg.weights, cfg.order)
        if res > ANNIHILATION_TOL:
            raise AnnihilationError(
                f"weights do not annihilate polynomials of degree <= {cfg.order}: "
                f"relative residual {res:.3g}"
            )
    r, s, w = _pairs(cfg)
    unit = params.unit_scale()
    res = _oracle_pairs(r * params.b1, s * params.b2, w, unit, cfg.order)
    K = _spectral_const(unit) * spectral_scale_factor(params)
    return QuadResult(K * res.value, K * res.abs_err_est, res.evaluations)


def oracle_point_k0(r, s, params):
    """
    ``G(r, s) = -K int_0^inf u**(d1-1-2 alpha1 theta) (M(0) - Lambda(r u) M(s u**alpha1)) du``
    for models with ``k0 = 0``; scaled like :func:`oracle_quadform`.
    """
    if params.k0 != 0:
        raise ValueError(f"oracle_point_k0 needs k0 = 0: got k0={params.k0}")
    if r < 0 or s < 0:
        raise ValueError(f"r and s must be nonnegative: got r={r}, s={s}")
    if r == 0 and s == 0:
        return QuadResult(0.0, 0.0, 0)
    unit = params.unit_scale()
    res = _oracle_pairs(
        np.array([0.0, r * params.b1]), np.array([0.0, s * params.b2]),
        np.array([-1.0, 1.0]), unit, 0,
    )
    K = _spectral_const(unit) * spectral_scale_factor(params)
    return QuadResult(K * res.value, K * res.abs_err_est, res.evaluations)
