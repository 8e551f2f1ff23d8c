"""
Real special functions used by the covariance formulas.

Gamma, log-gamma and digamma are implemented here (Lanczos approximation
plus reflection).  The Bessel functions behind the Matern kernel and the
isotropic kernel ``Lambda_d`` come from :mod:`scipy.special`.
"""

import math

import numpy as np
from scipy import special as sc

__all__ = [
    "PoleError",
    "sinpi",
    "gamma_fn",
    "lgamma_sign",
    "rgamma",
    "digamma",
    "pochhammer",
    "power_law_gc",
    "matern",
    "lambda_d",
]

# integer-likeness threshold shared by the power-law kernel and the engine
INT_TOL = 1e-9

_LANCZOS_G = 607.0 / 128.0
_LANCZOS_C = (
    0.99999999999999709182,
    57.156235665862923517,
    -59.597960355475491248,
    14.136097974741747174,
    -0.49191381609762019978,
    0.33994649984811888699e-4,
    0.46523628927048575665e-4,
    -0.98374475304879564677e-4,
    0.15808870322491248884e-3,
    -0.21026444172410488319e-3,
    0.21743961811521264320e-3,
    -0.16431810653676389022e-3,
    0.84418223983852743293e-4,
    -0.26190838401581408670e-4,
    0.36899182659531622704e-5,
)
_LOG_SQRT_2PI = 0.91893853320467274178
_SQRT_2PI = 2.5066282746310005024
_GAMMA_MAX = 171.6243769563027


class PoleError(ValueError):
    """Raised when a function is evaluated at one of its poles."""


def _is_nonpositive_integer(x):
    return x <= 0.0 and x == math.floor(x)


def _check_pole(x, name):
    if _is_nonpositive_integer(x):
        raise PoleError(f"{name} has a pole at x={x!r}")


def sinpi(x):
    """sin(pi*x) with exact argument reduction, so zeros are exact."""
    n = round(x)
    f = x - n
    v = math.sin(math.pi * f)
    return -v if n % 2 else v


def cospi(x):
    n = round(x)
    f = x - n
    v = math.cos(math.pi * f)
    return -v if n % 2 else v


def _lanczos_sum(y):
    # y = x - 1 >= -0.5
    acc = _LANCZOS_C[0]
    for k in range(1, len(_LANCZOS_C)):
        acc += _LANCZOS_C[k] / (y + k)
    return acc


def gamma_fn(x):
    """
    Gamma function for real, non-pole arguments.

    Negative arguments use the reflection formula
    ``Gamma(x) = pi / (sin(pi x) Gamma(1 - x))``.

    Raises
    ------
    PoleError
        At zero and the negative integers.
    OverflowError
        When the result exceeds the double-precision range.
    """
    x = float(x)
    _check_pole(x, "gamma")
    if x < 0.5:
        if 1.0 - x > _GAMMA_MAX:
            # Gamma(1 - x) overflows while Gamma(x) heads to zero
            lg, _ = lgamma_sign(1.0 - x)
            return math.pi / sinpi(x) * math.exp(-lg)
        return math.pi / (sinpi(x) * gamma_fn(1.0 - x))
    if x > _GAMMA_MAX:
        raise OverflowError(f"gamma({x!r}) overflows double precision")
    if x == math.floor(x) and x <= 24:
        return float(math.factorial(int(x) - 1))
    y = x - 1.0
    t = y + _LANCZOS_G + 0.5
    if x < 140:
        return _SQRT_2PI * t ** (y + 0.5) * math.exp(-t) * _lanczos_sum(y)
    # split the power so the intermediate does not overflow
    h = t ** (0.5 * (y + 0.5))
    return (_SQRT_2PI * h * math.exp(-t)) * h * _lanczos_sum(y)


def lgamma_sign(x):
    """
    Return ``(log|Gamma(x)|, sign(Gamma(x)))`` for real non-pole ``x``.
    """
    x = float(x)
    _check_pole(x, "lgamma")
    if x < 0.5:
        sp = sinpi(x)
        lg, _ = lgamma_sign(1.0 - x)
        return math.log(math.pi / abs(sp)) - lg, (1.0 if sp > 0 else -1.0)
    if x == math.floor(x) and x <= 24:
        return math.log(math.factorial(int(x) - 1)), 1.0
    y = x - 1.0
    t = y + _LANCZOS_G + 0.5
    return _LOG_SQRT_2PI + (y + 0.5) * math.log(t) - t + math.log(_lanczos_sum(y)), 1.0


def rgamma(x):
    """Reciprocal gamma function, 1/Gamma(x); entire, zero at the poles of Gamma."""
    x = float(x)
    if _is_nonpositive_integer(x):
        return 0.0
    if x < 0.5:
        return sinpi(x) * gamma_fn(1.0 - x) / math.pi
    if x > _GAMMA_MAX:
        lg, _ = lgamma_sign(x)
        return math.exp(-lg)
    return 1.0 / gamma_fn(x)


_DIGAMMA_ASYM = (
    1.0 / 12,
    -1.0 / 120,
    1.0 / 252,
    -1.0 / 240,
    1.0 / 132,
    -691.0 / 32760,
    1.0 / 12,
)


def digamma(x):
    """
    Digamma function psi(x) = d/dx log Gamma(x).

    Raises
    ------
    PoleError
        At zero and the negative integers.
    """
    x = float(x)
    _check_pole(x, "digamma")
    if x < 0.5:
        return digamma(1.0 - x) - math.pi * cospi(x) / sinpi(x)
    acc = 0.0
    while x < 10.0:
        acc -= 1.0 / x
        x += 1.0
    inv2 = 1.0 / (x * x)
    poly = 0.0
    for c in reversed(_DIGAMMA_ASYM):
        poly = poly * inv2 + c
    return acc + math.log(x) - 0.5 / x - poly * inv2


def pochhammer(a, n):
    """Rising factorial (a)_n = a (a+1) ... (a+n-1), with (a)_0 = 1."""
    out = 1.0
    for j in range(n):
        out *= a + j
    return out


def _nearest_integer(z):
    n = round(z)
    if abs(z - n) <= INT_TOL * max(1.0, abs(z)):
        return int(n)
    return None


def power_law_gc(zeta, x):
    """
    Power-law generalized covariance ``gamma_zeta(x)``.

    For ``zeta > 0`` this is ``Gamma(-zeta) x**(2 zeta)``, replaced by
    ``2 (-1)**(zeta+1) / zeta! * x**(2 zeta) * log(x)`` at integer ``zeta``.
    Non-positive orders are continued as needed by the convergent series:
    ``-2 log(x)`` at ``zeta = 0`` and ``Gamma(-zeta) x**(2 zeta)`` otherwise.

    Raises
    ------
    ValueError
        If ``x < 0``, or ``x == 0`` with ``zeta <= 0``.
    """
    zeta = float(zeta)
    x = float(x)
    if x < 0:
        raise ValueError(f"power_law_gc needs x >= 0, got {x!r}")
    n = _nearest_integer(zeta)
    if x == 0.0:
        if zeta > 0 and n != 0:
            return 0.0
        raise ValueError(f"power_law_gc diverges at x=0 for zeta={zeta!r}")
    if n is not None and n >= 0:
        if n == 0:
            return -2.0 * math.log(x)
        lg = math.lgamma(n + 1)
        sign = 1.0 if (n + 1) % 2 == 0 else -1.0
        return sign * 2.0 * math.exp(2 * n * math.log(x) - lg) * math.log(x)
    lg, sg = lgamma_sign(-zeta)
    return sg * math.exp(lg + 2.0 * zeta * math.log(x))


def matern(theta, t):
    """
    Matern kernel ``t**theta * K_theta(t)``.

    Accepts scalars or arrays.  The value at ``t = 0`` is the limit
    ``2**(theta-1) Gamma(theta)``, which exists only for ``theta > 0``.
    """
    theta = float(theta)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("matern needs t >= 0")
    zero = t == 0
    if np.any(zero) and theta <= 0:
        raise ValueError(f"matern diverges at t=0 for theta={theta!r}")
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        tt = np.where(zero, 1.0, t)
        # kve = K * exp(t); recombining in log space avoids overflow of t**theta
        kve = sc.kve(theta, tt)
        out = np.exp(theta * np.log(tt) - tt) * kve
    if np.any(zero):
        out = np.where(zero, 2.0 ** (theta - 1.0) * gamma_fn(theta), out)
    return out[()] if out.ndim == 0 else out


# switch point between the power series and the Bessel-J closed form
LAMBDA_SWITCH = 8.0
_LAMBDA_TERMS = 48


def _lambda_series(d, t):
    x = -0.25 * t * t
    half = 0.5 * d
    # Horner on the terms' ratio: term_m / term_{m-1} = x / (m (half + m - 1))
    acc = np.ones_like(t)
    for m in range(_LAMBDA_TERMS, 0, -1):
        acc = 1.0 + acc * x / (m * (half + m - 1.0))
    return acc


def _lambda_bessel(d, t):
    mu = 0.5 * d - 1.0
    return 2.0**mu * gamma_fn(0.5 * d) * t ** (-mu) * sc.jv(mu, t)


def lambda_d(d, t):
    """
    Isotropic Fourier kernel
    ``Lambda_d(t) = sum_m (-t**2/4)**m / (m! (d/2)_m)``.

    Equals ``cos t`` for ``d = 1`` and ``sin(t)/t`` for ``d = 3``.  The power
    series is used below ``t = 8`` and the Bessel-J form above.
    """
    if int(d) != d or d < 1:
        raise ValueError(f"lambda_d needs a positive integer dimension, got {d!r}")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("lambda_d needs t >= 0")
    small = t < LAMBDA_SWITCH
    out = np.empty_like(t)
    if np.any(small):
        out[small] = _lambda_series(d, t[small])
    if np.any(~small):
        out[~small] = _lambda_bessel(d, t[~small])
    return out[()] if out.ndim == 0 else out
