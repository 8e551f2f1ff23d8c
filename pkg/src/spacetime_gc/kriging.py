"""
Intrinsic kriging with the space-time generalized covariance.

The predictor at a target is ``sum_j lambda_j value_j`` where the weights
solve the bordered system

    [ G   P ] [lambda]   [g(target)]
    [ P^T 0 ] [  mu  ] = [p(target)]

with ``G`` the generalized covariance between sites, ``g`` between sites and
target, and ``P`` the monomials of total degree ``<= k0`` (the constraint
``P^T lambda = p(target)`` makes the prediction error an authorized linear
combination).  ``G`` is indefinite in general, so the system is factored
with a symmetric indefinite (Bunch-Kaufman) factorization.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack

from .engine import DEFAULT_POLICY, gc_eval
from .oracle import monomial_exponents

__all__ = [
    "SingularSystemError",
    "KrigingSystem",
    "build",
    "predict",
    "predict_with_error",
    "kriging_weights",
    "read_sites_csv",
    "read_targets_csv",
    "write_predictions_csv",
]

_EPS = np.finfo(float).eps
# reciprocal condition numbers below n * this are treated as singular
_RCOND_FLOOR = 1e3 * _EPS


class SingularSystemError(ArithmeticError):
    """The bordered kriging system is singular to working precision."""

    def __init__(self, message, condition):
        super().__init__(message)
        self.condition = condition


@dataclass(frozen=True)
class KrigingSystem:
    """
    A factored kriging system.

    Attributes
    ----------
    sites : ndarray, shape (n, d1 + d2)
        Site coordinates, spatial components first.
    values : ndarray, shape (n,)
    k : int
        Drift degree (equal to ``params.k0``).
    gram : ndarray, shape (n, n)
        Generalized covariance between sites.
    gram_err : ndarray, shape (n, n)
        Error estimates of the ``gram`` entries.
    drift_matrix : ndarray, shape (n, q)
        Scaled monomials at the sites.
    condition : float
        Estimated 1-norm condition number of the bordered matrix.
    """

    sites: np.ndarray
    values: np.ndarray
    k: int
    params: object
    policy: object
    gram: np.ndarray
    gram_err: np.ndarray
    drift_matrix: np.ndarray
    condition: float
    _center: np.ndarray
    _halfwidth: np.ndarray
    _exponents: tuple
    _matrix: np.ndarray
    _ldu: np.ndarray
    _ipiv: np.ndarray
    _dual: np.ndarray

    @property
    def n_sites(self):
        return len(self.values)

    def _drift(self, points):
        u = (np.atleast_2d(points) - self._center) / self._halfwidth
        return np.column_stack([np.prod(u ** np.array(e), axis=1) for e in self._exponents])

    def _solve(self, rhs):
        x, info = lapack.dsytrs(self._ldu, self._ipiv, rhs)
        if info != 0:
            raise ArithmeticError(f"symmetric indefinite solve failed: info={info}")
        # one step of iterative refinement
        resid = rhs - self._matrix @ x
        dx, _ = lapack.dsytrs(self._ldu, self._ipiv, resid)
        return x + dx


def _split(points, d1, d2):
    z = np.atleast_2d(np.asarray(points, dtype=float))
    if z.shape[1] != d1 + d2:
        raise ValueError(f"points need d1 + d2 = {d1 + d2} coordinates: got {z.shape[1]}")
    return z


def _gc_between(a, b, d1, params, policy):
    """``G`` and its error estimates between point sets ``a`` and ``b``."""
    r = np.linalg.norm(a[:, None, :d1] - b[None, :, :d1], axis=-1)
    s = np.linalg.norm(a[:, None, d1:] - b[None, :, d1:], axis=-1)
    val = np.empty(r.shape)
    err = np.empty(r.shape)
    for idx in np.ndindex(r.shape):
        g = gc_eval(float(r[idx]), float(s[idx]), params, policy)
        val[idx] = g.value
        err[idx] = g.err_est
    return val, err


def build(sites, values, params, policy=DEFAULT_POLICY):
    """
    Assemble and factor the kriging system.

    Parameters
    ----------
    sites : array_like, shape (n, d1 + d2)
        Coordinates, spatial components first.
    values : array_like, shape (n,)
    params : ModelParams
    policy : EvalPolicy

    Raises
    ------
    ValueError
        If there are fewer sites than drift monomials.
    SingularSystemError
        If the bordered system is singular (e.g. duplicate sites or sites
        that are not unisolvent for the drift).
    """
    d1, d2 = params.d1, params.d2
    z = _split(sites, d1, d2)
    v = np.asarray(values, dtype=float).reshape(-1)
    n = len(z)
    if len(v) != n:
        raise ValueError(f"got {n} sites but {len(v)} values")
    k = params.k0
    exps = tuple(monomial_exponents(d1 + d2, k))
    q = len(exps)
    if n < q:
        raise ValueError(
            f"degree-{k} drift in {d1 + d2} dimensions needs at least {q} sites: got {n}"
        )

    center = 0.5 * (z.min(axis=0) + z.max(axis=0))
    half = 0.5 * (z.max(axis=0) - z.min(axis=0))
    half = np.where(half > 0, half, 1.0)

    gram, gram_err = _gc_between(z, z, d1, params, policy)
    gram = 0.5 * (gram + gram.T)
    u = (z - center) / half
    drift = np.column_stack([np.prod(u ** np.array(e), axis=1) for e in exps])

    m = np.zeros((n + q, n + q))
    m[:n, :n] = gram
    m[:n, n:] = drift
    m[n:, :n] = drift.T
    ldu, ipiv, info = lapack.dsytrf(m)
    anorm = float(np.max(np.sum(np.abs(m), axis=0)))
    if info > 0:
        raise SingularSystemError(
            "bordered kriging system is exactly singular "
            f"(zero pivot {info}; duplicate or non-unisolvent sites); condition = inf",
            math.inf,
        )
    rcond, _ = lapack.dsycon(ldu, ipiv, anorm)
    cond = math.inf if rcond == 0 else 1.0 / rcond
    if rcond < (n + q) * _RCOND_FLOOR:
        raise SingularSystemError(
            f"bordered kriging system is singular to working precision: condition = {cond:.3g}",
            cond,
        )

    system = KrigingSystem(
        sites=z,
        values=v,
        k=k,
        params=params,
        policy=policy,
        gram=gram,
        gram_err=gram_err,
        drift_matrix=drift,
        condition=cond,
        _center=center,
        _halfwidth=half,
        _exponents=exps,
        _matrix=m,
        _ldu=ldu,
        _ipiv=ipiv,
        _dual=None,
    )
    rhs = np.concatenate((v, np.zeros(q)))[:, None]
    object.__setattr__(system, "_dual", system._solve(rhs)[:, 0])
    return system


def _target_rhs(system, targets):
    p = system.params
    t = _split(targets, p.d1, p.d2)
    g, g_err = _gc_between(system.sites, t, p.d1, p, system.policy)
    rhs = np.vstack((g, system._drift(t).T))
    return rhs, g_err


def kriging_weights(system, target):
    """
    Kriging weights ``(lambda, mu)`` for one target.

    ``lambda`` multiplies the observed values; ``mu`` are the Lagrange
    multipliers of the drift constraints.
    """
    rhs, _ = _target_rhs(system, target)
    x = system._solve(rhs)[:, 0]
    n = system.n_sites
    return x[:n], x[n:]


def predict_with_error(system, targets):
    """
    Predictions at ``targets`` with first-order error estimates.

    The estimate propagates the ``err_est`` of every covariance entry
    through the solve: with dual weights ``w = A^{-1} [values; 0]`` and
    primal weights ``lambda``, it is
    ``sum |w_j| e(g_j) + sum |lambda_i| e(G_ij) |w_j|`` plus a rounding term.

    Returns
    -------
    mean, err_est : ndarray
    """
    rhs, g_err = _target_rhs(system, targets)
    n = system.n_sites
    w = system._dual
    mean = rhs.T @ w
    lam = system._solve(rhs)[:n]
    prop = np.abs(w[:n]) @ g_err + np.abs(lam).T @ system.gram_err @ np.abs(w[:n])
    scale = np.abs(rhs).T @ np.abs(w)
    err = prop + _EPS * system.condition * scale
    return mean, err


def predict(system, target):
    """Kriging prediction ``sum_j lambda_j value_j`` at one target."""
    mean, _ = predict_with_error(system, target)
    return float(mean[0])


def _read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        rows = [row for row in reader if row and any(c.strip() for c in row)]
    return header, rows


def _columns(header, path):
    xs = [h for h in header if h.startswith("x") and h[1:].isdigit()]
    ys = [h for h in header if h.startswith("y") and h[1:].isdigit()]
    want = [f"x{i + 1}" for i in range(len(xs))] + [f"y{i + 1}" for i in range(len(ys))]
    if not xs or not ys or xs + ys != want:
        raise ValueError(f"{path}: header must start with x1..xd1,y1..yd2: got {header}")
    return len(xs), len(ys)


def read_sites_csv(path):
    """
    Read ``x1,...,xd1,y1,...,yd2,value`` rows.

    Returns
    -------
    sites : ndarray, shape (n, d1 + d2)
    values : ndarray, shape (n,)
    d1, d2 : int
    """
    header, rows = _read_rows(path)
    d1, d2 = _columns(header, path)
    if len(header) != d1 + d2 + 1 or header[-1] != "value":
        raise ValueError(f"{path}: expected a final 'value' column: got {header}")
    data = np.array([[float(c) for c in row] for row in rows], dtype=float)
    if data.ndim != 2 or data.shape[1] != d1 + d2 + 1:
        raise ValueError(f"{path}: every row needs {d1 + d2 + 1} fields")
    return data[:, :-1], data[:, -1], d1, d2


def read_targets_csv(path):
    """Read ``x1,...,xd1,y1,...,yd2`` rows (a trailing ``value`` column is ignored)."""
    header, rows = _read_rows(path)
    d1, d2 = _columns(header, path)
    data = np.array([[float(c) for c in row[: d1 + d2]] for row in rows], dtype=float)
    if data.ndim != 2 or data.shape[1] != d1 + d2:
        raise ValueError(f"{path}: every row needs {d1 + d2} coordinates")
    return data, d1, d2


def write_predictions_csv(path, targets, mean, err, d1, d2):
    """Write ``x1..xd1,y1..yd2,value,err_est`` rows with 17 significant digits."""
    header = [f"x{i + 1}" for i in range(d1)] + [f"y{i + 1}" for i in range(d2)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header + ["value", "err_est"])
        for t, m, e in zip(np.atleast_2d(targets), mean, err):
            w.writerow([f"{c:.17g}" for c in t] + [f"{m:.17g}", f"{e:.17g}"])
