"""
Space-time generalized covariances for the spectral density
``(|tau|**(2 alpha1) + |omega|**2)**(-nu)``.

Modules
-------
special     gamma-family functions, power-law GCs, Matern and Lambda kernels
engine      parameter types and the branch-dispatched evaluator ``gc_eval``
oracle      spectral-integral reference values by quadrature
validation  executable property checks (CPD, dimples, branch agreement)
kriging     intrinsic kriging with polynomial drift
cli         command-line interface
"""

from .engine import (
    Branch,
    CancellationWarning,
    ConvergenceError,
    DivergenceWarning,
    EvalPolicy,
    GCValue,
    InvalidParameterError,
    ModelParams,
    derive,
    gc_aniso,
    gc_asymptotic,
    gc_axis_r,
    gc_axis_s,
    gc_eval,
    gc_isotropic,
    gc_series,
    h_asym_coeffs,
)
from .kriging import KrigingSystem, SingularSystemError, build, predict
from .oracle import oracle_point_k0, oracle_quadform
from .special import PoleError

__all__ = [
    "Branch",
    "CancellationWarning",
    "ConvergenceError",
    "DivergenceWarning",
    "EvalPolicy",
    "GCValue",
    "InvalidParameterError",
    "ModelParams",
    "derive",
    "gc_aniso",
    "gc_asymptotic",
    "gc_axis_r",
    "gc_axis_s",
    "gc_eval",
    "gc_isotropic",
    "gc_series",
    "h_asym_coeffs",
    "KrigingSystem",
    "SingularSystemError",
    "build",
    "predict",
    "oracle_point_k0",
    "oracle_quadform",
    "PoleError",
]

__version__ = "0.1.0"
