import math
import warnings

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reference import c_coeff as ref_c
from reference import series as ref_series
from spacetime_gc.engine import (
    Branch,
    CancellationWarning,
    ConvergenceError,
    EvalPolicy,
    InvalidParameterError,
    ModelParams,
    c_coeff,
    derive,
    gc_aniso,
    gc_asymptotic,
    gc_axis_r,
    gc_axis_s,
    gc_eval,
    gc_isotropic,
    gc_series,
    h_asym_coeffs,
    series_terms,
)
from spacetime_gc.special import PoleError, gamma_fn, power_law_gc, rgamma


def s_for_z(z, r, alpha1):
    return 2.0 * (z * (0.5 * r) ** 2) ** (alpha1 / 2.0)


class TestModelParams:
    @pytest.mark.parametrize(
        "args, expected",
        [
            ((2, 2, 1, 1), (1.5, 1.25, 2)),
            ((1, 1.5, 1, 1), (1.0, 0.5, 0)),
            ((2, 0.95, 1, 1), (0.45, 0.2, 0)),
        ],
    )
    def test_derive(self, args, expected):
        th, thp, k0 = derive(ModelParams(*args))
        assert th == pytest.approx(expected[0], abs=1e-15)
        assert thp == pytest.approx(expected[1], abs=1e-15)
        assert k0 == expected[2]

    def test_k0_snaps_near_integer(self):
        # alpha1 theta' = 2 up to rounding
        p = ModelParams.from_theta_prime(2.5, 0.8)
        assert p.k0 == 2

    def test_from_theta_prime(self):
        p = ModelParams.from_theta_prime(2, 0.45)
        assert p.nu == pytest.approx(1.2)
        assert p.theta_prime == pytest.approx(0.45)

    @pytest.mark.parametrize(
        "kwargs, message",
        [
            (dict(alpha1=0.5, nu=2), "alpha1 must be >= 1"),
            (dict(alpha1=1, nu=0.9), "theta_prime must be positive: got -0.1"),
            (dict(alpha1=1, nu=0.4), "theta must be positive"),
            (dict(alpha1=1, nu=2, d1=0), "d1 must be a positive integer"),
            (dict(alpha1=1, nu=2, b1=-1), "b1 must be positive"),
            (dict(alpha1=1, nu=float("nan")), "nu must be finite"),
        ],
    )
    def test_invalid(self, kwargs, message):
        with pytest.raises(InvalidParameterError, match=message):
            ModelParams(**kwargs)

    def test_policy_invalid(self):
        with pytest.raises(InvalidParameterError, match="rel_tol must be positive"):
            EvalPolicy(rel_tol=0)
        with pytest.raises(InvalidParameterError, match="z_crossover"):
            EvalPolicy(z_crossover=3.0)


class TestCoefficients:
    def test_c0_isotropic(self):
        assert c_coeff(0, ModelParams(1, 1.5)) == pytest.approx(math.pi, rel=1e-15)

    def test_c0_alpha2(self):
        expected = math.sqrt(math.pi) * gamma_fn(0.25)
        assert c_coeff(0, ModelParams(2, 2)) == pytest.approx(expected, rel=1e-14)

    def test_c1_isotropic(self):
        assert c_coeff(1, ModelParams(1, 1.5)) == pytest.approx(math.pi, rel=1e-15)

    @pytest.mark.parametrize("m", [0, 1, 5, 30])
    @pytest.mark.parametrize("alpha1, d1, d2", [(1.5, 1, 1), (2.5, 2, 1), (3, 3, 2)])
    def test_matches_reference(self, m, alpha1, d1, d2):
        p = ModelParams.from_theta_prime(alpha1, 0.3, d1, d2)
        assert c_coeff(m, p) == pytest.approx(float(ref_c(m, alpha1, d1, d2)), rel=1e-13)

    def test_rejects_fractional_m(self):
        with pytest.raises(ValueError):
            c_coeff(1.5, ModelParams(1, 1.5))


class TestSeries:
    def test_r0_closed_form(self):
        p = ModelParams(2, 2)
        expected = math.sqrt(math.pi) * gamma_fn(0.25) / 2 * gamma_fn(-1.25) * 0.5**2.5
        g = gc_series(0, 1, p)
        assert g.value == pytest.approx(expected, rel=1e-14)
        assert g.value == pytest.approx(2.2273311987326831381, rel=1e-14)

    def test_generic_value(self):
        g = gc_series(1, 2, ModelParams(1.5, 2))
        assert g.branch is Branch.SERIES
        assert g.value == pytest.approx(20.716147498733382756, rel=1e-13)
        assert g.err_est < 1e-10 * abs(g.value)

    @pytest.mark.parametrize(
        "alpha1, tp, r, s",
        [
            (1.5, 0.3, 0.3, 0.7),
            (2.5, 0.8, 2.0, 1.0),
            (3.0, 0.2, 2.0, 1.0),
            (1.2, 1.7, 1.0, 1.5),
            (2.0, 0.45, 3.0, 4.0),
        ],
    )
    def test_matches_reference(self, alpha1, tp, r, s):
        p = ModelParams.from_theta_prime(alpha1, tp)
        g = gc_series(r, s, p)
        ref = float(ref_series(r, s, alpha1, p.nu))
        assert abs(g.value - ref) <= max(g.err_est, 1e-13 * abs(ref))
        assert abs(g.value - ref) <= 1e-11 * abs(ref)

    def test_integer_orders_use_log_form(self):
        # alpha1 theta' = 2: the m = 2 term has order zero
        p = ModelParams(2, 1.75)
        g = gc_series(1.3, 0.8, p)
        ref = float(ref_series(1.3, 0.8, 2, 1.75))
        assert g.value == pytest.approx(ref, rel=1e-12)

    def test_series_terms(self):
        p = ModelParams(1.5, 2)
        t = series_terms(1, 2, p, n_terms=5)
        assert len(t) == 5
        assert t[0] == pytest.approx(
            c_coeff(0, p) / (1.5 * gamma_fn(2)) * power_law_gc(p.theta_prime, 1.0), rel=1e-14
        )

    def test_term_budget(self):
        with pytest.raises(ConvergenceError):
            gc_series(2, s_for_z(0.3, 2, 1.5), ModelParams(1.5, 2), EvalPolicy(max_terms=5))

    def test_cancellation_warning(self):
        p = ModelParams(1.5, 2)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            g = gc_series(2, s_for_z(0.05, 2, 1.5), p)
        assert any(issubclass(w.category, CancellationWarning) for w in caught)
        assert not g.err_est <= 1e-10 * abs(g.value)


class TestAxes:
    def test_axis_r_zero(self):
        assert gc_axis_r(0, ModelParams(1.5, 2)).value == 0.0

    def test_axis_r_isotropic(self):
        expected = math.pi / gamma_fn(1.5) * gamma_fn(-0.5) * 0.5
        assert gc_axis_r(1, ModelParams(1, 1.5)).value == pytest.approx(expected, rel=1e-14)

    def test_axis_r_log_case(self):
        # alpha1 theta' = 2 = k0; the log term vanishes at r = 2
        p = ModelParams(2, 1.75)
        assert p.k0 == 2
        g = gc_axis_r(2, p)
        assert g.value == pytest.approx(2.3636690192476170119, rel=1e-14)

    def test_axis_r_log_case_is_limit(self):
        # the log case is the nu -> nu0 limit up to a multiple of r**(2 k0)
        p = ModelParams(2, 1.75)
        ratios = []
        for r in (0.4, 1.3, 3.0):
            lo = gc_axis_r(r, p.with_nu(1.75 - 1e-6)).value
            hi = gc_axis_r(r, p.with_nu(1.75 + 1e-6)).value
            mid = gc_axis_r(r, p).value
            ratios.append((mid - 0.5 * (lo + hi)) / r**4)
        assert max(ratios) - min(ratios) <= 1e-6 * max(abs(x) for x in ratios)

    def test_axis_s_zero(self):
        assert gc_axis_s(0, ModelParams(1.5, 2)).value == 0.0

    def test_axis_s_equals_series_at_r0(self):
        p = ModelParams(2.5, 2.2)
        assert gc_axis_s(0.7, p).value == gc_series(0, 0.7, p).value

    def test_axis_s_isotropic(self):
        p = ModelParams(1, 1.5)
        expected = math.pi / gamma_fn(1.5) * gamma_fn(-0.5) * 0.5
        assert gc_axis_s(1, p).value == pytest.approx(expected, rel=1e-14)
        assert gc_axis_s(1, p).value == pytest.approx(gc_isotropic(0, 1, p).value, rel=1e-14)


class TestIsotropic:
    def test_origin(self):
        assert gc_isotropic(0, 0, ModelParams(1, 1.5)).value == 0.0

    def test_rotational_invariance(self):
        p = ModelParams(1, 1.5)
        assert gc_isotropic(3, 4, p).value == pytest.approx(gc_isotropic(5, 0, p).value, rel=1e-15)

    def test_value(self):
        p = ModelParams(1, 1.5)
        expected = -(math.pi**2) / (2 * gamma_fn(1.5) ** 2)
        assert gc_isotropic(1, 0, p).value == pytest.approx(expected, rel=1e-14)
        assert gc_isotropic(1, 0, p).value == pytest.approx(gc_axis_r(1, p).value, rel=1e-14)

    # for alpha1 = 1 the series converges only for r < s
    POINTS = [(0.4, 0.9), (0.5, 2.0), (1.0, 3.0), (0.2, 0.5), (0.1, 1.7), (0.7, 1.1)]

    @pytest.mark.parametrize("nu, d1, d2", [(1.3, 1, 1), (2.2, 2, 1), (2.3, 1, 2), (2.6, 3, 1)])
    def test_matches_series(self, nu, d1, d2):
        p = ModelParams(1, nu, d1, d2)
        for r, s in self.POINTS:
            ref = float(ref_series(r, s, 1, nu, d1, d2))
            assert gc_isotropic(r, s, p).value == pytest.approx(ref, rel=1e-12)

    @pytest.mark.parametrize("nu, d1, d2", [(2.5, 1, 2), (2.0, 1, 1), (3.0, 2, 2)])
    def test_integer_theta_prime_matches_series_up_to_polynomial(self, nu, d1, d2):
        # both are limits of the same family; they may differ by an even
        # polynomial of degree <= 2 k0
        p = ModelParams(1, nu, d1, d2)
        assert p.theta_prime == round(p.theta_prime)
        diffs, rows = [], []
        for r, s in self.POINTS:
            diffs.append(gc_isotropic(r, s, p).value - float(ref_series(r, s, 1, nu, d1, d2)))
            rows.append([r ** (2 * i) * s ** (2 * j) for i in range(p.k0 + 1)
                         for j in range(p.k0 + 1 - i)])
        coef, *_ = np.linalg.lstsq(np.array(rows), np.array(diffs), rcond=None)
        resid = np.array(rows) @ coef - np.array(diffs)
        assert np.max(np.abs(resid)) <= 1e-11 * max(1.0, np.max(np.abs(diffs)))

    def test_rejects_anisotropic(self):
        with pytest.raises(InvalidParameterError):
            gc_isotropic(1, 1, ModelParams(2, 2))


class TestAsymptoticCoefficients:
    def test_h10_zero(self):
        h1, _ = h_asym_coeffs(0, ModelParams(1.5, 2.1))
        assert h1 == 0.0

    @pytest.mark.parametrize("ell", [0, 1, 2, 5])
    def test_h1_vanishes_for_integer_alpha(self, ell):
        h1, _ = h_asym_coeffs(ell, ModelParams(2, 1.3))
        assert h1 == 0.0

    def test_h20(self):
        p = ModelParams(1.5, 2.1)
        a, th, thp = 1.5, p.theta, p.theta_prime
        _, h20 = h_asym_coeffs(0, p)
        expected = a * gamma_fn(th) * gamma_fn(-a * thp) * rgamma(a * th)
        assert h20 == pytest.approx(expected, rel=1e-13)
        pre = math.pi / (gamma_fn(p.nu) * a)
        r = 1.7
        assert pre * h20 * (r / 2) ** (2 * a * thp) == pytest.approx(gc_axis_r(r, p).value, rel=1e-13)

    def test_pole_rejected(self):
        # theta' alpha1 = 2 exactly
        with pytest.raises(PoleError, match="excluded"):
            h_asym_coeffs(0, ModelParams.from_theta_prime(2.5, 0.8))

    def test_theta_integer_rejected(self):
        with pytest.raises(PoleError):
            h_asym_coeffs(1, ModelParams(1.5, 2.5))  # theta = 2

    def test_negative_ell(self):
        with pytest.raises(ValueError):
            h_asym_coeffs(-1, ModelParams(1.5, 2.1))


class TestAsymptotic:
    def test_axis_limit_exact(self):
        p = ModelParams(1.5, 2)
        assert gc_asymptotic(2, 0, p).value == gc_axis_r(2, p).value

    def test_matches_series_at_moderate_z(self):
        p = ModelParams(1.5, 2)
        s = s_for_z(0.1, 2, 1.5)
        a = gc_asymptotic(2, s, p, warn=False)
        b = gc_series(2, s, p, warn=False)
        assert abs(a.value - b.value) <= a.err_est + b.err_est
        assert abs(a.value - b.value) <= 1e-6 * abs(b.value)

    @pytest.mark.parametrize("alpha1", [1.1, 1.3, 1.5, 1.7, 1.9, 2.0, 2.5, 3.0])
    @pytest.mark.parametrize("tp", [0.3, 0.8])
    def test_error_estimate_is_honest(self, alpha1, tp):
        p = ModelParams.from_theta_prime(alpha1, tp)
        for z in np.geomspace(0.02, 1.0, 8):
            for r in (0.5, 2.0):
                s = s_for_z(z, r, alpha1)
                try:
                    ref = gc_series(r, s, p, warn=False)
                except ConvergenceError:
                    continue
                if not ref.err_est <= 1e-11 * abs(ref.value):
                    continue
                a = gc_asymptotic(r, s, p, warn=False)
                assert abs(a.value - ref.value) <= a.err_est + ref.err_est

    def test_false_minimum_avoided(self):
        # the ell-th coefficient nearly vanishes via sin(pi ell alpha1)
        p = ModelParams.from_theta_prime(1.1, 0.3)
        r = 2.0
        s = s_for_z(0.8254041852680182, r, 1.1)
        a = gc_asymptotic(r, s, p, warn=False)
        ref = -18.227090070354887
        assert abs(a.value - ref) <= a.err_est
        assert abs(a.value) < 100

    def test_coincident_singularities(self):
        # alpha1 theta' = 2 and theta = 1 at the same nu
        p = ModelParams.from_theta_prime(2.5, 0.8)
        assert p.theta == pytest.approx(1.0)
        z = 0.014677992676220698
        for r in (0.5, 2.0):
            s = s_for_z(z, r, 2.5)
            a = gc_asymptotic(r, s, p, warn=False)
            b = gc_series(r, s, p, warn=False)
            assert abs(a.value - b.value) <= a.err_est + b.err_est
            assert abs(a.value - b.value) <= 1e-6 * abs(b.value)

    @pytest.mark.parametrize("delta", [0.0, 3e-5, -3e-5, 2e-3])
    def test_continuity_near_singular_nu(self, delta):
        p0 = ModelParams.from_theta_prime(2.0, 1.0)  # alpha1 theta' = 2
        p = p0.with_nu(p0.nu + delta)
        r, s = 2.0, s_for_z(0.01, 2.0, 2.0)
        a = gc_asymptotic(r, s, p, warn=False)
        ref = float(ref_series(r, s, 2.0, p.nu, dps=120, tol_digits=40))
        assert abs(a.value - ref) <= a.err_est
        assert abs(a.value - ref) <= 1e-7 * abs(ref)

    def test_rejects_r0(self):
        with pytest.raises(ValueError):
            gc_asymptotic(0, 1, ModelParams(1.5, 2))


class TestEval:
    def test_origin(self):
        assert gc_eval(0, 0, ModelParams(1.5, 2.1)).value == 0.0

    def test_reference_point(self):
        g = gc_eval(1, 1, ModelParams(2, 0.95))
        assert g.value == pytest.approx(-16.020991788020810361, rel=1e-13)

    @pytest.mark.parametrize(
        "alpha1, tp, r, s, ref",
        [
            (1.5, 0.3, 0.3, 0.7, -8.0651505150162294305),
            (1.5, 0.3, 5.0, 0.2, -37.680862428039305),
            (2.5, 0.8, 5.0, 0.2, 13.225303963058312742),
            (3.0, 0.2, 5.0, 0.2, -81.071935564823666983),
        ],
    )
    def test_frozen_values(self, alpha1, tp, r, s, ref):
        g = gc_eval(r, s, ModelParams.from_theta_prime(alpha1, tp))
        assert abs(g.value - ref) <= max(g.err_est, 1e-13 * abs(ref))
        assert g.value == pytest.approx(ref, rel=1e-11)

    def test_small_z_uses_asymptotic(self):
        g = gc_eval(2, 0.01, ModelParams(1.5, 2))
        assert g.branch is Branch.ASYMPTOTIC
        assert g.err_est <= 1e-10 * abs(g.value)

    def test_branch_choice_is_accurate(self):
        for alpha1 in (1.2, 1.5, 2.0, 2.5, 3.0):
            for tp in (0.2, 0.5, 1.3):
                p = ModelParams.from_theta_prime(alpha1, tp)
                for r in (0.1, 1.0, 5.0):
                    for z in np.geomspace(1e-4, 3, 9):
                        g = gc_eval(r, s_for_z(z, r, alpha1), p)
                        assert math.isfinite(g.value)
                        assert g.err_est <= 1e-4 * abs(g.value)

    @settings(max_examples=40, deadline=None)
    @given(
        st.floats(1.05, 3.0),
        st.floats(0.05, 2.0),
        st.floats(0.05, 5.0),
        st.floats(0.05, 5.0),
        st.sampled_from([0.5, 2.0, 7.0]),
    )
    def test_scaling_law(self, alpha1, tp, r, s, lam):
        p = ModelParams.from_theta_prime(alpha1, tp)
        a = gc_eval(lam * r, lam**alpha1 * s, p)
        b = gc_eval(r, s, p)
        # polynomial parts of degree <= 2 k0 break the homogeneity
        if p.k0 == 0 and 2 * alpha1 * tp - round(2 * alpha1 * tp) != 0:
            scaled = lam ** (2 * alpha1 * tp) * b.value
            tol = a.err_est + lam ** (2 * alpha1 * tp) * b.err_est + 1e-12 * abs(a.value)
            assert abs(a.value - scaled) <= max(tol, 1e-10 * abs(a.value))

    def test_scale_parameters(self):
        p = ModelParams(1.5, 2.1, b1=2.0, b2=0.5)
        assert gc_eval(1.0, 3.0, p).value == gc_eval(2.0, 1.5, p.unit_scale()).value

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            gc_eval(-1, 1, ModelParams(1.5, 2))


class TestAniso:
    def test_identity(self):
        p = ModelParams(1.5, 2.1, d1=2, d2=1)
        x, y = np.array([0.3, 0.4]), np.array([0.7])
        assert gc_aniso(x, y, np.eye(2), np.eye(1), p).value == gc_eval(0.5, 0.7, p).value

    def test_scalar_multiple(self):
        p = ModelParams(1.5, 2.1, d1=2, d2=1)
        x, y = np.array([0.3, 0.4]), np.array([0.7])
        assert gc_aniso(x, y, 3 * np.eye(2), np.eye(1), p).value == pytest.approx(
            gc_eval(1.5, 0.7, p).value, rel=1e-14
        )

    def test_rotation(self):
        p = ModelParams(1.5, 2.1, d1=2, d2=1)
        c, s = math.cos(0.7), math.sin(0.7)
        R = np.array([[c, -s], [s, c]])
        x, y = np.array([0.3, 0.4]), np.array([0.7])
        assert gc_aniso(x, y, R, np.eye(1), p).value == pytest.approx(
            gc_aniso(x, y, np.eye(2), np.eye(1), p).value, rel=1e-13
        )

    def test_shape_mismatch(self):
        p = ModelParams(1.5, 2.1, d1=2, d2=1)
        with pytest.raises(ValueError):
            gc_aniso([1.0], [1.0], np.eye(2), np.eye(1), p)
