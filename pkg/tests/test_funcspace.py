import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nldecay.errors import ConfigError, DomainError, NumericError, ValidationError
from nldecay.funcspace import (
    Expression,
    GridSampled,
    OmegaFn,
    Separable,
    Tabulated,
    constant,
    exponential,
    identity_omega,
    inf_tail,
    integrate,
    integrate_cumulative,
    monomial,
    monotone_check,
    parse_bivariate,
    parse_fn,
    piecewise,
    power_law,
    sup_slice,
    tabulated,
    tail_verdict,
    zero_bivariate,
)


def power_antiderivative(c, alpha, s, t):
    """Closed form of int_s^t c (1 + x)^-alpha dx."""
    if alpha == 1:
        return c * (math.log1p(t) - math.log1p(s))
    return c * ((1 + t) ** (1 - alpha) - (1 + s) ** (1 - alpha)) / (1 - alpha)


class TestFamilies:
    def test_power_law_values(self):
        f = power_law(2.0, 0.5)
        assert f(3.0) == pytest.approx(1.0)
        assert np.allclose(f(np.array([0.0, 8.0])), [2.0, 2.0 / 3.0])

    def test_monomial_is_shiftless_power(self):
        f = monomial(3.0, 2.0)
        assert f(0.0) == 0.0
        assert f(2.0) == pytest.approx(12.0)

    def test_negative_coefficients_rejected(self):
        with pytest.raises(ValidationError):
            constant(-1)
        with pytest.raises(ValidationError):
            power_law(-1, 1)

    def test_negative_time_is_a_domain_error(self):
        with pytest.raises(DomainError):
            power_law(1, 1)(-0.5)

    def test_piecewise_switches_at_breakpoints(self):
        f = piecewise((0.0, constant(1.0)), (2.0, exponential(1.0, 1.0)))
        assert f(1.999) == 1.0
        assert f(2.0) == pytest.approx(math.exp(-2.0))

    @pytest.mark.parametrize("pieces", [
        [(1.0, constant(1.0))],
        [(0.0, constant(1.0)), (0.0, constant(2.0))],
    ])
    def test_piecewise_bad_breakpoints(self, pieces):
        with pytest.raises(ValidationError):
            piecewise(*pieces)

    def test_tabulated_interpolates_and_guards_horizon(self):
        f = Tabulated.from_arrays([0.0, 1.0, 3.0], [0.0, 2.0, 2.0])
        assert f(0.5) == pytest.approx(1.0)
        with pytest.raises(DomainError):
            f(3.5)
        held = Tabulated.from_arrays([0.0, 1.0], [1.0, 3.0], extrapolate=True)
        assert held(10.0) == 3.0

    def test_tabulated_from_csv(self, tmp_path):
        path = tmp_path / "beta.csv"
        path.write_text("t,value\n0,1\n1,0.5\n2,0.25\n")
        f = tabulated(str(path))
        assert f(1.5) == pytest.approx(0.375)
        g = parse_fn('tabulated("beta.csv")', base_dir=str(tmp_path))
        assert g(2.0) == pytest.approx(0.25)

    def test_tabulated_rejects_negative_values(self):
        with pytest.raises(ValidationError):
            Tabulated.from_arrays([0, 1], [1, -1])


class TestParser:
    @pytest.mark.parametrize("text, t, expected", [
        ("power_law(1, 0.5)", 3.0, 0.5),
        ("power_law(2, 1, 0)", 4.0, 0.5),
        ("monomial(1, 1)", 2.5, 2.5),
        ("exponential(1, 2)", 0.5, math.exp(-1.0)),
        ("constant(0.25)", 9.0, 0.25),
        ("0.75", 1.0, 0.75),
        ("piecewise((0, constant(1)), (1, power_law(1, 1)))", 3.0, 0.25),
    ])
    def test_descriptors(self, text, t, expected):
        assert parse_fn(text)(t) == pytest.approx(expected)

    @pytest.mark.parametrize("text", ["power_law(", "gamma(1)", "lambda t: t", "power_law(1, x)"])
    def test_bad_descriptors(self, text):
        with pytest.raises(ConfigError):
            parse_fn(text)

    def test_describe_roundtrip(self):
        for fn in (power_law(1, 0.5, 2), exponential(3, 0.1), constant(2)):
            assert parse_fn(fn.describe()).describe() == fn.describe()


class TestQuadrature:
    @pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5, 2.0, 3.0])
    def test_power_law_against_antiderivative(self, alpha):
        f = power_law(1.0, alpha)
        for s, t in [(0.0, 1.0), (0.3, 50.0), (2.0, 1e4)]:
            exact = power_antiderivative(1.0, alpha, s, t)
            assert integrate(f, s, t, 1e-10) == pytest.approx(exact, rel=1e-9, abs=1e-12)

    def test_log_oracle(self):
        assert integrate(power_law(1, 1), 0, math.e - 1) == pytest.approx(1.0, abs=1e-10)

    def test_exponential(self):
        assert integrate(exponential(1, 2), 0, 50) == pytest.approx(0.5, abs=1e-10)

    def test_piecewise_kink_integrated_accurately(self):
        f = piecewise((0.0, constant(1.0)), (math.pi, constant(3.0)))
        assert integrate(f, 0, 10) == pytest.approx(math.pi + 3 * (10 - math.pi), abs=1e-10)

    def test_tabulated_integral_is_exact_trapezoid(self):
        f = Tabulated.from_arrays([0, 1, 2], [0, 2, 0])
        assert integrate(f, 0, 2) == pytest.approx(2.0)
        assert integrate(f, 0.5, 1.5) == pytest.approx(1.5)

    def test_cumulative_matches_pointwise(self):
        grid = np.linspace(0, 5, 11)
        cum = integrate_cumulative(exponential(1, 1), grid, 1e-12)
        assert np.allclose(cum, 1 - np.exp(-grid), atol=1e-11)

    def test_nonfinite_integrand_raises(self):
        with pytest.raises(NumericError):
            integrate(monomial(1, -1), 0, 1)

    def test_reversed_bounds_rejected(self):
        with pytest.raises(DomainError):
            integrate(constant(1), 2, 1)


class TestTailVerdict:
    @pytest.mark.parametrize("alpha, status, estimate", [
        (1.5, "converged", 2.0),
        (2.0, "converged", 1.0),
        (3.0, "converged", 0.5),
        (0.5, "diverged", math.inf),
        (1.0, "diverged", math.inf),
    ])
    def test_power_laws(self, alpha, status, estimate):
        v = tail_verdict(power_law(1.0, alpha))
        assert v.status == status
        if status == "converged":
            assert v.estimate == pytest.approx(estimate, abs=5e-6)

    def test_zero_function_converges_to_zero(self):
        v = tail_verdict(constant(0))
        assert v.converged and v.estimate == 0.0

    def test_finite_horizon_is_inconclusive(self):
        f = Tabulated.from_arrays([0, 10], [1, 1])
        assert tail_verdict(f).status == "inconclusive"

    def test_witness_reports_horizon(self):
        v = tail_verdict(exponential(1, 1))
        w = v.witness()
        assert w["horizon"] == v.horizon > 0


class TestOmegaAndInf:
    def test_identity_omega_is_certified(self):
        assert identity_omega().monotone_certified

    def test_omega_must_vanish_at_zero(self):
        with pytest.raises(ValidationError):
            OmegaFn(constant(1))

    def test_non_monotone_omega_rejected(self):
        bump = piecewise((0.0, monomial(1, 1)), (1.0, power_law(2, 1, 1)))
        with pytest.raises(ValidationError):
            OmegaFn(bump).certify()

    def test_monotone_check(self):
        assert monotone_check(monomial(1, 2))
        assert not monotone_check(power_law(1, 1))

    def test_inf_tail(self):
        f = piecewise((0.0, monomial(1, 1)), (1.0, constant(1)))
        assert inf_tail(f, 2.0, 100.0).value == 1.0
        assert inf_tail(monomial(1, 1), 0.5, 10).value == pytest.approx(0.5)


class TestBivariate:
    def test_piecewise_branches(self, piecewise_f):
        assert piecewise_f(3.0, 0.5) == 1.0
        assert piecewise_f(3.0, 2.0) == pytest.approx(4.0)

    @pytest.mark.parametrize("x, v, expected", [(2.0, 2.0, 3.0), (5.0, 1.0, 1.0), (0.0, 3.0, 1.0)])
    def test_sup_slice_piecewise(self, piecewise_f, x, v, expected):
        assert sup_slice(piecewise_f, x, v) == pytest.approx(expected, abs=1e-12)

    def test_sup_slice_interior_max(self):
        f = Expression("1 + x * y / (1 + y * y)")  # peak at y = 1
        assert sup_slice(f, 3.0, 2.0) == pytest.approx(2.5, abs=1e-6)

    def test_sup_slice_separable_exact(self):
        f = Separable(power_law(1, 1), monomial(1, 2), constant(0.5))
        assert sup_slice(f, 1.0, 3.0) == pytest.approx(0.5 * 9 + 0.5)

    def test_sup_slice_vectorised(self, piecewise_f):
        out = sup_slice(piecewise_f, np.array([0.0, 1.0, 2.0]), 2.0)
        assert np.allclose(out, [1.0, 2.0, 3.0])

    def test_discontinuous_where_rejected(self):
        with pytest.raises(ValidationError):
            Expression("where(y <= 1, 1, 2 + x)")

    @pytest.mark.parametrize("text", ["__import__('os')", "x.real", "sin(x)", "[x]"])
    def test_expression_whitelist(self, text):
        with pytest.raises(ConfigError):
            Expression(text)

    def test_negative_expression_rejected(self):
        with pytest.raises(ValidationError):
            Expression("x - 5")

    def test_grid_sampled_bilinear(self):
        g = GridSampled.from_arrays([0, 1], [0, 1], [[0, 1], [1, 2]])
        assert g(0.5, 0.5) == pytest.approx(1.0)

    def test_parse_bivariate_forms(self):
        assert parse_bivariate(0)(1.0, 1.0) == 0.0
        sep = parse_bivariate({"separable": {"g": "power_law(1, 1)", "phi": "monomial(1, 1)"}})
        assert sep(1.0, 4.0) == pytest.approx(2.0)
        assert zero_bivariate()(5.0, 5.0) == 0.0


@settings(max_examples=40, deadline=None)
@given(c=st.floats(0.1, 10), alpha=st.floats(0.2, 3.0), s=st.floats(0, 20), w=st.floats(0.01, 200))
def test_integral_matches_antiderivative_property(c, alpha, s, w):
    exact = power_antiderivative(c, alpha, s, s + w)
    assert integrate(power_law(c, alpha), s, s + w, 1e-10) == pytest.approx(exact, rel=1e-8, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(s=st.floats(0, 10), m=st.floats(0, 10), w=st.floats(0, 10))
def test_integral_is_additive(s, m, w):
    f = exponential(2.0, 0.3) + power_law(1.0, 1.5)
    whole = integrate(f, s, s + m + w)
    parts = integrate(f, s, s + m) + integrate(f, s + m, s + m + w)
    assert whole == pytest.approx(parts, rel=1e-9, abs=1e-11)
