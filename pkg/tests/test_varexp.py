import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from viscodecay.domain import DomainSpec
from viscodecay.varexp import (
    ExponentField,
    check_modular_norm_bounds,
    exponent_profile,
    log_holder_check,
    luxemburg_norm,
    modular,
    validate_exponent_bounds,
)

from conftest import random_smooth_field


class TestBounds:
    def test_constant_two_ok(self, unit_interval):
        f = ExponentField.constant(2.0, unit_interval)
        assert validate_exponent_bounds(f, 6.0).ok

    def test_below_two_rejected(self, unit_interval):
        f = ExponentField.constant(1.5, unit_interval)
        rep = validate_exponent_bounds(f, 6.0)
        assert not rep.ok
        assert rep.worst_value == 1.5

    def test_sine_bump_range(self, unit_interval):
        # 2 + sin^2(pi x) on 101 nodes of (0,1) spans exactly [2, 3]
        f = exponent_profile("sine-bump", {"base": 2.0, "amplitude": 1.0}, unit_interval)
        rep = validate_exponent_bounds(f, 3.0)
        assert rep.ok
        assert f.q1 == pytest.approx(2.0)
        assert f.q2 == pytest.approx(3.0)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            ExponentField(np.array([]))

    def test_above_cap_flagged(self, unit_interval):
        f = ExponentField.constant(7.0, unit_interval)
        assert not validate_exponent_bounds(f, 6.0).ok


class TestLogHolder:
    def test_constant_field_trivially_ok(self, unit_interval):
        f = ExponentField.constant(2.5, unit_interval)
        res = log_holder_check(f, 0.1, 0.5, unit_interval)
        assert res.ok
        assert res.A_required == 0.0

    def test_step_exponent(self, unit_interval):
        x = unit_interval.axes()[0]
        f = ExponentField(np.where(x < 0.5, 2.0, 3.0))
        res = log_holder_check(f, 10.0, 0.5, unit_interval)
        # jump of 1 across one spacing h = 0.01 dominates: -log(0.01)
        assert res.A_required == pytest.approx(-math.log(0.01), rel=1e-12)
        assert res.ok
        assert not log_holder_check(f, 4.0, 0.5, unit_interval).ok

    def test_linear_exponent_maximizer(self, unit_interval):
        # |q(x)-q(y)| = |x-y|, so the statistic is t*(-log t), peaking near 1/e
        f = exponent_profile("linear", {"lo": 2.0, "hi": 3.0}, unit_interval)
        res = log_holder_check(f, 1.0, 0.5, unit_interval)
        # brute-force oracle over the same grid pairs
        x = unit_interval.axes()[0]
        best = 0.0
        for i in range(x.size):
            d = np.abs(x - x[i])
            mask = (d > 0) & (d < 0.5)
            best = max(best, float((d[mask] * -np.log(d[mask])).max()))
        assert res.A_required == pytest.approx(best, rel=1e-12)
        assert res.A_required == pytest.approx(math.exp(-1.0), abs=1e-3)

    def test_vacuous_when_delta_at_spacing(self, unit_interval):
        f = ExponentField.constant(2.0, unit_interval)
        res = log_holder_check(f, 1.0, 0.005, unit_interval)
        assert res.vacuous

    def test_parameter_validation(self, unit_interval):
        f = ExponentField.constant(2.0, unit_interval)
        with pytest.raises(ValueError):
            log_holder_check(f, -1.0, 0.5, unit_interval)
        with pytest.raises(ValueError):
            log_holder_check(f, 1.0, 1.5, unit_interval)


class TestModular:
    def test_unit_function(self):
        dom = DomainSpec(1, (2.0,), (101,))
        q = exponent_profile("linear", {"lo": 2.0, "hi": 4.0}, dom)
        assert modular(np.ones(101), q, dom) == pytest.approx(2.0)

    def test_zero(self, unit_interval):
        q = ExponentField.constant(3.0, unit_interval)
        assert modular(np.zeros(101), q, unit_interval) == 0.0

    def test_constant_cube(self, unit_interval):
        q = ExponentField.constant(3.0, unit_interval)
        assert modular(2.0 * np.ones(101), q, unit_interval) == pytest.approx(8.0)

    def test_grid_mismatch_rejected(self, unit_interval):
        q = ExponentField.constant(2.0, unit_interval)
        with pytest.raises(ValueError):
            modular(np.ones(50), q, unit_interval)

    def test_second_order_refinement(self):
        # halving h should shrink the quadrature error by ~4x for smooth data
        vals = {}
        for n in (51, 101, 201):
            dom = DomainSpec(1, (1.0,), (n,))
            x = dom.axes()[0]
            q = ExponentField(2.0 + x)
            vals[n] = modular(np.exp(x) * (1.0 + 0.5 * x), q, dom)
        ratio = (vals[51] - vals[101]) / (vals[101] - vals[201])
        assert 3.0 < ratio < 5.0


class TestLuxemburg:
    def test_constant_field_constant_exponent(self, unit_interval):
        q = ExponentField.constant(3.0, unit_interval)
        assert luxemburg_norm(2.5 * np.ones(101), q, unit_interval) == pytest.approx(2.5, rel=1e-10)

    def test_zero_field(self, unit_interval):
        q = ExponentField.constant(2.0, unit_interval)
        assert luxemburg_norm(np.zeros(101), q, unit_interval) == 0.0

    def test_l2_on_measure_four(self):
        dom = DomainSpec(1, (4.0,), (101,))
        q = ExponentField.constant(2.0, dom)
        assert luxemburg_norm(np.ones(101), q, dom) == pytest.approx(2.0, rel=1e-10)

    def test_matches_direct_lq_norm(self, unit_interval):
        rng = np.random.default_rng(7)
        for q0 in (2.0, 2.7, 4.0):
            q = ExponentField.constant(q0, unit_interval)
            f = random_smooth_field(unit_interval, rng)
            direct = modular(f, q, unit_interval) ** (1.0 / q0)
            assert luxemburg_norm(f, q, unit_interval) == pytest.approx(direct, rel=1e-10)

    @given(seed=st.integers(0, 2**31), scale=st.floats(1e-3, 1e3))
    def test_homogeneity_constant_exponent(self, unit_interval, seed, scale):
        rng = np.random.default_rng(seed)
        q = ExponentField.constant(2.0 + 2.0 * rng.random(), unit_interval)
        f = rng.normal(size=101)
        base = luxemburg_norm(f, q, unit_interval)
        assert luxemburg_norm(scale * f, q, unit_interval) == pytest.approx(scale * base, rel=1e-8)

    @given(seed=st.integers(0, 2**31))
    @settings(max_examples=30)
    def test_unit_modular_after_normalization(self, unit_interval, seed):
        rng = np.random.default_rng(seed)
        q = exponent_profile("linear", {"lo": 2.0, "hi": 2.0 + 2.0 * rng.random()}, unit_interval)
        f = rng.normal(size=101) * 10.0 ** rng.integers(-3, 4)
        nrm = luxemburg_norm(f, q, unit_interval)
        assert modular(f / nrm, q, unit_interval) == pytest.approx(1.0, rel=1e-8)


class TestSandwich:
    def test_constant_exponent_equality(self, unit_interval):
        q = ExponentField.constant(2.5, unit_interval)
        rng = np.random.default_rng(1)
        assert check_modular_norm_bounds(rng.normal(size=101), q, unit_interval)

    def test_zero_field(self, unit_interval):
        q = ExponentField.constant(2.0, unit_interval)
        assert check_modular_norm_bounds(np.zeros(101), q, unit_interval)

    def test_linear_exponent_random_field(self, unit_interval):
        q = exponent_profile("linear", {"lo": 2.0, "hi": 3.0}, unit_interval)
        rng = np.random.default_rng(11)
        assert check_modular_norm_bounds(rng.normal(size=101), q, unit_interval)

    @given(seed=st.integers(0, 2**31))
    def test_holds_for_random_fields_and_exponents(self, unit_interval, seed):
        rng = np.random.default_rng(seed)
        hi = 2.0 + 3.0 * rng.random()
        q = exponent_profile("linear", {"lo": 2.0, "hi": hi}, unit_interval)
        f = rng.normal(size=101) * 10.0 ** rng.integers(-2, 3)
        assert check_modular_norm_bounds(f, q, unit_interval)


class TestProfiles:
    def test_array_profile(self, unit_interval):
        vals = 2.0 + np.linspace(0, 1, 101)
        f = exponent_profile("array", {"values": vals.tolist()}, unit_interval)
        assert np.allclose(f.values, vals)

    def test_unknown_profile(self, unit_interval):
        with pytest.raises(ValueError, match="unknown exponent profile"):
            exponent_profile("cubic", {}, unit_interval)

    def test_2d_profiles_ride_first_axis(self, unit_square):
        f = exponent_profile("linear", {"lo": 2.0, "hi": 3.0}, unit_square)
        assert f.values.shape == (51, 51)
        assert np.allclose(f.values[:, 0], f.values[:, -1])
