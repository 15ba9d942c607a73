import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lpeuler.weights import (AdmissibilityError, SlowlyVaryingWeight, WeightError, admissibility_integral,
                             dyadic_constant, dyadic_tail_bound, evaluate, exact_karamata, is_admissible,
                             karamata_reconstruct, paper_karamata, parse_weight, read_weight_table,
                             require_admissible, slow_variation_defect, write_weight_table, KaramataRepresentation)

mpmath.mp.dps = 40


def log_w(alpha):
    return SlowlyVaryingWeight.log_power(alpha)


def oracle_psi(alpha, t):
    return float(mpmath.log(mpmath.e + mpmath.mpf(t)) ** mpmath.mpf(alpha) - 1)


class TestEvaluate:
    def test_zero_at_origin_for_alpha_one(self):
        assert evaluate(log_w(1), 0.0) == 0.0

    def test_closed_form_alpha_two(self):
        assert evaluate(log_w(2), math.e**2 - math.e) == pytest.approx(3.0, rel=1e-14)

    @pytest.mark.parametrize("alpha,t", [(0.6, 1000.0), (1.0, 1e6), (2.5, 3.0), (0.3, 1e12)])
    def test_matches_high_precision(self, alpha, t):
        assert evaluate(log_w(alpha), t) == pytest.approx(oracle_psi(alpha, t), rel=1e-13)

    def test_array_in_array_out(self):
        out = evaluate(log_w(1), np.array([0.0, 1.0, 2.0]))
        assert isinstance(out, np.ndarray) and out.shape == (3,)

    def test_negative_t_rejected(self):
        with pytest.raises(WeightError):
            evaluate(log_w(1), -1.0)

    def test_tabulated_interpolates_and_holds(self):
        w = SlowlyVaryingWeight.tabulated([0, 1, 3], [1, 2, 4])
        assert evaluate(w, 2.0) == 3.0
        assert evaluate(w, 100.0) == 4.0

    @pytest.mark.parametrize("t,psi", [([1, 2], [1, 1]), ([0, 0], [1, 1]), ([0, 1], [2, 1]), ([0], [1])])
    def test_bad_tables_rejected(self, t, psi):
        with pytest.raises(WeightError):
            SlowlyVaryingWeight.tabulated(t, psi)

    def test_nonpositive_alpha_rejected(self):
        with pytest.raises(WeightError):
            log_w(0.0)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0.05, 5.0), st.lists(st.floats(0, 1e9), min_size=2, max_size=20))
    def test_non_decreasing(self, alpha, ts):
        ts = np.sort(np.array(ts))
        vals = evaluate(log_w(alpha), ts)
        assert np.all(np.diff(vals) >= -1e-12 * np.abs(vals[1:]))


class TestParsing:
    def test_log_spec(self):
        assert parse_weight("log:alpha=1.5") == log_w(1.5)

    @pytest.mark.parametrize("text", ["log:beta=1", "log:alpha=", "exp:alpha=1", "log:alpha=x"])
    def test_bad_specs(self, text):
        with pytest.raises(WeightError):
            parse_weight(text)

    def test_table_round_trip(self, tmp_path):
        path = tmp_path / "w.csv"
        write_weight_table(path, [0, 1, 10], [0.5, 1.0, 2.0])
        w = parse_weight(f"table:{path}")
        assert w == read_weight_table(path)
        assert evaluate(w, 10.0) == 2.0

    def test_table_header_checked(self, tmp_path):
        path = tmp_path / "w.csv"
        path.write_text("x,y\n0,1\n1,2\n")
        with pytest.raises(WeightError):
            read_weight_table(path)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.01, 100.0))
    def test_describe_round_trip(self, alpha):
        w = log_w(alpha)
        assert evaluate(parse_weight(w.describe()), 1e4) == pytest.approx(evaluate(w, 1e4), rel=1e-5)


class TestSlowVariation:
    def test_lambda_one_is_exactly_zero(self):
        assert np.all(slow_variation_defect(log_w(0.7), 1.0, [1.0, 5.0, 1e9]) == 0)

    def test_defect_small_at_large_t(self):
        assert slow_variation_defect(log_w(1), 2.0, [1e6])[0] < 0.2

    def test_defect_strictly_decreasing(self):
        d = slow_variation_defect(log_w(1), 2.0, 10.0 ** np.arange(2, 9))
        assert np.all(np.diff(d) < 0)

    def test_defect_matches_formula(self):
        t = 1e4
        expected = oracle_psi(1, 2 * t) / oracle_psi(1, t) - 1
        assert slow_variation_defect(log_w(1), 2.0, [t])[0] == pytest.approx(expected, rel=1e-12)

    def test_vanishing_weight_guarded(self):
        w = SlowlyVaryingWeight.tabulated([0, 100], [0, 0])
        with pytest.raises(WeightError):
            slow_variation_defect(w, 2.0, [2.0])

    def test_dyadic_constant_bounded(self):
        # psi(2^(j+l))/psi(2^j) stays bounded for slowly varying psi
        assert dyadic_constant(log_w(1), 1, range(1, 60)) < 2.5
        assert dyadic_constant(log_w(1), 1, range(40, 60)) < 1.05


class TestKaramata:
    def test_zero_eps_returns_c(self):
        rep = KaramataRepresentation(a=1.0, c_limit=5.0, c_of_t=lambda t: 5.0, eps_of_t=lambda s: 0.0)
        assert karamata_reconstruct(rep, 17.0) == pytest.approx(5.0, rel=1e-14)

    def test_constant_eps(self):
        rep = KaramataRepresentation(a=1.0, c_limit=2.0, c_of_t=lambda t: 2.0, eps_of_t=lambda s: 0.1)
        assert karamata_reconstruct(rep, math.e) == pytest.approx(2.0 * math.exp(0.1), rel=1e-12)

    def test_below_anchor_rejected(self):
        rep = paper_karamata(log_w(1))
        with pytest.raises(WeightError):
            karamata_reconstruct(rep, 0.5)

    @pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
    def test_exact_representation_pointwise(self, alpha):
        w = log_w(alpha)
        rep = exact_karamata(w)
        for t in (rep.a * 1.5, 10.0 + rep.a, 1e3, 1e7):
            assert karamata_reconstruct(rep, t, rtol=1e-12) == pytest.approx(evaluate(w, t), rel=1e-9)

    def test_textbook_parameters_agree_up_to_a_constant(self):
        w = log_w(1)
        rep = paper_karamata(w)
        ratios = [karamata_reconstruct(rep, t) / evaluate(w, t) for t in (1e4, 1e6, 1e8, 1e10)]
        drift = np.abs(np.diff(ratios)) / ratios[-1]
        assert np.all(np.diff(drift) < 0)
        assert drift[-1] < 0.05

    def test_tables_have_no_closed_form(self):
        with pytest.raises(WeightError):
            paper_karamata(SlowlyVaryingWeight.constant(1.0))


class TestAdmissibility:
    @pytest.mark.parametrize("alpha,r,expected", [(1, 2, True), (0.5, 2, False), (3, 1, True), (0.4, 2, False)])
    def test_log_family_criterion(self, alpha, r, expected):
        assert bool(is_admissible(log_w(alpha), r)) is expected

    def test_require_raises(self):
        with pytest.raises(AdmissibilityError):
            require_admissible(log_w(0.5), 2)

    def test_convergent_increments_shrink(self):
        vals = [admissibility_integral(log_w(1), 2, 10.0**k).partial_integral for k in range(2, 9)]
        inc = np.diff(vals)
        assert np.all(inc > 0) and np.all(np.diff(inc) < 0)
        assert inc[-1] < 0.1 * inc[0]

    def test_convergent_integral_matches_quadrature(self):
        got = admissibility_integral(log_w(1), 2, 1e8).partial_integral
        expect = mpmath.quad(lambda x: (mpmath.log(mpmath.e + mpmath.exp(x)) - 1) ** -2, [0, 5, 10, mpmath.log(1e8)])
        assert got == pytest.approx(float(expect), rel=1e-8)

    def test_divergent_increments_do_not_shrink_to_zero(self):
        # t_max = e^X with X doubling: increments grow like X^(1 - 0.8) instead of shrinking
        xs = (32, 64, 128, 256, 512)
        inc = np.diff([admissibility_integral(log_w(0.4), 2, math.exp(x)).partial_integral for x in xs])
        assert np.all(np.diff(inc) > 0)
        conv = np.diff([admissibility_integral(log_w(1), 2, math.exp(x)).partial_integral for x in xs])
        assert np.all(np.diff(conv) < 0)

    def test_constant_weight_logarithmic(self):
        c = 3.0
        res = admissibility_integral(SlowlyVaryingWeight.constant(c), 1, 1e6)
        assert res.partial_integral == pytest.approx(math.log(1e6) / c, rel=1e-10)

    def test_zero_weight_flags_divergence(self):
        res = admissibility_integral(SlowlyVaryingWeight.tabulated([0, 10], [0, 0]), 2, 100)
        assert res.divergent and math.isinf(res.partial_integral)

    def test_dyadic_tail_bound_dominates_sum(self):
        w = log_w(1)
        tail = sum(evaluate(w, 2.0**i) ** -2 for i in range(21, 400))
        assert tail <= dyadic_tail_bound(w, 2, 20)
        assert math.isinf(dyadic_tail_bound(log_w(0.5), 2, 20))

    def test_tabulated_tail_test(self):
        # a finite table only shows local decay rates, so it needs a long range
        t = 2.0 ** np.arange(0, 60)
        good = SlowlyVaryingWeight.tabulated(np.r_[0, t], np.r_[0.0, np.log(math.e + t) ** 2 - 1])
        flat = SlowlyVaryingWeight.tabulated(np.r_[0, t], np.r_[0.0, np.log(math.e + t) ** 0.3 - 1])
        assert is_admissible(good, 2).admissible and is_admissible(good, 2).empirical
        assert not is_admissible(flat, 2).admissible

    def test_r_infinity(self):
        assert is_admissible(log_w(0.1), math.inf)
