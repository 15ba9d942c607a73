import math

import numpy as np
import pytest

from lpeuler import calculus
from lpeuler.calculus import (ConfigurationError, EstimateReport, SuiteConfig, commutator, commutator_terms,
                              commutators, convolution_majorant_check, ensemble_field, fefferman_stein,
                              leibniz_terms, maximal_function, multiplier_apply, multiplier_terms, paraproduct,
                              paraproduct_residual, parse_symbol, remainder, remainder_specs, remainder_terms,
                              run_suite, sample_rngs)
from lpeuler.euler import PreconditionError, biot_savart, taylor
from lpeuler.lp import (FrequencyGrid, SpectralField, build_partition, delta_j, deriv, dot_grad, grad, lp_norm,
                        random_field, s_n)
from lpeuler.spaces import parse_space

LOG = "log:alpha=1"


def mode(grid, k1, k2):
    x, y = grid.x
    return SpectralField.from_physical(grid, np.cos(grid.unit * (k1 * x + k2 * y)))


class TestParaproduct:
    def test_identity_random(self, grid64, part64, rng):
        for _ in range(5):
            f, g = ensemble_field(grid64, rng), ensemble_field(grid64, rng)
            resid, scale = paraproduct_residual(f, g, part64)
            assert resid < 1e-10 * scale

    def test_constant_factor(self, grid64, part64, rng):
        f = random_field(grid64, rng)
        one = SpectralField.from_physical(grid64, np.ones((64, 64)))
        tfg, tgf, r = paraproduct(f, one, part64)
        assert lp_norm(tfg.physical(), math.inf) < 1e-14
        np.testing.assert_allclose((tfg + tgf + r).physical(), f.physical(), atol=1e-12)

    def test_separated_bands_have_no_remainder(self, grid128, part128):
        f, g = mode(grid128, 1, 0), mode(grid128, 0, 32)
        tfg, tgf, r = paraproduct(f, g, part128)
        assert lp_norm(r.physical(), math.inf) < 1e-14
        np.testing.assert_allclose((tfg + tgf).physical(), f.physical() * g.physical(), atol=1e-13)

    def test_scalar_only(self, grid64, part64, rng):
        v = random_field(grid64, rng, components=2)
        with pytest.raises(ValueError):
            paraproduct(v, v[0], part64)


class TestCommutator:
    def test_constant_velocity(self, grid64, part64, rng):
        u = SpectralField.from_physical(grid64, np.stack([np.full((64, 64), 1.5), np.full((64, 64), -0.5)]))
        w = random_field(grid64, rng)
        for j, c in commutators(u, w, part64).items():
            assert lp_norm(c.physical(), math.inf) < 1e-13

    def test_taylor_two_paths(self, grid64, part64):
        w = taylor(grid64)
        u = biot_savart(w)
        for j in part64.bands:
            direct = dot_grad(u, delta_j(w, j, part64)) - delta_j(dot_grad(u, w), j, part64)
            np.testing.assert_allclose(commutator(u, w, j, part64).physical(), direct.physical(), atol=1e-13)

    def test_random_two_paths_and_telescoping(self, grid64, part64, rng):
        w = ensemble_field(grid64, rng)
        u = biot_savart(ensemble_field(grid64, rng))
        comms = commutators(u, w, part64)
        transport = dot_grad(u, w)
        for j in (0, 2, part64.j_max):
            direct = dot_grad(u, delta_j(w, j, part64)) - delta_j(transport, j, part64)
            np.testing.assert_allclose(comms[j].physical(), direct.physical(), atol=1e-12)
        total = sum(comms.values(), SpectralField.zeros(grid64))
        expected = dot_grad(u, s_n(w, part64.j_max, part64)) - s_n(transport, part64.j_max, part64)
        np.testing.assert_allclose(total.physical(), expected.physical(), atol=1e-12)

    def test_divergence_checked(self, grid64, part64, rng):
        u = random_field(grid64, rng, components=2)
        with pytest.raises(PreconditionError):
            commutators(u, random_field(grid64, rng), part64)

    def test_terms_vanish_for_constant_velocity(self, grid64, part64, rng):
        u = SpectralField.from_physical(grid64, np.stack([np.ones((64, 64)), np.zeros((64, 64))]))
        lhs, rg, rl = commutator_terms(u, random_field(grid64, rng), parse_space("B:s=2,p=2,q=2", LOG), part64)
        assert lhs < 1e-12 and rg == rl == 0

    def test_single_scale_small_sum(self, grid128, part128):
        # u at band 0 and omega at band 4: only bands 3..5 of the commutator can be nonzero
        u = biot_savart(taylor(grid128))
        w = mode(grid128, 16, 0)
        comms = commutators(u, w, part128)
        for j, c in comms.items():
            size = lp_norm(c.physical(), math.inf)
            if j < 3 or j > 5:
                assert size < 1e-13


class TestRemainder:
    def test_zero(self, grid64, part64):
        z = SpectralField.zeros(grid64)
        spec = parse_space("B:s=1,p=4,q=4", LOG)
        assert remainder_terms(z, z, spec, spec, part64)[0] == 0

    def test_target_exponents(self):
        s1 = parse_space("B:s=1,p=4,q=4", LOG)
        s2 = parse_space("B:s=0.5,p=4,q=4")
        t = remainder_specs(s1, s2)
        assert (t.s, t.p, t.q) == (1.5, 2.0, 2.0)

    @pytest.mark.parametrize("a,b", [("B:s=1,p=2,q=1", "B:s=1,p=2,q=2"), ("B:s=0,p=2,q=2", "B:s=0,p=3,q=2"),
                                     ("F:s=1,p=2,q=2", "B:s=1,p=2,q=2")])
    def test_bad_exponents(self, a, b):
        with pytest.raises(ConfigurationError):
            remainder_specs(parse_space(a), parse_space(b))

    def test_disjoint_bands(self, grid128, part128):
        assert lp_norm(remainder(mode(grid128, 1, 0), mode(grid128, 32, 0), part128).physical(), math.inf) < 1e-14


class TestMultipliers:
    @pytest.mark.parametrize("name,i,j", [("riesz_12", 0, 1), ("riesz_11", 0, 0), ("riesz_22", 1, 1)])
    def test_riesz_single_mode(self, grid64, name, i, j):
        k = (3, 4)
        f = mode(grid64, *k)
        out = multiplier_apply(parse_symbol(name), f)
        np.testing.assert_allclose(out.physical(), k[i] * k[j] / 25 * f.physical(), atol=1e-14)

    def test_grad_invlap_div_matches_velocity_gradient(self, grid64):
        w = taylor(grid64)
        out = multiplier_apply(parse_symbol("grad_invlap_div"), w)
        np.testing.assert_allclose(out.physical(), grad(biot_savart(w)).physical(), atol=1e-14)

    def test_zero(self, grid64):
        assert not np.any(multiplier_apply(parse_symbol("biot_savart"), SpectralField.zeros(grid64)).coeffs)

    def test_mean_rejected_for_singular(self, grid64):
        c = SpectralField.from_physical(grid64, np.ones((64, 64)))
        with pytest.raises(PreconditionError):
            multiplier_apply(parse_symbol("biot_savart"), c)
        multiplier_apply(parse_symbol("riesz_12"), c)  # bounded symbol: fine

    def test_unknown(self):
        with pytest.raises(ValueError):
            parse_symbol("riesz_13")

    def test_terms_need_homogeneous_triebel(self, grid64, part64, rng):
        with pytest.raises(ConfigurationError):
            multiplier_terms(parse_symbol("riesz_12"), random_field(grid64, rng), parse_space("B:s=1,p=2,q=2"),
                             part64)


class TestMaximal:
    def test_constant(self, grid64):
        c = SpectralField.from_physical(grid64, np.full((64, 64), -3.0))
        np.testing.assert_allclose(maximal_function(c), 3.0, rtol=1e-12)

    def test_dominates_bump(self, grid64):
        x, y = grid64.x
        bump = np.exp(-((x - np.pi) ** 2 + (y - np.pi) ** 2) / 0.1)
        m = maximal_function(bump, grid64)
        assert np.all(m >= bump - 1e-3)
        assert np.all(m <= bump.max() + 1e-12)

    def test_majorant_bound(self, grid64, part64, rng):
        for _ in range(3):
            ratio, A = convolution_majorant_check(random_field(grid64, rng), part64)
            assert ratio <= A * (1 + 1e-12)

    def test_fefferman_stein_finite(self, grid64, rng):
        fam = [random_field(grid64, rng) for _ in range(3)]
        lhs, rhs = fefferman_stein(fam, 2.0, 2.0)
        assert rhs <= lhs < 50 * rhs


class TestReports:
    def test_ratios_and_violations(self):
        rep = EstimateReport("x", [0.0, 1.0, 2.0, 1.0], [0.0, 2.0, 1.0, 0.0], bound=1.5)
        np.testing.assert_array_equal(rep.ratios, [0.0, 0.5, 2.0, math.inf])
        assert rep.violations == [2, 3]
        assert not rep.ok

    def test_sweep_spread(self):
        rep = EstimateReport("x", [1.0], [1.0], resolution_sweep={64: 1.0, 128: 1.5})
        assert rep.sweep_spread == 1.5

    def test_rng_streams_independent_of_count(self):
        a = [r.standard_normal() for r in sample_rngs(7, 3)]
        b = [r.standard_normal() for r in sample_rngs(7, 5)][:3]
        assert a == b

    def test_unknown_suite(self):
        with pytest.raises(ConfigurationError):
            run_suite("nope", SuiteConfig())

    def test_leibniz_zero(self, grid64, part64, rng):
        f = random_field(grid64, rng)
        lhs, rhs = leibniz_terms(f, SpectralField.zeros(grid64), parse_space("B:s=2,p=2,q=2", LOG), part64)
        assert lhs == 0


@pytest.mark.parametrize("name", sorted(calculus.SUITES))
def test_suites_run_small(name):
    reps = run_suite(name, SuiteConfig(samples=3, grid_n=64, seed=3))
    assert reps
    for rep in reps:
        assert rep.samples == 3
        assert math.isfinite(rep.empirical_constant), rep.estimate_id
        assert rep.ok, rep.estimate_id


def test_suite_deterministic_across_workers():
    a = run_suite("leibniz", SuiteConfig(samples=4, seed=11, workers=1))
    b = run_suite("leibniz", SuiteConfig(samples=4, seed=11, workers=3))
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.lhs, y.lhs)
        np.testing.assert_array_equal(x.rhs, y.rhs)


def test_inadmissible_weight_rejected():
    from lpeuler.weights import AdmissibilityError

    spec = parse_space("B:s=2,p=2,q=2", "log:alpha=0.5")
    with pytest.raises(AdmissibilityError):
        run_suite("embedding", SuiteConfig(samples=2, spec=spec))
