import math

import numpy as np
import pytest

from lpeuler.euler import biot_savart, taylor
from lpeuler.iteration import (ConstantTooLargeError, IterationConfig, IterationError, Trajectory,
                               convergence_vs_solver, initial_remainder, iterate, linearized_advance,
                               resolve_horizon, t0)
from lpeuler.lp import FrequencyGrid, SpectralField, lp_norm, s_n
from lpeuler.spaces import parse_space


class TestT0:
    def test_reference_value(self):
        assert t0(1, 1) == 0.0625

    @pytest.mark.parametrize("C", [1.25, 2.0])
    def test_too_large(self, C):
        with pytest.raises(ConstantTooLargeError):
            t0(C, 1.0)

    def test_vanishes_at_limit(self):
        assert t0(1.25 - 1e-9, 1.0) < 1e-9

    def test_homogeneous_in_norm(self):
        assert t0(1, 1000.0) * 1000.0 == pytest.approx(t0(1, 1))
        assert t0(0.01, 50.0) * 50.0 == pytest.approx(t0(0.01, 1.0))

    def test_zero_constant_and_zero_data(self):
        assert t0(0, 2.0) == pytest.approx(math.log(1.25) / 4)
        assert t0(1, 0) == math.inf

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            t0(-1, 1)


class TestLinearized:
    def test_first_iterate_frozen(self, grid64, part64):
        u0 = biot_savart(taylor(grid64))
        prev = Trajectory.zero(grid64, 20, 1e-2)
        adv = linearized_advance(prev, s_n(u0, 1, part64))
        for v in adv.trajectory.values:
            np.testing.assert_allclose(v.coeffs, s_n(u0, 1, part64).coeffs, atol=1e-15)

    def test_taylor_fixed_point(self, grid64):
        u = biot_savart(taylor(grid64))
        steps, dt = 50, 1e-2
        frozen = Trajectory(dt, [u] * (steps + 1), [SpectralField.zeros(grid64, 2)] * (steps + 1))
        adv = linearized_advance(frozen, u)
        worst = max(lp_norm((v - u).physical(), math.inf) for v in adv.trajectory.values)
        assert worst < 1e-8

    def test_zero_data(self, grid64):
        prev = Trajectory.zero(grid64, 5, 1e-2)
        adv = linearized_advance(prev, SpectralField.zeros(grid64, 2))
        assert all(not np.any(v.coeffs) for v in adv.trajectory.values)

    def test_hermite_midpoint_exact_for_cubics(self, grid64):
        # values t^3 at t = 0, 1 with slopes 0, 3: midpoint value 1/8
        one = SpectralField.from_physical(grid64, np.ones((64, 64)))
        tr = Trajectory(1.0, [one * 0.0, one * 1.0], [one * 0.0, one * 3.0])
        assert tr.at_mid(0).mean() == pytest.approx(0.125)


class TestHorizon:
    def test_given_constant(self):
        cfg = IterationConfig(C_empirical=1.0)
        T, C, ok = resolve_horizon(cfg, 1.0)
        assert (T, C, ok) == (0.0625, 1.0, True)

    def test_gate_inapplicable_with_explicit_T(self):
        T, C, ok = resolve_horizon(IterationConfig(C_empirical=2.0, T=0.1), 1.0)
        assert (T, ok) == (0.1, False)

    def test_large_constant_without_T(self):
        with pytest.raises(ConstantTooLargeError):
            resolve_horizon(IterationConfig(C_empirical=2.0), 1.0)

    def test_T_beyond_T0(self):
        with pytest.raises(IterationError):
            resolve_horizon(IterationConfig(C_empirical=1.0, T=1.0), 1.0)
        T, _, _ = resolve_horizon(IterationConfig(C_empirical=1.0, T=1.0, enforce_t0=False), 1.0)
        assert T == 1.0


class TestIterate:
    def test_zero_data(self, grid64):
        res = iterate(SpectralField.zeros(grid64, 2), IterationConfig(n_max=3, T=0.05, dt=1e-2))
        assert res.u0_norm == 0 and all(r.sup_norm == 0 and r.delta_n == 0 for r in res.records)
        assert res.rho == 0

    def test_taylor(self):
        cfg = IterationConfig(n_max=4, dt=1e-2, C_empirical=0.0)
        res = iterate(None, cfg)
        assert res.uniform_bound and res.t0_applicable
        assert res.rho < 0.75
        assert all(r.delta_n < 1e-12 for r in res.records[1:])
        assert convergence_vs_solver(None, cfg, res) < 1e-6

    def test_initial_remainder(self, grid64, part64):
        u0 = biot_savart(taylor(grid64))
        spec = parse_space("B:s=2,p=2,q=2", "log:alpha=1")
        assert initial_remainder(u0, 3, 5, spec, part64) < 1e-15
        assert initial_remainder(u0, -1, 3, spec, part64) > 0
