import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qhack import theory
from qhack.hacking import OptimizerSettings, UnitaryNetwork, optimize_probe, rotated
from qhack.random import RngState, haar_unitary
from qhack.theory import DimensionProfile, avg_p_opt, hyp2f1_half, i_kappa, i_kappa_approx

I1 = 8 / (3 * math.pi)


class TestHypergeometric:
    def test_zero(self):
        assert hyp2f1_half(0.0) == 1.0

    def test_one(self):
        assert hyp2f1_half(1.0) == pytest.approx(I1, abs=1e-15)

    @pytest.mark.parametrize("z", [0.0625, 0.25, 0.44, 1.0])
    def test_quadrature_oracle(self, z):
        assert abs(hyp2f1_half(z) - theory.mp_moment_quadrature(z, 0.5)) <= 1e-8

    @pytest.mark.parametrize("z", [-0.1, 1.0001, math.nan])
    def test_domain(self, z):
        with pytest.raises(ValueError):
            hyp2f1_half(z)

    @given(z=st.floats(0.0, 1.0))
    def test_range(self, z):
        assert 0.84 < hyp2f1_half(z) <= 1.0

    def test_series_near_one(self):
        # terms decay like n^-3 here, so the cap must be large enough
        assert hyp2f1_half(0.999) == pytest.approx(theory.mp_moment_quadrature(0.999, 0.5), abs=1e-8)

    def test_terminating_at_one(self):
        # 2F1(0, -1; 2; 1) = 1 has a pole-free Gauss sum with 1/Gamma(0) = 0 factors
        assert theory.mp_moment(1.0, 1.0) == pytest.approx(1.0)

    def test_divergent_at_one(self):
        with pytest.raises(ValueError):
            theory.hyp2f1_series(1.0, 1.0, 1.5, 1.0)


class TestQuadrature:
    @pytest.mark.parametrize("lam", [0.1, 0.5, 1.0])
    def test_normalization(self, lam):
        assert theory.mp_moment_quadrature(lam, 0.0) == pytest.approx(1.0, abs=1e-10)

    @pytest.mark.parametrize("lam", [0.1, 0.5, 1.0])
    def test_mean(self, lam):
        assert theory.mp_moment_quadrature(lam, 1.0) == pytest.approx(1.0, abs=1e-10)

    def test_half_moment_at_one(self):
        assert theory.mp_moment_quadrature(1.0, 0.5) == pytest.approx(I1, abs=1e-10)

    @pytest.mark.parametrize("lam", [0.05, 0.3, 0.7, 1.0])
    @pytest.mark.parametrize("m", [-0.25, 0.5, 1.5, 2.0, 2.7])
    def test_series_identity(self, lam, m):
        assert theory.mp_moment(lam, m) == pytest.approx(theory.mp_moment_quadrature(lam, m), abs=1e-8)

    def test_second_moment(self):
        # E[x^2] = 1 + lam for this scaling
        assert theory.mp_moment_quadrature(0.4, 2.0) == pytest.approx(1.4, abs=1e-10)

    @pytest.mark.parametrize("lam", [0.0, -1.0, 1.5])
    def test_domain(self, lam):
        with pytest.raises(ValueError):
            theory.mp_moment_quadrature(lam, 0.5)


class TestIKappa:
    def test_value_at_one(self):
        assert i_kappa(1.0) == pytest.approx(0.848826, abs=1e-6)

    def test_kappa_two(self):
        assert i_kappa(2.0) ** 2 == pytest.approx(0.9364, abs=1e-4)

    def test_approx_at_one(self):
        assert i_kappa_approx(1.0) == 0.875
        assert abs(i_kappa_approx(1.0) - I1) < 0.03

    def test_symmetric_argument(self):
        assert i_kappa(0.5) == i_kappa(2.0)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            i_kappa(0.0)

    @given(k=st.floats(1.0, 50.0), dk=st.floats(1e-3, 5.0))
    def test_increasing(self, k, dk):
        assert i_kappa(k + dk) > i_kappa(k)

    @given(k=st.floats(1.0, 100.0))
    def test_approximation_gap(self, k):
        assert abs(i_kappa(k) - i_kappa_approx(k)) <= 0.027


class TestAverage:
    def test_square_sixteen(self):
        expected = I1**2 + (1 - I1**2) / 256
        assert avg_p_opt(DimensionProfile(16, 16)) == pytest.approx(expected, abs=1e-14)
        assert expected == pytest.approx(0.7216, abs=1e-4)

    def test_large_limit(self):
        assert avg_p_opt(DimensionProfile(4096, 4096)) == pytest.approx(0.7205, abs=1e-4)

    def test_spectator(self):
        assert avg_p_opt(DimensionProfile(8, 8, d0=2)) == pytest.approx(avg_p_opt(DimensionProfile(8, 8)) / 4)

    def test_narrow_branch(self):
        p = DimensionProfile(12, 6)
        ik2 = hyp2f1_half(0.25) ** 2
        assert avg_p_opt(p) == pytest.approx(0.25 * ik2 + (1 - ik2) / 144)

    def test_asymmetric_partition(self):
        p = DimensionProfile(2, 8, dk=4, dl=4)
        assert p.ratio == 4.0
        ik2 = hyp2f1_half(0.25) ** 2
        assert avg_p_opt(p) == pytest.approx(ik2 + (1 - ik2) / 8)

    def test_continuity(self):
        # ratio (db/da)^2 straddles 1 by about 2e-6 on either side
        n = 10**6
        below = avg_p_opt(DimensionProfile(n + 1, n))
        above = avg_p_opt(DimensionProfile(n, n + 1))
        assert DimensionProfile(n + 1, n).ratio < 1 < DimensionProfile(n, n + 1).ratio
        assert abs(above - below) <= 1e-4

    @pytest.mark.parametrize("da", [2, 4, 8])
    def test_increasing_in_db(self, da):
        vals = [avg_p_opt(DimensionProfile(da, db)) for db in range(1, 6 * da)]
        assert np.all(np.diff(vals) > 0)

    def test_invalid_profile(self):
        with pytest.raises(ValueError):
            DimensionProfile(2, 3, dk=2, dl=2)
        with pytest.raises(ValueError):
            DimensionProfile(0, 3)

    def test_narrow_branch_monte_carlo(self):
        # the kappa < 1 argument convention checked against sampled optima
        gen = RngState(5).generator()
        vals = []
        for _ in range(20):
            ch = rotated(UnitaryNetwork(haar_unitary(72, gen), 12, 6))
            vals.append(optimize_probe(ch, OptimizerSettings(restarts=0)).p_hack)
        assert np.mean(vals) == pytest.approx(avg_p_opt(DimensionProfile(12, 6)), abs=0.01)
