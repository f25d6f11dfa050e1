import math

import numpy as np
import pytest
from scipy import integrate, stats

from priorcanon.groups import (
    MatrixFisherParams, PriorDistribution, mf_cross_entropy, mf_log_normalizer, mf_logpdf,
    mf_mean_coefficient, rotation_2d, sample_uniform_rotation,
)

# log c(s) and N(s) from the Bessel closed forms (30-digit mpmath):
# SO(2): c = I0(2s); SO(3): c = e^s (I0(2s) - I1(2s)); N = (d log c / ds) / dim.
BESSEL_ORACLE = {
    # s: (log c dim 2, log c dim 3, N dim 2, N dim 3)
    0.5: (0.23591435850717864869, 0.14461960885113795184, 0.44638996589653450705, 0.20421709434202876348),
    1.0: (0.82399354148295628293, 0.62741116731457083121, 0.69777465796400798201, 0.43626312435541335616),
    2.0: (2.4249727955154593099, 2.4333764689055972954, 0.86352261102455058285, 0.72120351156958259701),
    5.0: (7.9429720831186955545, 9.9748583626844361986, 0.94859982595484595897, 0.89701246941501233844),
}


class TestLogNormalizer:
    @pytest.mark.parametrize("dim", [2, 3])
    def test_zero(self, dim):
        assert mf_log_normalizer(0.0, dim) == 0.0

    @pytest.mark.parametrize("s", sorted(BESSEL_ORACLE))
    def test_bessel_oracle(self, s):
        assert mf_log_normalizer(s, 2) == pytest.approx(BESSEL_ORACLE[s][0], abs=1e-10)
        assert mf_log_normalizer(s, 3) == pytest.approx(BESSEL_ORACLE[s][1], abs=1e-10)

    def test_dim2_direct_quadrature(self):
        ref = integrate.quad(lambda t: math.exp(2 * math.cos(t)), 0, 2 * math.pi, epsabs=0, epsrel=1e-13)[0]
        assert mf_log_normalizer(1.0, 2) == pytest.approx(math.log(ref / (2 * math.pi)), abs=1e-10)

    def test_dim3_monte_carlo(self):
        R = sample_uniform_rotation(np.random.default_rng(7), 3, size=1_000_000)
        vals = np.exp(np.trace(R, axis1=1, axis2=2))
        mean, se = vals.mean(), vals.std(ddof=1) / math.sqrt(len(vals))
        assert abs(math.exp(mf_log_normalizer(1.0, 3)) - mean) <= 3 * se

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            mf_log_normalizer(-0.1, 3)

    def test_large_concentration_finite(self):
        assert math.isfinite(mf_log_normalizer(500.0, 3))


class TestMeanCoefficient:
    @pytest.mark.parametrize("dim", [2, 3])
    def test_zero(self, dim):
        assert mf_mean_coefficient(0.0, dim) == 0.0

    @pytest.mark.parametrize("s", sorted(BESSEL_ORACLE))
    def test_bessel_oracle(self, s):
        assert mf_mean_coefficient(s, 2) == pytest.approx(BESSEL_ORACLE[s][2], abs=1e-10)
        assert mf_mean_coefficient(s, 3) == pytest.approx(BESSEL_ORACLE[s][3], abs=1e-10)

    @pytest.mark.parametrize("dim", [2, 3])
    def test_monotone(self, dim):
        vals = [mf_mean_coefficient(s, dim) for s in np.arange(0, 10.01, 0.5)]
        assert all(b > a for a, b in zip(vals, vals[1:]))
        assert vals[-1] < 1.0

    def test_monte_carlo_trace(self):
        # importance weights exp(2 tr R) / c(2) under Haar sampling
        s = 2.0
        R = sample_uniform_rotation(np.random.default_rng(11), 3, size=1_000_000)
        tr = np.trace(R, axis1=1, axis2=2)
        w = np.exp(s * tr - mf_log_normalizer(s, 3))
        vals = w * tr
        mean, se = vals.mean(), vals.std(ddof=1) / math.sqrt(len(vals))
        assert abs(3 * mf_mean_coefficient(s, 3) - mean) <= 3 * se


class TestLogpdf:
    @pytest.mark.parametrize("dim", [2, 3])
    def test_uniform(self, rng, dim):
        p = MatrixFisherParams(np.eye(dim), 0.0)
        for R in sample_uniform_rotation(rng, dim, size=5):
            assert mf_logpdf(R, p) == 0.0

    def test_mode_is_maximum(self, rng):
        mode = sample_uniform_rotation(rng, 3)
        p = MatrixFisherParams(mode, 1.7)
        others = sample_uniform_rotation(rng, 3, size=10_000)
        best = max(mf_logpdf(R, p) for R in others)
        assert mf_logpdf(mode, p) > best

    @pytest.mark.parametrize("s", [0.3, 1.0, 4.0])
    def test_von_mises_in_2d(self, s):
        # Haar on SO(2) is d theta / 2 pi, so the density is 2 pi times the von Mises pdf with kappa 2 s
        mode_angle = 0.4
        p = MatrixFisherParams(rotation_2d(mode_angle), s)
        for theta in np.linspace(-3, 3, 7):
            ref = math.log(2 * math.pi) + stats.vonmises.logpdf(theta, 2 * s, loc=mode_angle)
            assert mf_logpdf(rotation_2d(theta), p) == pytest.approx(ref, abs=1e-10)

    @pytest.mark.parametrize("s", [0.0, 0.5, 1.0, 5.0])
    def test_integrates_to_one(self, s):
        p2 = MatrixFisherParams(np.eye(2), s)
        val2 = integrate.quad(lambda t: math.exp(mf_logpdf(rotation_2d(t), p2)) / (2 * math.pi),
                              0, 2 * math.pi, epsabs=0, epsrel=1e-12, limit=200)[0]
        p3 = MatrixFisherParams(np.eye(3), s)
        from priorcanon.groups import axis_angle, haar_angle_density
        val3 = integrate.quad(lambda w: math.exp(mf_logpdf(axis_angle([0, 0, 1], w), p3)) * haar_angle_density(w),
                              0, math.pi, epsabs=0, epsrel=1e-12, limit=200)[0]
        assert abs(val2 - 1) <= 1e-6 and abs(val3 - 1) <= 1e-6

    def test_invalid_rotation(self):
        from priorcanon.errors import InvalidRotationError
        with pytest.raises(InvalidRotationError):
            mf_logpdf(2 * np.eye(3), MatrixFisherParams(np.eye(3), 1.0))


class TestParams:
    def test_from_matrix(self, rng):
        R = sample_uniform_rotation(rng, 3)
        p = MatrixFisherParams.from_matrix(4.0 * R)
        np.testing.assert_allclose(p.mode, R, atol=1e-12)
        assert p.concentration == pytest.approx(4.0)

    def test_negative_concentration(self):
        with pytest.raises(ValueError):
            MatrixFisherParams(np.eye(3), -1.0)

    def test_delta_prior(self):
        d = PriorDistribution.delta(8)
        assert d.pmf(0) == 1.0 and d.pmf(3) == 0.0 and d.pmf(8) == 1.0
        assert sum(d.pmf(k) for k in range(8)) == 1.0


class TestCrossEntropy:
    def test_zero_concentration(self, rng):
        p = MatrixFisherParams(np.eye(3), 0.0)
        q = MatrixFisherParams(sample_uniform_rotation(rng, 3), 3.0)
        assert mf_cross_entropy(p, q) == 0.0

    def test_same_mode_monte_carlo(self):
        s = 1.0
        p = q = MatrixFisherParams(np.eye(3), s)
        R = sample_uniform_rotation(np.random.default_rng(5), 3, size=1_000_000)
        tr = np.trace(R, axis1=1, axis2=2)
        w = np.exp(s * tr - mf_log_normalizer(s, 3))
        vals = w * (s * tr - mf_log_normalizer(s, 3))
        mean, se = vals.mean(), vals.std(ddof=1) / math.sqrt(len(vals))
        assert abs(mf_cross_entropy(p, q) - mean) <= 3 * se

    def test_maximized_at_aligned_mode(self, rng):
        q = MatrixFisherParams(sample_uniform_rotation(rng, 3), 2.0)
        aligned = mf_cross_entropy(MatrixFisherParams(q.mode, 1.5), q)
        others = [mf_cross_entropy(MatrixFisherParams(M, 1.5), q) for M in sample_uniform_rotation(rng, 3, size=1000)]
        assert aligned > max(others)

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            mf_cross_entropy(MatrixFisherParams(np.eye(2), 1.0), MatrixFisherParams(np.eye(3), 1.0))

    def test_closed_form(self, rng):
        Rp, Rq = sample_uniform_rotation(rng, 3), sample_uniform_rotation(rng, 3)
        val = mf_cross_entropy(MatrixFisherParams(Rp, 5.0), MatrixFisherParams(Rq, 0.5))
        ref = BESSEL_ORACLE[0.5][3] * 5.0 * np.trace(Rp.T @ Rq) - BESSEL_ORACLE[5.0][1]
        assert val == pytest.approx(ref, abs=1e-9)
