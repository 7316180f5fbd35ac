import json

import numpy as np
import pytest

from rawvd.frames import CfaPattern, RawFrame, VideoSequence
from rawvd.noise import (
    HeteroGaussianParams,
    PoissonTukeyParams,
    noise_model_from_json_dict,
    noise_model_to_json_dict,
    sample_hetero_gaussian,
    sample_poisson,
    sample_poisson_tukey,
    sample_tukey_lambda,
    synthesize_noisy_dataset,
    tukey_lambda_quantile,
)
from rawvd.rngstreams import derive_rng

TL_VAR_LOGISTIC = np.pi ** 2 / 3  # Var of TukeyLambda(0) with unit scale


class TestHeteroGaussian:
    def test_zero_params_noise_free(self, rng):
        u = rng.random((16, 16))
        v = sample_hetero_gaussian(u, HeteroGaussianParams(0.0, 0.0), derive_rng(0))
        assert np.array_equal(v, u)

    def test_homoscedastic_variance(self):
        sigma2 = 2.5e-3
        u = np.full(1_000_000, 0.4)
        v = sample_hetero_gaussian(u, HeteroGaussianParams(0.0, sigma2), derive_rng(1))
        assert np.var(v - u) == pytest.approx(sigma2, rel=0.01)

    def test_heteroscedastic_variance_at_half(self):
        params = HeteroGaussianParams(0.01, 4e-4)
        u = np.full(1_000_000, 0.5)
        v = sample_hetero_gaussian(u, params, derive_rng(2))
        assert np.var(v - u) == pytest.approx(0.0054, rel=0.02)

    def test_zero_mean(self):
        params = HeteroGaussianParams(0.01, 4e-4)
        n = 1_000_000
        u = np.full(n, 0.5)
        v = sample_hetero_gaussian(u, params, derive_rng(3))
        sigma = np.sqrt(params.variance(0.5))
        assert abs(np.mean(v - u)) < 4 * sigma / np.sqrt(n)

    def test_variance_affinity(self):
        params = HeteroGaussianParams(0.02, 1e-3)
        for i, level in enumerate((0.1, 0.3, 0.5, 0.7, 0.9)):
            u = np.full(400_000, level)
            v = sample_hetero_gaussian(u, params, derive_rng(4, i))
            expected = params.variance(level)
            assert abs(np.var(v - u) - expected) / expected < 0.02

    def test_rejects_negative_variance(self):
        with pytest.raises(ValueError):
            HeteroGaussianParams(-0.1, 0.0)


class TestTukeyLambda:
    def test_lambda_two_is_uniform(self):
        # Q(p; 2) = p - 1/2: samples uniform on [-scale/2, scale/2]
        s = sample_tukey_lambda(2.0, 3.0, 200_000, derive_rng(5))
        assert s.min() >= -1.5 and s.max() <= 1.5
        assert np.var(s) == pytest.approx(9.0 / 12, rel=0.02)

    def test_logistic_limit_variance(self):
        scale = 0.7
        s = sample_tukey_lambda(0.0, scale, 1_000_000, derive_rng(6))
        assert np.var(s) == pytest.approx(scale ** 2 * TL_VAR_LOGISTIC, rel=0.02)

    def test_logistic_limit_continuity(self):
        p = np.linspace(0.01, 0.99, 99)
        assert np.allclose(tukey_lambda_quantile(p, 1e-9),
                           np.log(p / (1 - p)), atol=1e-6)

    @pytest.mark.parametrize("lam", [-0.1, 0.0, 0.5, 2.0])
    def test_median_is_zero(self, lam):
        s = sample_tukey_lambda(lam, 1.0, 400_000, derive_rng(7, str(lam)))
        # median of n samples of a continuous symmetric law: ~N(0, 1/(4 n f(0)^2));
        # f(0) = 1/Q'(1/2) = 1/(2 * (1/2)^(lam-1)) for the Tukey-lambda family
        q_slope = 2 * 0.5 ** (lam - 1.0)
        band = 4 * q_slope / (2 * np.sqrt(400_000))
        assert abs(np.median(s)) < band

    def test_heavy_tails_at_negative_lambda(self):
        s = sample_tukey_lambda(-0.1, 1.0, 1_000_000, derive_rng(8))
        sc = s - s.mean()
        kurt = np.mean(sc ** 4) / np.mean(sc ** 2) ** 2 - 3.0
        assert kurt > 0.5  # far above any Gaussian

    def test_rejects_bad_scale(self):
        with pytest.raises(ValueError):
            sample_tukey_lambda(0.0, 0.0, 10, derive_rng(9))


class TestPoisson:
    def test_zero_rate(self):
        out = sample_poisson(np.zeros((8, 8)), derive_rng(10))
        assert np.all(out == 0)

    def test_moments_at_rate_four(self):
        out = sample_poisson(np.full(1_000_000, 4.0), derive_rng(11))
        assert np.mean(out) == pytest.approx(4.0, rel=0.02)
        assert np.var(out) == pytest.approx(4.0, rel=0.02)

    def test_high_rate_near_gaussian(self):
        lam = 1e4
        out = sample_poisson(np.full(400_000, lam), derive_rng(12)).astype(float)
        z = (out - out.mean()) / out.std()
        assert abs(np.mean(z ** 3)) < 0.05  # true skewness 1/sqrt(lam) = 0.01

    def test_rejects_negative_rates(self):
        with pytest.raises(ValueError):
            sample_poisson(np.array([-1.0]), derive_rng(13))


class TestPoissonTukey:
    def test_poisson_scaling_variance(self):
        # Var(k * Pois(u/k)) = k * u
        params = PoissonTukeyParams(k_gain=2e-3, tl_lambda=-0.1, tl_scale=1e-9)
        u = np.full((1000, 1000), 0.25)
        v = sample_poisson_tukey(u, params, derive_rng(14))
        assert np.var(v - u) == pytest.approx(params.k_gain * 0.25, rel=0.02)

    def test_variance_additivity(self):
        params = PoissonTukeyParams(k_gain=2e-3, tl_lambda=-0.1, tl_scale=4e-3)
        tl = sample_tukey_lambda(-0.1, 4e-3, 2_000_000, derive_rng(15))
        var_tl = np.var(tl)
        u = np.full((1000, 1000), 0.25)
        v = sample_poisson_tukey(u, params, derive_rng(16))
        assert np.var(v - u) == pytest.approx(
            params.k_gain * 0.25 + var_tl, rel=0.02)

    def test_row_noise_structure(self):
        params = PoissonTukeyParams(k_gain=1e-6, tl_lambda=0.0, tl_scale=1e-9,
                                    sigma_row=0.05)
        u = np.zeros((2000, 256))
        v = sample_poisson_tukey(u, params, derive_rng(17))
        row_means = v.mean(axis=1)
        assert np.std(row_means) == pytest.approx(0.05, rel=0.05)

    def test_quantization_grid(self):
        params = PoissonTukeyParams(k_gain=1e-3, tl_lambda=0.0, tl_scale=1e-2,
                                    quant_step=1e-3)
        v = sample_poisson_tukey(np.full((64, 64), 0.5), params, derive_rng(18))
        assert np.allclose(np.round(v / 1e-3) * 1e-3, v, atol=1e-12)

    def test_rejects_negative_input(self):
        params = PoissonTukeyParams(k_gain=1e-3, tl_lambda=0.0, tl_scale=1e-3)
        with pytest.raises(ValueError):
            sample_poisson_tukey(np.array([[-0.1, 0], [0, 0]]), params, derive_rng(19))


class TestModelJson:
    def test_hetero_round_trip(self):
        model = HeteroGaussianParams(0.01, 4e-4)
        d = noise_model_to_json_dict(model)
        assert d["type"] == "hetero_gaussian"
        assert noise_model_from_json_dict(json.loads(json.dumps(d))) == model

    def test_poisson_tukey_round_trip(self):
        model = PoissonTukeyParams(2e-3, -0.1, 4e-3, 1e-3, 1e-4)
        d = noise_model_to_json_dict(model)
        assert d["type"] == "poisson_tukey"
        assert noise_model_from_json_dict(d) == model

    def test_unknown_type_rejected(self):
        with pytest.raises(ValueError):
            noise_model_from_json_dict({"type": "salt_and_pepper"})


def _clean_sequences(rng, n_seq=2, n_frames=3, side=16):
    out = []
    for s in range(n_seq):
        frames = [RawFrame(rng.random((side, side)), CfaPattern.RGGB)
                  for _ in range(n_frames)]
        out.append(VideoSequence(frames, 30.0, f"s{s}"))
    return out


class TestSynthesize:
    def test_zero_noise_is_identity(self, rng):
        clean = _clean_sequences(rng)
        noisy = synthesize_noisy_dataset(clean, HeteroGaussianParams(0, 0), seed=4)
        for cs, ns in zip(clean, noisy):
            for cf, nf in zip(cs.frames, ns.frames):
                assert np.array_equal(cf.data, nf.data)

    def test_same_seed_identical(self, rng):
        clean = _clean_sequences(rng)
        model = HeteroGaussianParams(0.01, 4e-4)
        a = synthesize_noisy_dataset(clean, model, seed=21)
        b = synthesize_noisy_dataset(clean, model, seed=21)
        for sa, sb in zip(a, b):
            for fa, fb in zip(sa.frames, sb.frames):
                assert np.array_equal(fa.data, fb.data)

    def test_frames_have_independent_streams(self, rng):
        side = 128
        clean = [VideoSequence([RawFrame(np.full((side, side), 0.5),
                                         CfaPattern.RGGB) for _ in range(2)],
                               30.0, "s0")]
        noisy = synthesize_noisy_dataset(clean, HeteroGaussianParams(0, 1e-2), seed=5)
        n0 = (noisy[0].frames[0].data - 0.5).ravel()
        n1 = (noisy[0].frames[1].data - 0.5).ravel()
        corr = np.corrcoef(n0, n1)[0, 1]
        assert abs(corr) < 0.01
