import numpy as np
import pytest
from numpy.testing import assert_allclose

from cvarcert.ratio import (
    RatioModel,
    compute_weights,
    fit_ratio_model,
    normalize_odds,
    split_early_late,
)
from cvarcert.risk import ReturnSeries


def _gaussian_series(rng, n, d=8, mu_shift=0.0, vol_scale=1.0):
    sig = np.linspace(0.008, 0.02, d) * vol_scale
    corr = 0.3 * np.ones((d, d)) + 0.7 * np.eye(d)
    cov = np.outer(sig, sig) * corr
    data = rng.standard_normal((n, d)) @ np.linalg.cholesky(cov).T
    return data + np.linspace(2e-4, 1e-3, d) + mu_shift


class TestSplitEarlyLate:
    def test_quarter_split_of_1200(self):
        series = ReturnSeries(np.arange(1200 * 2, dtype=float).reshape(1200, 2), origin="validation")
        early, late = split_early_late(series, 0.25)
        assert early.n == 900 and late.n == 300
        # time order preserved, late = last rows
        assert_allclose(late.data[0], series.data[900])
        assert_allclose(early.data[-1], series.data[899])

    def test_even_split_of_20(self):
        series = ReturnSeries(np.arange(20, dtype=float)[:, None])
        early, late = split_early_late(series, 0.5)
        assert early.n == 10 and late.n == 10
        assert_allclose(early.data.ravel(), np.arange(10))
        assert_allclose(late.data.ravel(), np.arange(10, 20))

    def test_window_under_ten_points_rejected(self):
        series = ReturnSeries(np.zeros((20, 1)) + 0.1)
        with pytest.raises(ValueError, match="under 10"):
            split_early_late(series, 0.9)
        with pytest.raises(ValueError):
            split_early_late(series, 0.05)


class TestFitRatioModel:
    def test_duplicated_data_gives_base_rate(self):
        rng = np.random.default_rng(0)
        block = _gaussian_series(rng, 300)
        # late == early exactly: symmetric labels on identical features
        early = ReturnSeries(block, origin="validation")
        late = ReturnSeries(block.copy(), origin="validation")
        model = fit_ratio_model(early, late)
        assert_allclose(model.coefficients, 0.0, atol=1e-7)
        assert_allclose(model.intercept, 0.0, atol=1e-7)  # logit(300/600)

        # asymmetric duplication: intercept goes to logit(m/n)
        early3 = ReturnSeries(np.vstack([block, block, block]), origin="validation")
        model3 = fit_ratio_model(early3, late)
        assert_allclose(model3.intercept, np.log(0.25 / 0.75), atol=1e-6)
        assert_allclose(model3.coefficients, 0.0, atol=1e-6)

    def test_no_shift_weights_stay_near_uniform(self):
        # Early and late from the same law: learned weights must remain
        # within half of uniform, averaged over 20 fixed seeds.
        n = 1200
        max_devs = []
        for s in range(20):
            rng = np.random.default_rng(1000 + s)
            series = ReturnSeries(_gaussian_series(rng, n), origin="validation")
            early, late = split_early_late(series, 0.25)
            model = fit_ratio_model(early, late)
            sample = compute_weights(model, series)
            max_devs.append(np.abs(sample.w - 1.0 / n).max())
        assert np.mean(max_devs) <= 0.5 / n

    def test_separable_data_hits_clip_bounds(self):
        early = ReturnSeries(np.full((40, 8), -1.0) + 0.01 * np.arange(40)[:, None] * 0.001)
        late = ReturnSeries(np.full((40, 8), 1.0) + 0.01 * np.arange(40)[:, None] * 0.001)
        model = fit_ratio_model(early, late)
        both = ReturnSeries(np.vstack([early.data, late.data]))
        odds = np.exp(model.log_odds(both.data))
        assert odds[:40].max() < model.clip_lo  # raw odds explode downward
        assert odds[40:].min() > model.clip_hi
        sample = compute_weights(model, both)
        # post-clip, all rows sit at a clip bound
        clipped = np.clip(odds, model.clip_lo, model.clip_hi)
        assert set(np.round(clipped, 12)) <= {model.clip_lo, model.clip_hi}
        assert_allclose(sample.w[40:] / sample.w[:40], model.clip_hi / model.clip_lo, rtol=1e-9)

    def test_determinism_is_bitwise(self):
        rng = np.random.default_rng(5)
        data = _gaussian_series(rng, 400)
        series = ReturnSeries(data, origin="validation")
        early, late = split_early_late(series, 0.3)
        m1 = fit_ratio_model(early, late)
        m2 = fit_ratio_model(early, late)
        assert np.array_equal(m1.coefficients, m2.coefficients)
        assert m1.intercept == m2.intercept
        w1 = compute_weights(m1, series).w
        w2 = compute_weights(m2, series).w
        assert np.array_equal(w1, w2)

    def test_zero_variance_column_dropped_with_warning(self, caplog):
        rng = np.random.default_rng(6)
        data = _gaussian_series(rng, 200, d=3)
        data[:, 1] = 0.004  # constant column
        series = ReturnSeries(data)
        early, late = split_early_late(series, 0.5)
        with caplog.at_level("WARNING", logger="cvarcert.ratio"):
            model = fit_ratio_model(early, late)
        assert "zero-variance" in caplog.text
        assert model.coefficients[1] == 0.0
        compute_weights(model, series)  # scoring still works

    def test_dimension_mismatch_rejected(self):
        a = ReturnSeries(np.zeros((30, 2)) + 0.01)
        b = ReturnSeries(np.zeros((30, 3)) + 0.01)
        with pytest.raises(ValueError, match="mismatch"):
            fit_ratio_model(a, b)


class TestComputeWeights:
    def test_equal_scores_give_uniform(self):
        series = ReturnSeries(np.tile([0.01, -0.02], (25, 1)))
        model = RatioModel(
            coefficients=np.zeros(2),
            intercept=0.7,
            clip_lo=0.1,
            clip_hi=10.0,
            feature_means=np.zeros(2),
            feature_stds=np.ones(2),
        )
        sample = compute_weights(model, series)
        assert_allclose(sample.w, 1.0 / 25, rtol=1e-12)
        assert_allclose(sample.n_eff, 25.0, rtol=1e-12)

    def test_hand_normalized_odds(self):
        w = normalize_odds(np.array([4.0, 1.0, 1.0, 1.0, 1.0]), 0.1, 10.0)
        assert_allclose(w, [0.5, 0.125, 0.125, 0.125, 0.125], rtol=1e-12)
        n_eff = 1.0 / np.sum(w**2)
        assert_allclose(n_eff, 3.2, rtol=1e-12)

    def test_clip_then_normalize(self):
        w = normalize_odds(np.array([100.0, 1.0]), 0.1, 10.0)
        assert_allclose(w, [10.0 / 11.0, 1.0 / 11.0], rtol=1e-12)

    def test_normalization_scale_invariance(self):
        # Holds whenever clipping is inactive for both scales.
        rng = np.random.default_rng(8)
        for _ in range(50):
            odds = rng.uniform(0.2, 5.0, size=rng.integers(2, 30))
            c = rng.uniform(0.5, 2.0)
            w1 = normalize_odds(odds, 0.1, 10.0)
            w2 = normalize_odds(c * odds, 0.1, 10.0)
            assert np.all(np.abs(w1 - w2) <= 1e-12)

    def test_weight_bounds_after_normalization(self):
        # Bounded-odds regularity: clip_lo/(n*clip_hi) <= w_i <= clip_hi/(n*clip_lo).
        rng = np.random.default_rng(9)
        for _ in range(100):
            n = int(rng.integers(2, 200))
            odds = np.exp(rng.normal(0, 3, size=n))
            lo, hi = 0.1, 10.0
            w = normalize_odds(odds, lo, hi)
            assert np.all(w >= lo / (n * hi) - 1e-15)
            assert np.all(w <= hi / (n * lo) + 1e-15)
            assert abs(w.sum() - 1.0) < 1e-12

    def test_sampled_weights_pass_weighted_sample_invariants(self):
        rng = np.random.default_rng(10)
        series = ReturnSeries(_gaussian_series(rng, 150))
        early, late = split_early_late(series, 0.4)
        sample = compute_weights(fit_ratio_model(early, late), series)
        assert abs(sample.w.sum() - 1.0) < 1e-10
        assert np.all(sample.w >= 0)
        assert 1.0 <= sample.n_eff <= sample.n


class TestModelSerialization:
    def test_text_round_trip(self):
        rng = np.random.default_rng(11)
        series = ReturnSeries(_gaussian_series(rng, 120, d=4))
        early, late = split_early_late(series, 0.5)
        model = fit_ratio_model(early, late)
        clone = RatioModel.from_text(model.to_text())
        assert_allclose(clone.coefficients, model.coefficients, rtol=0, atol=0)
        assert clone.intercept == model.intercept
        assert clone.training_meta["iterations"] == model.training_meta["iterations"]
        assert np.array_equal(compute_weights(clone, series).w, compute_weights(model, series).w)

    def test_invalid_clip_bounds_rejected(self):
        with pytest.raises(ValueError, match="clip"):
            RatioModel(
                coefficients=np.zeros(2),
                intercept=0.0,
                clip_lo=0.5,
                clip_hi=0.1,
                feature_means=np.zeros(2),
                feature_stds=np.ones(2),
            )
