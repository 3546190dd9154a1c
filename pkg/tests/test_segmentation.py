import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from optochaos.errors import InsufficientDataError, PreconditionError
from optochaos.segmentation import (
    ClassifierConfig,
    IntermittencySegmenter,
    SegmentReport,
    WindowFeatures,
    apply_hysteresis,
    classify,
    fit_duty_cycle,
    period_return_error,
    require_epochs,
    segments_from_labels,
    spectral_flatness,
    window_features,
    zero_one_test,
)
from optochaos.synthesis import fixture, logistic_series

from conftest import sine


def _features(flat, k, err):
    n = len(flat)
    return WindowFeatures(np.arange(n, dtype=float), np.asarray(flat, float), np.asarray(k, float),
                          np.asarray(err, float), 2.0, 1.0, n + 1.0)


class TestFeatures:
    def test_sine_flatness(self):
        f = window_features(sine(0.125, 1.0, 8192), 1.0, 256)
        assert np.all(f.flatness < 0.05)
        assert np.all(f.return_error < 0.05)

    def test_white_noise_flatness(self, rng):
        f = window_features(rng.standard_normal(8192), 1.0, 256)
        assert np.all(f.flatness > 0.5)

    def test_zero_one_logistic(self):
        chaotic = logistic_series(4.0, 0.3, 10_000)
        regular = logistic_series(3.2, 0.3, 10_000)
        assert zero_one_test(chaotic, n_phases=64) > 0.95
        assert zero_one_test(regular, n_phases=64) < 0.1

    def test_ranges(self, rng):
        x = np.concatenate([sine(0.1, 1.0, 4096), rng.standard_normal(4096)])
        f = window_features(x, 1.0, 512)
        assert np.all((0 <= f.flatness) & (f.flatness <= 1))
        assert np.all((0 <= f.zero_one_k) & (f.zero_one_k <= 1))
        assert np.all(f.return_error >= 0) and np.all(np.isfinite(f.as_array()))
        assert len(f) == (8192 - 512) // 256 + 1

    def test_window_longer_than_series(self):
        with pytest.raises(InsufficientDataError):
            window_features(np.ones(100), 1.0, 200)

    def test_hop_too_large(self, rng):
        with pytest.raises(PreconditionError, match="hop"):
            window_features(rng.standard_normal(1000), 1.0, 100, hop=60)

    def test_window_must_cover_twenty_periods(self):
        with pytest.raises(PreconditionError, match="20"):
            window_features(sine(0.01, 1.0, 20_000), 1.0, 1000)

    def test_flatness_of_constant(self):
        assert spectral_flatness(np.ones(256)) == 0.0

    def test_return_error_of_constant(self):
        assert period_return_error(np.ones(256)) == 0.0

    def test_zero_one_needs_samples(self):
        with pytest.raises(PreconditionError):
            zero_one_test(np.arange(10.0))


class TestClassify:
    def test_all_below(self):
        lab = classify(_features([0.1] * 6, [0.1] * 6, [0.0] * 6))
        assert np.all(lab == 0)

    def test_all_above(self):
        lab = classify(_features([0.9] * 6, [0.9] * 6, [5.0] * 6))
        assert np.all(lab == 1)

    def test_single_dissent_suppressed(self):
        flat = [0.9] * 10
        flat[5] = 0.0
        k = [0.9] * 10
        k[5] = 0.0
        lab = classify(_features(flat, k, [5.0] * 10))
        assert np.all(lab == 1)

    def test_weighted_vote(self):
        f = _features([0.9] * 4, [0.0] * 4, [0.0] * 4)
        assert np.all(classify(f) == 0)
        cfg = ClassifierConfig(weights=(3.0, 1.0, 1.0))
        assert np.all(classify(f, cfg) == 1)

    def test_hysteresis_switch_is_retroactive(self):
        raw = np.array([0, 0, 0, 1, 1, 1, 0, 1, 1])
        assert apply_hysteresis(raw, 2).tolist() == [0, 0, 0, 1, 1, 1, 1, 1, 1]
        assert apply_hysteresis(raw, 1).tolist() == raw.tolist()

    def test_bad_config(self):
        with pytest.raises(PreconditionError):
            ClassifierConfig(flatness_threshold=1.5)
        with pytest.raises(PreconditionError):
            ClassifierConfig(hysteresis=0)


class TestSegments:
    def test_all_periodic(self):
        rep = segments_from_labels([0] * 10, 1.0, 3.0, window=2.0)
        assert len(rep.segments) == 1 and rep.chaotic_fraction == 0.0

    def test_all_chaotic(self):
        rep = segments_from_labels([1] * 10, 1.0, 3.0, window=2.0)
        assert len(rep.segments) == 1 and rep.chaotic_fraction == 1.0

    def test_short_epoch_absorbed(self):
        labels = [0] * 10 + [1] * 2 + [0] * 10
        rep = segments_from_labels(labels, 1.0, 3.0, window=2.0)
        assert rep.chaotic_fraction == 0.0

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.integers(0, 1), min_size=1, max_size=200), st.floats(0.1, 10.0),
           st.integers(1, 8), st.floats(-5.0, 5.0))
    def test_tiling(self, labels, hop, k, t0):
        window = 2 * hop
        rep = segments_from_labels(labels, hop, k * hop, window=window, t0=t0)
        starts = [s.start for s in rep.segments]
        ends = [s.end for s in rep.segments]
        assert starts[0] == t0
        assert all(a == b for a, b in zip(ends[:-1], starts[1:]))
        total = ends[-1] - starts[0]
        assert total == pytest.approx((len(labels) - 1) * hop + window)
        chaotic = sum(s.duration for s in rep.segments if s.label == "chaotic")
        assert rep.chaotic_fraction == pytest.approx(chaotic / total)

    def test_preconditions(self):
        with pytest.raises(PreconditionError):
            segments_from_labels([], 1.0, 3.0)
        with pytest.raises(PreconditionError):
            segments_from_labels([0, 1], 1.0, 0.5)

    def test_label_at(self):
        rep = segments_from_labels([0] * 6 + [1] * 6, 1.0, 3.0, window=2.0)
        assert rep.label_at([0.5, 11.0]).tolist() == [0, 1]

    def test_json(self):
        rep = segments_from_labels([0, 0, 0, 1, 1, 1], 1.0, 2.0, window=2.0)
        assert '"chaotic_fraction"' in rep.to_json()


class TestSegmenter:
    def test_half_duty_fixture(self):
        W = 256
        fx = fixture(0.5, 200 * W, 600 * W, 1.0, 1 / 8, seed=7)
        frac = IntermittencySegmenter(fs=1.0, window=W).chaotic_fraction(fx.series.values)
        assert abs(frac - 0.5) <= 0.05

    def test_duty_cycle_fit(self):
        fs = 20480.0
        fx = fixture(0.3, 1.0, 10.0, fs, fs / 8, seed=3)
        seg = IntermittencySegmenter(fs=fs, window=256 / fs)
        fit = fit_duty_cycle(seg.segment(fx.series.values))
        assert fit.ok
        assert fit.D == pytest.approx(0.3, abs=0.05)
        assert fit.Ts == pytest.approx(1.0, abs=seg.hop_)
        assert fit.D_halfwidth >= 0 and fit.Ts_halfwidth >= 0

    def test_no_epochs(self):
        rep = segments_from_labels([0] * 20, 1.0, 3.0)
        fit = fit_duty_cycle(rep)
        assert fit.status == "insufficient_epochs"
        with pytest.raises(InsufficientDataError):
            require_epochs(fit)

    def test_fully_chaotic(self):
        fit = fit_duty_cycle(segments_from_labels([1] * 20, 1.0, 3.0))
        assert fit.status == "fully_chaotic"
        assert fit.D == 1.0 and fit.Ts is None

    @settings(max_examples=10, deadline=None)
    @given(st.floats(1e-6, 1e6))
    def test_scale_invariance(self, scale):
        fx = fixture(0.5, 4096, 16_384, 1.0, 1 / 8, seed=1)
        seg = IntermittencySegmenter(fs=1.0, window=256)
        assert seg.chaotic_fraction(scale * fx.series.values) == seg.chaotic_fraction(fx.series.values)

    def test_estimator_api(self):
        seg = IntermittencySegmenter(fs=2.0, window=64.0, k_threshold=0.4)
        params = seg.get_params()
        assert params["k_threshold"] == 0.4 and params["fs"] == 2.0
        twin = clone(seg)
        assert twin.get_params() == params
        seg.set_params(window=32.0)
        assert seg.window == 32.0

    def test_fit_calibrates_return_threshold(self):
        ref = fixture(0.0, 4096, 16_384, 1.0, 1 / 8, seed=1, noise=0.05).series.values
        seg = IntermittencySegmenter(fs=1.0, window=256, return_factor=3.0).fit(ref)
        assert seg.return_threshold_ == pytest.approx(max(3 * seg.return_baseline_, seg.return_floor))
        assert seg.config().return_threshold == seg.return_threshold_

    def test_predict_matches_segment_labels(self, rng):
        x = np.concatenate([sine(0.125, 1.0, 4096), rng.standard_normal(4096)])
        seg = IntermittencySegmenter(fs=1.0, window=256)
        lab = seg.predict(x)
        assert lab[0] == 0 and lab[-1] == 1

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            IntermittencySegmenter(fs=1.0, window=64).predict(np.array([1.0, np.nan] * 100))

    def test_report_type(self, rng):
        rep = IntermittencySegmenter(fs=1.0, window=64).segment(rng.standard_normal(1024))
        assert isinstance(rep, SegmentReport)
        assert rep.thresholds["k_threshold"] == 0.5
