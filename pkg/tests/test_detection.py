import numpy as np
import pytest

from uavinspect.detection import (
    DegenerateHistogramError,
    IterativeThresholdDetector,
    OtsuDetector,
    RegionSlice,
    between_class_variance,
    detect_defects,
    f_measure,
    histogram,
    interclass_contrast,
    iterative_threshold,
    otsu_threshold,
    segment,
    synth_defect_image,
    to_grayscale,
)
from uavinspect.validation import ValidationError


def make_hist(spec):
    """Histogram from {level: count}."""
    h = np.zeros(256, dtype=np.int64)
    for level, count in spec.items():
        h[level] = count
    return h


def brute_force_variance(hist, lower, upper, T):
    """Direct-summation oracle mirroring the production operation order."""
    n0 = int(hist[lower:T + 1].sum())
    n1 = int(hist[T + 1:upper + 1].sum())
    if n0 == 0 or n1 == 0:
        return 0.0
    s0 = int(sum(x * int(hist[x]) for x in range(lower, T + 1)))
    s1 = int(sum(x * int(hist[x]) for x in range(T + 1, upper + 1)))
    total = n0 + n1
    w0 = n0 / total
    w1 = n1 / total
    diff = s0 / n0 - s1 / n1
    return w0 * w1 * diff * diff


def brute_force_otsu(hist, lower=0, upper=255):
    """Exhaustive argmax over interior cuts; ties take the smallest T."""
    best_t, best_v = None, -1.0
    for T in range(lower + 1, upper):
        v = brute_force_variance(hist, lower, upper, T)
        if v > best_v:
            best_t, best_v = T, v
    return best_t


def random_histograms(count, seed):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        h = np.zeros(256, dtype=np.int64)
        kind = rng.integers(3)
        if kind == 0:
            h[:] = rng.integers(0, 200, size=256)
        elif kind == 1:
            levels = rng.choice(256, size=rng.integers(2, 12), replace=False)
            h[levels] = rng.integers(1, 5000, size=levels.size)
        else:
            centers = rng.choice(200, size=2, replace=False) + 20
            for c in centers:
                span = np.arange(max(0, c - 15), min(256, c + 15))
                h[span] += rng.integers(1, 300, size=span.size)
        if np.count_nonzero(h) >= 2:
            yield h


class TestGrayscale:
    def test_gray_input_passthrough(self):
        rgb = np.stack([np.full((4, 5), 77, dtype=np.uint8)] * 3, axis=2)
        assert np.array_equal(to_grayscale(rgb), np.full((4, 5), 77))

    def test_pure_red(self):
        rgb = np.zeros((1, 1, 3), dtype=np.uint8)
        rgb[..., 0] = 255
        assert to_grayscale(rgb)[0, 0] == 76

    def test_black(self):
        assert to_grayscale(np.zeros((2, 2, 3), dtype=np.uint8)).max() == 0

    def test_rejects_wrong_depth(self):
        with pytest.raises(ValidationError):
            to_grayscale(np.zeros((2, 2, 3), dtype=np.uint16))


class TestHistogram:
    def test_constant_image(self):
        h = histogram(np.full((10, 10), 7, dtype=np.uint8))
        assert h[7] == 100 and h.sum() == 100

    def test_checkerboard(self):
        img = np.indices((8, 8)).sum(axis=0) % 2 * 255
        h = histogram(img.astype(np.uint8))
        assert h[0] == 32 and h[255] == 32

    def test_conservation(self):
        rng = np.random.default_rng(0)
        img = rng.integers(0, 256, size=(31, 17), dtype=np.uint8)
        assert histogram(img).sum() == img.size


class TestBetweenClassVariance:
    def test_single_level_zero_everywhere(self):
        h = make_hist({120: 500})
        region = RegionSlice.of(h)
        for T in (1, 60, 120, 254):
            assert between_class_variance(h, region, T) == 0.0

    def test_two_equal_spikes_plateau(self):
        h = make_hist({10: 100, 200: 100})
        region = RegionSlice.of(h)
        values = {between_class_variance(h, region, T) for T in range(10, 200)}
        assert len(values) == 1
        assert values.pop() == pytest.approx(9025.0)

    def test_streaming_matches_brute_force_bitwise(self):
        region = RegionSlice(0, 255)
        for h in random_histograms(60, seed=1):
            for T in range(1, 255):
                assert between_class_variance(h, region, T) == brute_force_variance(h, 0, 255, T)

    def test_threshold_domain_enforced(self):
        h = make_hist({10: 1, 200: 1})
        with pytest.raises(ValidationError):
            between_class_variance(h, RegionSlice(0, 255), 0)
        with pytest.raises(ValidationError):
            between_class_variance(h, RegionSlice(0, 255), 255)


class TestOtsuThreshold:
    def test_equal_spikes_tie_break_low(self):
        assert otsu_threshold(make_hist({10: 100, 200: 100})) == 10

    def test_unbalanced_spikes_match_brute_force(self):
        h = make_hist({10: 900, 200: 100})
        assert otsu_threshold(h) == brute_force_otsu(h)

    def test_constant_image_degenerate(self):
        with pytest.raises(DegenerateHistogramError):
            otsu_threshold(make_hist({40: 1000}))

    def test_matches_exhaustive_search_on_random_histograms(self):
        for h in random_histograms(200, seed=2):
            assert otsu_threshold(h) == brute_force_otsu(h)

    def test_restricted_slice(self):
        h = make_hist({10: 50, 40: 50, 200: 500})
        region = RegionSlice.of(h, 0, 79)
        assert otsu_threshold(h, region) == brute_force_otsu(h, 0, 79)


class TestInterclassContrast:
    def test_equal_means(self):
        assert interclass_contrast(80.0, 80.0) == 0.0

    def test_maximal(self):
        assert interclass_contrast(0.0, 255.0) == 1.0

    def test_hand_value(self):
        assert interclass_contrast(50.0, 150.0) == pytest.approx(0.5)

    def test_domain(self):
        with pytest.raises(ValidationError):
            interclass_contrast(0.0, 0.0)

    def test_bounded(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            a, b = rng.uniform(0, 255, 2)
            if a + b > 0:
                assert 0.0 <= interclass_contrast(a, b) <= 1.0


class TestIterativeThreshold:
    def test_extreme_two_level_single_iteration(self):
        h = make_hist({0: 500, 255: 9500})
        res = iterative_threshold(h, contrast_stop=0.9)
        assert len(res.iteration_thresholds) == 1
        assert res.contrasts[0] == pytest.approx(1.0)
        assert res.converged
        assert res.final_threshold == res.iteration_thresholds[0]

    def test_three_spike_isolates_darkest_class(self):
        h = make_hist({200: 9000, 80: 900, 10: 100})
        res = iterative_threshold(h, contrast_stop=0.4)
        assert res.converged
        assert 10 < res.final_threshold <= 80
        img = np.repeat(np.array([10, 80, 200], dtype=np.uint8), [100, 900, 9000])
        mask = segment(img.reshape(100, 100), res.final_threshold)
        assert mask.sum() == 100  # exactly the darkest-level pixels

    def test_plateau_tie_on_darkest_level_is_recovered(self):
        # the variance plateau starts on the dark level itself; the reported
        # threshold must still capture that level under strict-below masking
        h = make_hist({40: 300, 200: 9700})
        res = iterative_threshold(h, contrast_stop=0.4)
        assert res.iteration_thresholds == (40,)
        assert res.final_threshold == 41
        assert res.converged
        assert res.contrasts[0] == pytest.approx((200 - 40) / 240)

    def test_thresholds_strictly_decreasing(self):
        for h in random_histograms(100, seed=4):
            res = iterative_threshold(h, contrast_stop=0.97)
            diffs = np.diff(res.iteration_thresholds)
            assert np.all(diffs < 0)

    def test_terminates_and_final_bounded_by_first(self):
        for h in random_histograms(150, seed=5):
            res = iterative_threshold(h, contrast_stop=0.6)
            assert res.final_threshold <= res.iteration_thresholds[0] + 1
            if len(res.iteration_thresholds) > 1:
                assert res.final_threshold <= res.iteration_thresholds[0]

    def test_degenerate_histogram_rejected(self):
        with pytest.raises(DegenerateHistogramError):
            iterative_threshold(make_hist({9: 100}), 0.4)

    def test_contrast_stop_domain(self):
        with pytest.raises(ValidationError):
            iterative_threshold(make_hist({1: 1, 2: 1}), 0.0)


class TestSegment:
    def test_threshold_zero_empty_mask(self):
        img = np.arange(25, dtype=np.uint8).reshape(5, 5)
        assert segment(img, 0).sum() == 0

    def test_threshold_above_max_full_mask(self):
        img = np.arange(25, dtype=np.uint8).reshape(5, 5)
        assert segment(img, 256).all()

    def test_two_level_indicator(self):
        img = np.array([[40, 200], [200, 40]], dtype=np.uint8)
        assert np.array_equal(segment(img, 120), img == 40)

    def test_bright_polarity_mirrors(self):
        img = np.array([[40, 200]], dtype=np.uint8)
        assert np.array_equal(segment(img, 120, "bright"), img == 200)

    def test_unknown_polarity(self):
        with pytest.raises(ValidationError):
            segment(np.zeros((2, 2), dtype=np.uint8), 10, "sideways")


class TestFMeasure:
    def test_perfect_match(self):
        truth = np.zeros((8, 8), dtype=bool)
        truth[2:4, 3:6] = True
        m = f_measure(truth, truth)
        assert m.f_measure == 1.0 and m.precision == 1.0 and m.recall == 1.0

    def test_hand_counts(self):
        truth = np.zeros(100, dtype=bool)
        truth[:60] = True  # 60 positives
        pred = np.zeros(100, dtype=bool)
        pred[:30] = True   # 30 true positives
        pred[60:70] = True  # 10 false positives
        m = f_measure(pred.reshape(10, 10), truth.reshape(10, 10))
        assert (m.true_pos, m.false_pos, m.false_neg) == (30, 10, 30)
        assert m.precision == pytest.approx(0.75)
        assert m.recall == pytest.approx(0.5)
        assert m.f_measure == pytest.approx(0.6)

    def test_empty_prediction(self):
        truth = np.ones((4, 4), dtype=bool)
        m = f_measure(np.zeros((4, 4), dtype=bool), truth)
        assert m.f_measure == 0.0

    def test_counts_partition_pixels(self):
        rng = np.random.default_rng(6)
        pred = rng.random((13, 7)) > 0.5
        truth = rng.random((13, 7)) > 0.7
        m = f_measure(pred, truth)
        assert m.true_pos + m.false_pos + m.false_neg + m.true_neg == pred.size

    def test_swap_exchanges_precision_and_recall(self):
        rng = np.random.default_rng(7)
        pred = rng.random((20, 20)) > 0.6
        truth = rng.random((20, 20)) > 0.4
        a = f_measure(pred, truth)
        b = f_measure(truth, pred)
        assert a.precision == b.recall and a.recall == b.precision
        assert a.f_measure == pytest.approx(b.f_measure, rel=1e-12)

    def test_accepts_uint8_masks(self):
        pred = np.array([[0, 255], [255, 0]], dtype=np.uint8)
        truth = np.array([[0, 1], [1, 0]], dtype=np.uint8)
        assert f_measure(pred, truth).f_measure == 1.0

    def test_shape_mismatch(self):
        with pytest.raises(ValidationError):
            f_measure(np.zeros((2, 2), dtype=bool), np.zeros((3, 2), dtype=bool))


class TestSynthDefectImage:
    def test_noiseless_two_levels_and_perfect_recovery(self):
        image, truth = synth_defect_image(120, 90, 200, 40, noise_sigma=0.0,
                                          crack_width=3, seed=5)
        assert set(np.unique(image)) == {40, 200}
        res = detect_defects(image, contrast_stop=0.4)
        assert f_measure(res.mask, truth).f_measure == 1.0

    def test_deterministic_bytes(self):
        a, ta = synth_defect_image(64, 64, seed=9)
        b, tb = synth_defect_image(64, 64, seed=9)
        assert a.tobytes() == b.tobytes()
        assert np.array_equal(ta, tb)

    def test_crack_density_band(self):
        image, truth = synth_defect_image(200, 150, 200, 40, noise_sigma=20.0,
                                          crack_width=3, seed=11)
        fraction = truth.mean()
        nominal = 3.0 / 200.0  # width x height crack through height rows
        assert 0.5 * nominal <= fraction <= 2.0 * nominal

    def test_rejects_bad_levels(self):
        with pytest.raises(ValidationError):
            synth_defect_image(32, 32, background_level=40, defect_level=200)
        with pytest.raises(ValidationError):
            synth_defect_image(4, 4, crack_width=9)


class TestDetectors:
    def test_detect_defects_noisy_crack(self):
        image, truth = synth_defect_image(160, 120, 200, 40, noise_sigma=10.0, seed=2)
        res = detect_defects(image, contrast_stop=0.4)
        assert res.converged
        assert f_measure(res.mask, truth).f_measure > 0.9

    def test_estimator_fit_predict(self):
        image, truth = synth_defect_image(160, 120, 200, 40, noise_sigma=10.0, seed=3)
        det = IterativeThresholdDetector(contrast_stop=0.4)
        mask = det.fit_predict(image)
        assert det.threshold_ == det.result_.final_threshold
        assert np.array_equal(mask, det.predict(image))

    def test_estimator_params_roundtrip(self):
        det = IterativeThresholdDetector(contrast_stop=0.3, polarity="bright")
        params = det.get_params()
        assert params == {"contrast_stop": 0.3, "polarity": "bright", "normalized": True}
        assert IterativeThresholdDetector(**params).get_params() == params

    def test_otsu_detector_baseline(self):
        image, truth = synth_defect_image(160, 120, 200, 40, noise_sigma=10.0, seed=4)
        base = OtsuDetector().fit(image)
        assert f_measure(base.predict(image), truth).f_measure > 0.9

    def test_bright_defect_polarity(self):
        image, truth = synth_defect_image(160, 120, 200, 40, noise_sigma=5.0, seed=6)
        flipped = (255 - image.astype(np.int64)).astype(np.uint8)
        res = detect_defects(flipped, contrast_stop=0.4, polarity="bright")
        assert f_measure(res.mask, truth).f_measure > 0.98

    def test_pipeline_determinism(self):
        image, _ = synth_defect_image(128, 128, noise_sigma=15.0, seed=8)
        a = detect_defects(image, 0.4)
        b = detect_defects(image, 0.4)
        assert a.final_threshold == b.final_threshold
        assert a.mask.tobytes() == b.mask.tobytes()

    def test_unnormalized_variant_runs(self):
        image, _ = synth_defect_image(64, 64, noise_sigma=5.0, seed=10)
        res = detect_defects(image, 0.4, normalized=False)
        assert 0 < res.final_threshold <= 255
