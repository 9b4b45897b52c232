import numpy as np
import pytest

from oodscore import ClassifierHead, LogitScoreConfig, errors, fit_class_means
from oodscore.cadref import (
    ABS_SUM,
    RAW_SIGN,
    RELATIVE_SIGN,
    SUM_ABS,
    CadrefConfig,
    attach_mean_logit_score,
    cadref_score,
    cadref_score_batch,
    combine_errors,
    decouple_errors,
    fit_mean_logit_score,
)
from oodscore.caref import caref_score
from oodscore.logit_scores import compute_logits, predicted_labels

from conftest import random_fixture
from reference_impl import ref_decoupled


def fitted_profile(train, head, logit=None):
    logit = logit or LogitScoreConfig(method="energy", temperature=1.0)
    return attach_mean_logit_score(fit_class_means(train, head), train, head, logit)


class TestDecoupleErrors:
    def test_zero_at_class_mean(self, rng):
        head, train, _ = random_fixture(rng, c=3, d=6)
        profile = fit_class_means(train, head)
        k = int(np.flatnonzero(profile.usable)[0])
        err = decouple_errors(profile.class_means[k], profile, head)
        assert err.pos == pytest.approx(0.0, abs=1e-12)
        assert err.neg == pytest.approx(0.0, abs=1e-12)

    def test_all_aligned_deviations(self):
        # positive weights and a feature elementwise above the mean:
        # every deviation is aligned, so the anti-aligned error vanishes and
        # the aligned error equals the full relative error
        head = ClassifierHead(
            weights=np.array([[1.0, 1.0, 1.0], [0.1, 0.1, 0.1]]), bias=np.zeros(2)
        )
        train = np.tile([1.0, 2.0, 3.0], (4, 1))
        profile = fit_class_means(train, head)
        feat = np.array([2.0, 2.5, 3.5])
        err = decouple_errors(feat, profile, head, RELATIVE_SIGN)
        full = -caref_score(feat, profile, head)
        assert err.neg == 0.0
        assert err.pos == pytest.approx(full, abs=1e-12)

    @pytest.mark.parametrize("mode", [RELATIVE_SIGN, RAW_SIGN])
    @pytest.mark.parametrize("agg", [ABS_SUM, SUM_ABS])
    def test_against_index_set_oracle(self, rng, mode, agg):
        head, train, test = random_fixture(rng, c=3, d=8, n_train=60, n_test=20)
        profile = fit_class_means(train, head)
        for feat in test:
            pred = int(predicted_labels(compute_logits(feat, head)))
            if not profile.usable[pred]:
                continue
            expected = ref_decoupled(
                feat.tolist(),
                profile.class_means.tolist(),
                profile.class_counts.tolist(),
                head.weights.tolist(),
                head.bias.tolist(),
                relative_sign=(mode == RELATIVE_SIGN),
                sum_abs=(agg == SUM_ABS),
            )
            err = decouple_errors(feat, profile, head, mode, agg)
            assert err.pos == pytest.approx(expected[0], abs=1e-12)
            assert err.neg == pytest.approx(expected[1], abs=1e-12)

    def test_zero_products_assigned_antialigned(self):
        # weight 0 in one slot and feature equal to the mean in another both
        # produce product 0; those indices must land in the anti-aligned set
        head = ClassifierHead(weights=np.array([[1.0, 0.0], [0.5, 0.0]]), bias=np.zeros(2))
        train = np.tile([2.0, 1.0], (3, 1))
        profile = fit_class_means(train, head)
        feat = np.array([2.0, 5.0])  # rel = [0, 4]; products [0, 0]
        err = decouple_errors(feat, profile, head, RELATIVE_SIGN)
        assert err.pos == 0.0
        assert err.neg == pytest.approx(4.0 / 7.0, abs=1e-12)

    def test_invariants_both_rules(self, rng):
        for trial in range(5):
            head, train, test = random_fixture(rng, c=4, d=10, n_train=80, n_test=30)
            profile = fit_class_means(train, head)
            for feat in test:
                pred = int(predicted_labels(compute_logits(feat, head)))
                if not profile.usable[pred]:
                    continue
                full = -caref_score(feat, profile, head)
                for mode in (RELATIVE_SIGN, RAW_SIGN):
                    abs_sum = decouple_errors(feat, profile, head, mode, ABS_SUM)
                    sum_abs = decouple_errors(feat, profile, head, mode, SUM_ABS)
                    assert abs_sum.pos >= 0 and abs_sum.neg >= 0
                    assert abs_sum.pos + abs_sum.neg <= full + 1e-12
                    assert sum_abs.pos + sum_abs.neg == pytest.approx(full, abs=1e-12)

    def test_degenerate_errors(self):
        head = ClassifierHead(weights=np.eye(2), bias=np.array([0.0, 1.0]))
        profile = fit_class_means(np.array([[0.5, 3.0]]), head)
        with pytest.raises(errors.UnusableClass):
            decouple_errors(np.array([9.0, 0.1]), profile, head)
        with pytest.raises(errors.ZeroNormFeature):
            decouple_errors(np.zeros(2), profile, head)


class TestFitMeanLogitScore:
    def test_constant_scores(self):
        head = ClassifierHead(weights=np.eye(2), bias=np.zeros(2))
        train = np.tile([3.0, 1.0], (5, 1))
        cfg = LogitScoreConfig(method="energy")
        single = fit_mean_logit_score(train[:1], head, cfg)
        assert fit_mean_logit_score(train, head, cfg) == pytest.approx(single, abs=1e-12)

    def test_arithmetic_mean(self):
        head = ClassifierHead(weights=np.eye(2), bias=np.zeros(2))
        cfg = LogitScoreConfig(method="maxlogit")
        train = np.array([[1.0, 0.0], [3.0, 0.0]])
        assert fit_mean_logit_score(train, head, cfg) == pytest.approx(2.0)

    def test_streaming_mean_oracle(self, rng):
        head, train, _ = random_fixture(rng, c=4, d=6, n_train=50)
        train = np.abs(train) + 0.5  # keep energies positive
        cfg = LogitScoreConfig(method="energy")
        from oodscore.logit_scores import energy

        total = 0.0
        for feat in train:
            total += energy(compute_logits(feat, head), 1.0)
        assert fit_mean_logit_score(train, head, cfg) == pytest.approx(
            total / len(train), abs=1e-10
        )

    def test_nonpositive_mean_is_hard_error(self):
        head = ClassifierHead(weights=np.eye(2), bias=np.zeros(2))
        train = np.array([[-50.0, -60.0]])
        with pytest.raises(errors.NonPositiveMean):
            fit_mean_logit_score(train, head, LogitScoreConfig(method="maxlogit"))

    def test_empty(self):
        head = ClassifierHead(weights=np.eye(2), bias=np.zeros(2))
        with pytest.raises(errors.EmptyInput):
            fit_mean_logit_score(np.empty((0, 2)), head, LogitScoreConfig())


class TestCombineErrors:
    def test_plug_in_arithmetic(self):
        # pos/sample + neg/mean = 0.2/2 + 0.1/1 = 0.2
        assert combine_errors(0.2, 0.1, 2.0, 1.0) == pytest.approx(-0.2)

    def test_flags(self):
        assert combine_errors(0.2, 0.1, 2.0, 1.0, use_neg=False) == pytest.approx(-0.1)
        assert combine_errors(0.2, 0.1, 2.0, 1.0, use_pos=False) == pytest.approx(-0.1)
        assert combine_errors(
            0.2, 0.1, 2.0, 1.0, use_neg=False, use_scaling=False
        ) == pytest.approx(-0.2)

    def test_monotone_in_sample_score(self):
        low = combine_errors(0.3, 0.1, 1.0, 2.0)
        high = combine_errors(0.3, 0.1, 5.0, 2.0)
        assert high >= low

    def test_floor_returns_surrogate(self):
        assert combine_errors(0.3, 0.1, 0.0, 2.0) == -np.inf
        assert combine_errors(0.3, 0.1, -4.0, 2.0) == -np.inf
        # floor irrelevant when the aligned term is unscaled or dropped
        assert np.isfinite(combine_errors(0.3, 0.1, -4.0, 2.0, use_scaling=False))
        assert np.isfinite(combine_errors(0.3, 0.1, -4.0, 2.0, use_pos=False))


class TestCadrefScore:
    def test_zero_at_class_mean(self, rng):
        head, train, _ = random_fixture(rng, c=3, d=6)
        train = np.abs(train) + 0.2
        head = ClassifierHead(weights=np.abs(head.weights), bias=head.bias)
        profile = fitted_profile(train, head)
        k = int(np.flatnonzero(profile.usable)[0])
        score = cadref_score(profile.class_means[k], profile, head)
        assert score == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("mode", [RELATIVE_SIGN, RAW_SIGN])
    @pytest.mark.parametrize("agg", [ABS_SUM, SUM_ABS])
    def test_full_pipeline_against_reference(self, rng, mode, agg):
        from reference_impl import ref_cadref, ref_class_means, ref_mean_energy

        head, train, test = random_fixture(rng, c=3, d=8, n_train=60, n_test=25)
        train = np.abs(train) + 0.1  # keep the training-mean energy positive
        config = CadrefConfig(decouple_mode=mode, aggregation=agg)
        profile = fitted_profile(train, head)
        batch = cadref_score_batch(test, profile, head, config)
        means, counts = ref_class_means(
            train.tolist(), head.weights.tolist(), head.bias.tolist()
        )
        mean_energy = ref_mean_energy(
            train.tolist(), head.weights.tolist(), head.bias.tolist()
        )
        for i, feat in enumerate(test):
            expected = ref_cadref(
                feat.tolist(),
                means,
                counts,
                head.weights.tolist(),
                head.bias.tolist(),
                mean_energy,
                relative_sign=(mode == RELATIVE_SIGN),
                sum_abs=(agg == SUM_ABS),
            )
            if expected == -np.inf:
                assert batch.values[i] == -np.inf
            else:
                assert batch.values[i] == pytest.approx(expected, abs=1e-10)

    def test_en_only_ranks_by_neg_error(self, rng):
        head, train, test = random_fixture(rng, c=3, d=8, n_train=60, n_test=30)
        train = np.abs(train) + 0.1
        profile = fitted_profile(train, head)
        config = CadrefConfig(use_pos=False, use_neg=True, use_scaling=False)
        scores = cadref_score_batch(test, profile, head, config).values
        neg_errors = np.array(
            [
                decouple_errors(f, profile, head).neg
                if profile.usable[int(predicted_labels(compute_logits(f, head)))]
                else np.inf
                for f in test
            ]
        )
        finite = np.isfinite(scores)
        order_a = np.argsort(scores[finite])
        order_b = np.argsort(-neg_errors[finite])
        np.testing.assert_array_equal(order_a, order_b)

    def test_ep_only_no_scaling_equals_neg_pos_error(self, rng):
        head, train, test = random_fixture(rng, c=3, d=8, n_train=60, n_test=20)
        train = np.abs(train) + 0.1
        profile = fitted_profile(train, head)
        config = CadrefConfig(use_pos=True, use_neg=False, use_scaling=False)
        scores = cadref_score_batch(test, profile, head, config).values
        for i, feat in enumerate(test):
            pred = int(predicted_labels(compute_logits(feat, head)))
            if profile.usable[pred]:
                assert scores[i] == pytest.approx(
                    -decouple_errors(feat, profile, head).pos, abs=1e-12
                )

    def test_nonpositive_sample_score_surrogate(self):
        head = ClassifierHead(weights=np.eye(2), bias=np.zeros(2))
        train = np.tile([4.0, 1.0], (4, 1))
        profile = fitted_profile(train, head)
        sample = np.array([-80.0, -90.0])  # energy far below zero
        batch = cadref_score_batch(sample[None, :], profile, head)
        assert batch.values[0] == -np.inf
        assert batch.warnings["nonpositive_logit_score"] == 1
        assert cadref_score(sample, profile, head) == -np.inf

    def test_requires_fitted_mean(self, rng):
        head, train, test = random_fixture(rng, c=3, d=6)
        profile = fit_class_means(train, head)
        with pytest.raises(errors.NotFitted):
            cadref_score_batch(test, profile, head)

    def test_config_mismatch_rejected(self, rng):
        head, train, test = random_fixture(rng, c=3, d=6)
        train = np.abs(train) + 0.1
        profile = fitted_profile(train, head)
        other = CadrefConfig(logit_score=LogitScoreConfig(method="gen"))
        with pytest.raises(errors.NotFitted):
            cadref_score_batch(test, profile, head, other)

    def test_batch_invariants_randomized(self, rng):
        for trial in range(3):
            head, train, test = random_fixture(rng, c=5, d=12, n_train=100, n_test=50)
            train = np.abs(train) + 0.1
            profile = fitted_profile(train, head)
            caref_errors = []
            for feat in test:
                pred = int(predicted_labels(compute_logits(feat, head)))
                caref_errors.append(
                    -caref_score(feat, profile, head) if profile.usable[pred] else None
                )
            for mode in (RELATIVE_SIGN, RAW_SIGN):
                for agg, exact in ((ABS_SUM, False), (SUM_ABS, True)):
                    for i, feat in enumerate(test):
                        if caref_errors[i] is None:
                            continue
                        err = decouple_errors(feat, profile, head, mode, agg)
                        assert err.pos >= 0 and err.neg >= 0
                        if exact:
                            assert err.pos + err.neg == pytest.approx(
                                caref_errors[i], abs=1e-12
                            )
                        else:
                            assert err.pos + err.neg <= caref_errors[i] + 1e-12
