import numpy as np
import pytest

from oodscore import ClassifierHead, errors, fit_class_means
from oodscore.caref import (
    caref_score,
    caref_score_batch,
    l1_distance_score,
    l1_distance_score_batch,
    l1_norm_score,
    l1_norm_score_batch,
)
from oodscore.logit_scores import compute_logits, predicted_labels

from conftest import random_fixture, random_head


class TestFitClassMeans:
    def test_two_point_mean(self):
        head = ClassifierHead(weights=np.eye(2), bias=np.zeros(2))
        train = np.array([[1.0, 0.5], [3.0, 0.5]])  # both predict class 0
        profile = fit_class_means(train, head)
        np.testing.assert_allclose(profile.class_means[0], [2.0, 0.5])
        assert profile.class_counts.tolist() == [2, 0]

    def test_never_predicted_class_flagged(self):
        head = ClassifierHead(weights=np.eye(3), bias=np.zeros(3))
        train = np.array([[5.0, 1.0, 0.0], [1.0, 6.0, 0.0]])
        profile = fit_class_means(train, head)
        assert profile.usable.tolist() == [True, True, False]
        assert profile.class_counts[2] == 0

    def test_against_group_by_oracle(self, rng):
        head, train, _ = random_fixture(rng, c=5, d=8, n_train=100)
        profile = fit_class_means(train, head)
        pred = predicted_labels(compute_logits(train, head))
        for k in range(5):
            group = train[pred == k]
            if len(group):
                np.testing.assert_allclose(
                    profile.class_means[k], group.mean(axis=0), atol=1e-12
                )
            assert profile.class_counts[k] == len(group)

    def test_sample_order_invariance(self, rng):
        head, train, _ = random_fixture(rng, c=3, d=6, n_train=40)
        base = fit_class_means(train, head)
        shuffled = fit_class_means(train[rng.permutation(len(train))], head)
        np.testing.assert_allclose(base.class_means, shuffled.class_means, atol=1e-12)

    def test_empty_input(self):
        head = ClassifierHead(weights=np.eye(2), bias=np.zeros(2))
        with pytest.raises(errors.EmptyInput):
            fit_class_means(np.empty((0, 2)), head)


class TestCarefScore:
    def test_zero_at_class_mean(self, rng):
        head, train, _ = random_fixture(rng, c=3, d=5)
        profile = fit_class_means(train, head)
        k = int(np.flatnonzero(profile.usable)[0])
        assert caref_score(profile.class_means[k], profile, head) == pytest.approx(
            0.0, abs=1e-12
        )

    def test_doubled_mean(self):
        head = ClassifierHead(weights=np.eye(2), bias=np.zeros(2))
        train = np.tile([2.0, 1.0], (3, 1))
        profile = fit_class_means(train, head)
        # feature = 2 * mean, all positive: error |m|/|2m| = 0.5
        assert caref_score(np.array([4.0, 2.0]), profile, head) == pytest.approx(-0.5)

    def test_elementwise_oracle(self, rng):
        head, train, test = random_fixture(rng, c=4, d=8)
        profile = fit_class_means(train, head)
        for feat in test[:10]:
            pred = int(predicted_labels(compute_logits(feat, head)))
            if not profile.usable[pred]:
                continue
            expected = -sum(
                abs(feat[j] - profile.class_means[pred][j]) for j in range(8)
            ) / sum(abs(x) for x in feat)
            assert caref_score(feat, profile, head) == pytest.approx(expected, abs=1e-12)

    def test_always_nonpositive_and_zero_iff_mean(self, rng):
        head, train, test = random_fixture(rng, c=4, d=8)
        profile = fit_class_means(train, head)
        scores = caref_score_batch(test, profile, head)
        assert (scores.values <= 0).all()

    def test_scale_identity(self, rng):
        # l1 error of a scaled sample relates to the unscaled norm through
        # the exact formula |l*f - m|_1 / (l * |f|_1) when the prediction
        # cannot move (zero bias) and l > 0
        head = random_head(rng, 3, 6)
        head = ClassifierHead(weights=head.weights, bias=np.zeros(3))
        train = rng.normal(size=(50, 6))
        profile = fit_class_means(train, head)
        feat = rng.normal(size=6)
        pred = int(predicted_labels(compute_logits(feat, head)))
        if not profile.usable[pred]:
            pytest.skip("predicted class empty in this draw")
        for lam in (0.5, 2.0, 7.5):
            expected = -np.abs(lam * feat - profile.class_means[pred]).sum() / (
                lam * np.abs(feat).sum()
            )
            assert caref_score(lam * feat, profile, head) == pytest.approx(
                expected, abs=1e-12
            )

    def test_consistent_permutation_invariance(self, rng):
        head, train, test = random_fixture(rng, c=3, d=7)
        profile = fit_class_means(train, head)
        perm = rng.permutation(7)
        head_p = ClassifierHead(weights=head.weights[:, perm], bias=head.bias)
        profile_p = fit_class_means(train[:, perm], head_p)
        for feat in test[:8]:
            a = caref_score(feat, profile, head)
            b = caref_score(feat[perm], profile_p, head_p)
            assert a == pytest.approx(b, abs=1e-12)

    def test_unusable_class_raises_and_batch_surrogate(self):
        head = ClassifierHead(weights=np.eye(3), bias=np.zeros(3))
        train = np.array([[5.0, 1.0, 0.0], [1.0, 6.0, 0.0]])
        profile = fit_class_means(train, head)
        lonely = np.array([0.1, 0.2, 9.0])  # predicts the empty class 2
        with pytest.raises(errors.UnusableClass):
            caref_score(lonely, profile, head)
        batch = caref_score_batch(lonely[None, :], profile, head)
        assert batch.values[0] == -np.inf
        assert batch.warnings["unusable_class"] == 1

    def test_zero_norm_raises_and_batch_surrogate(self):
        head = ClassifierHead(weights=np.eye(2), bias=np.array([1.0, 0.0]))
        profile = fit_class_means(np.array([[1.0, 1.0]]), head)
        zero = np.zeros(2)
        with pytest.raises(errors.ZeroNormFeature):
            caref_score(zero, profile, head)
        batch = caref_score_batch(zero[None, :], profile, head)
        assert batch.values[0] == -np.inf
        assert batch.warnings["zero_norm_feature"] == 1


class TestAblationScores:
    def test_l1_distance_values(self):
        head = ClassifierHead(weights=np.eye(2), bias=np.zeros(2))
        train = np.tile([2.0, 1.0], (3, 1))
        profile = fit_class_means(train, head)
        assert l1_distance_score(np.array([2.0, 1.0]), profile, head) == 0.0
        assert l1_distance_score(np.array([3.0, 0.0]), profile, head) == pytest.approx(-2.0)

    def test_l1_norm_values(self):
        assert l1_norm_score(np.zeros(4)) == 0.0
        assert l1_norm_score(np.array([1.0, -2.0, 3.0])) == 6.0

    def test_batch_matches_naive(self, rng):
        head, train, test = random_fixture(rng, c=4, d=8)
        profile = fit_class_means(train, head)
        dist = l1_distance_score_batch(test, profile, head)
        norm = l1_norm_score_batch(test)
        pred = predicted_labels(compute_logits(test, head))
        for i, feat in enumerate(test):
            if profile.usable[pred[i]]:
                expected = -np.abs(feat - profile.class_means[pred[i]]).sum()
                assert dist.values[i] == pytest.approx(expected, abs=1e-12)
            assert norm.values[i] == pytest.approx(np.abs(feat).sum(), abs=1e-12)
