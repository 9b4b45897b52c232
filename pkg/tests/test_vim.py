import numpy as np
import pytest

from oodscore import ClassifierHead, LogitScoreConfig, errors
from oodscore.linalg import sym_eig
from oodscore.logit_scores import compute_logits, score_logits
from oodscore.vim import (
    fit_vim,
    residual_norms,
    residual_score_batch,
    vim_score,
    vim_score_batch,
)

from conftest import random_head

ENERGY = LogitScoreConfig(method="energy", temperature=1.0)
MAXLOGIT = LogitScoreConfig(method="maxlogit")


def planar_features(rng, n, d, rank):
    basis = np.linalg.qr(rng.normal(size=(d, rank)))[0]
    return rng.normal(size=(n, rank)) @ basis.T


class TestFitVim:
    def test_exact_subspace_zero_residuals(self, rng):
        feats = planar_features(rng, 40, 6, 2)
        head = random_head(rng, 3, 6)
        model = fit_vim(feats, head, subspace_dim=2)
        assert residual_norms(feats, model).max() <= 1e-8

    def test_axis_aligned(self, rng):
        head = random_head(rng, 2, 2)
        feats = np.zeros((10, 2))
        feats[:, 0] = rng.normal(size=10)
        model = fit_vim(feats, head, subspace_dim=1)
        np.testing.assert_allclose(np.abs(model.basis[:, 0]), [1.0, 0.0], atol=1e-12)

    def test_matches_full_eigendecomposition(self, rng):
        feats = rng.normal(size=(50, 6))
        head = random_head(rng, 4, 6)
        model = fit_vim(feats, head, subspace_dim=3)
        moment = feats.T @ feats / len(feats)
        eig = sym_eig(moment)
        expected_basis = eig.eigenvectors[:, :3]
        proj_model = model.basis @ model.basis.T
        proj_oracle = expected_basis @ expected_basis.T
        assert np.abs(proj_model - proj_oracle).max() <= 1e-8

    def test_d_out_of_range(self, rng):
        head = random_head(rng, 3, 5)
        feats = rng.normal(size=(20, 5))
        for bad in (0, 6, -1):
            with pytest.raises(errors.DOutOfRange):
                fit_vim(feats, head, subspace_dim=bad)

    def test_degenerate_spectrum_flag(self, rng):
        head = random_head(rng, 3, 6)
        feats = planar_features(rng, 30, 6, 2)  # eigenvalues 3..6 are all zero
        with pytest.warns(RuntimeWarning):
            model = fit_vim(feats, head, subspace_dim=3)
        assert model.degenerate_spectrum

    def test_few_samples_warns(self, rng):
        head = random_head(rng, 3, 10)
        feats = rng.normal(size=(5, 10))
        with pytest.warns(RuntimeWarning):
            fit_vim(feats, head, subspace_dim=2)

    def test_alpha_balances_training_means(self, rng):
        feats = np.abs(rng.normal(size=(60, 8))) + 0.1
        head = random_head(rng, 4, 8)
        model = fit_vim(feats, head, subspace_dim=3)
        resid_mean = residual_norms(feats, model).mean()
        maxlogit_mean = compute_logits(feats, head).max(axis=1).mean()
        assert model.alpha * resid_mean == pytest.approx(maxlogit_mean, rel=1e-9)


class TestVimScore:
    def test_in_span_equals_inner(self, rng):
        feats = rng.normal(size=(60, 6))
        head = random_head(rng, 3, 6)
        model = fit_vim(feats, head, subspace_dim=3)
        probes = rng.normal(size=(15, 3)) @ model.basis.T  # inside the span
        inner = score_logits(compute_logits(probes, head), ENERGY)
        got = vim_score_batch(probes, model, head, ENERGY)
        np.testing.assert_allclose(got, inner, atol=1e-8)

    def test_orthogonal_feature_pure_residual(self, rng):
        # features on the x axis, candidate orthogonal to the span, zero head:
        # maxlogit is 0 so the score is exactly -alpha * |feat|
        feats = np.zeros((20, 3))
        feats[:, 0] = np.abs(rng.normal(size=20)) + 0.5
        head = ClassifierHead(weights=np.zeros((2, 3)), bias=np.zeros(2))
        with pytest.warns(RuntimeWarning, match="falling back"):
            model = fit_vim(feats, head, subspace_dim=1)  # zero head: alpha -> 1.0
        probe = np.array([0.0, 2.0, 0.0])
        got = vim_score(probe, model, head, MAXLOGIT)
        assert got == pytest.approx(-model.alpha * 2.0, abs=1e-10)

    def test_projector_oracle(self, rng):
        feats = rng.normal(size=(60, 7))
        head = random_head(rng, 4, 7)
        model = fit_vim(feats, head, subspace_dim=4)
        test = rng.normal(size=(15, 7))
        projector = np.eye(7) - model.basis @ model.basis.T
        expected = np.linalg.norm(test @ projector.T, axis=1)
        np.testing.assert_allclose(residual_norms(test, model), expected, atol=1e-10)

    def test_residual_rotation_invariance(self, rng):
        feats = rng.normal(size=(50, 6))
        head = random_head(rng, 3, 6)
        model = fit_vim(feats, head, subspace_dim=3)
        # remix the basis columns inside the span and re-orthonormalize
        mix = rng.normal(size=(3, 3))
        remixed, _ = np.linalg.qr(model.basis @ mix)
        import dataclasses

        rotated = dataclasses.replace(
            model, basis=remixed
        )
        test = rng.normal(size=(10, 6))
        np.testing.assert_allclose(
            residual_norms(test, rotated), residual_norms(test, model), atol=1e-9
        )

    def test_residual_bounded_by_norm(self, rng):
        feats = rng.normal(size=(40, 8))
        head = random_head(rng, 3, 8)
        model = fit_vim(feats, head, subspace_dim=4)
        test = rng.normal(size=(25, 8))
        resid = residual_norms(test, model)
        norms = np.linalg.norm(test, axis=1)
        assert (resid <= norms + 1e-10).all()

    def test_nested_dims_monotone(self, rng):
        feats = rng.normal(size=(60, 8))
        head = random_head(rng, 3, 8)
        test = rng.normal(size=(20, 8))
        prev = None
        for dim in (1, 2, 4, 6, 8):
            resid = residual_norms(test, fit_vim(feats, head, subspace_dim=dim))
            if prev is not None:
                assert (resid <= prev + 1e-8).all()
            prev = resid

    def test_residual_variant_is_negated_norm(self, rng):
        feats = rng.normal(size=(40, 6))
        head = random_head(rng, 3, 6)
        model = fit_vim(feats, head, subspace_dim=3)
        test = rng.normal(size=(10, 6))
        np.testing.assert_allclose(
            residual_score_batch(test, model), -residual_norms(test, model)
        )

    def test_mean_centering_mode(self, rng):
        feats = np.abs(rng.normal(size=(50, 6))) + 5.0
        head = random_head(rng, 3, 6)
        head = ClassifierHead(weights=np.abs(head.weights), bias=head.bias)
        model = fit_vim(feats, head, subspace_dim=2, center="mean")
        np.testing.assert_allclose(model.center, feats.mean(axis=0))
        centered = feats - model.center
        moment = centered.T @ centered / len(feats)
        eig = sym_eig(moment)
        proj_model = model.basis @ model.basis.T
        expected = eig.eigenvectors[:, :2] @ eig.eigenvectors[:, :2].T
        assert np.abs(proj_model - expected).max() <= 1e-8

    def test_shape_mismatch(self, rng):
        feats = rng.normal(size=(30, 5))
        head = random_head(rng, 3, 5)
        model = fit_vim(feats, head, subspace_dim=2)
        with pytest.raises(errors.ShapeMismatch):
            residual_norms(rng.normal(size=(4, 7)), model)
