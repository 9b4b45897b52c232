"""Backend agreement: compiled kernels vs the numpy fallback."""

import numpy as np
import pytest

from oodscore import _kernels
from oodscore._kernels import _ref

fast = pytest.importorskip(
    "oodscore._kernels._fast", reason="compiled kernels not built"
)


def make_case(rng, n=64, c=5, d=17):
    features = rng.normal(size=(n, d))
    means = rng.normal(size=(c, d))
    weights = rng.normal(size=(c, d))
    pred = rng.integers(0, c, size=n).astype(np.int64)
    # sprinkle exact zero products to exercise the boundary rule
    features[0] = means[pred[0]]
    weights[pred[1], :3] = 0.0
    return (
        np.ascontiguousarray(features),
        np.ascontiguousarray(means),
        np.ascontiguousarray(weights),
        pred,
    )


def test_relative_l1_agreement(rng):
    for _ in range(5):
        features, means, _, pred = make_case(rng)
        d_fast, n_fast = fast.relative_l1_errors(features, means, pred)
        d_ref, n_ref = _ref.relative_l1_errors(features, means, pred)
        np.testing.assert_allclose(d_fast, d_ref, atol=1e-12)
        np.testing.assert_allclose(n_fast, n_ref, atol=1e-12)


@pytest.mark.parametrize("relative_sign", [True, False])
@pytest.mark.parametrize("sum_abs", [True, False])
def test_decoupled_agreement(rng, relative_sign, sum_abs):
    for _ in range(5):
        features, means, weights, pred = make_case(rng)
        out_fast = fast.decoupled_error_sums(
            features, means, weights, pred, relative_sign, sum_abs
        )
        out_ref = _ref.decoupled_error_sums(
            features, means, weights, pred, relative_sign, sum_abs
        )
        for a, b in zip(out_fast, out_ref):
            np.testing.assert_allclose(a, b, atol=1e-12)


def test_dispatcher_coerces_layout(rng):
    features, means, weights, pred = make_case(rng)
    # Fortran-ordered and float32 inputs must be accepted
    got = _kernels.decoupled_error_sums(
        np.asfortranarray(features.astype(np.float32)),
        means,
        weights,
        pred.astype(np.int32),
        True,
        False,
    )
    expected = _ref.decoupled_error_sums(
        features.astype(np.float32).astype(np.float64), means, weights, pred, True, False
    )
    for a, b in zip(got, expected):
        np.testing.assert_allclose(a, b, atol=1e-12)


def test_backend_reported():
    assert _kernels.BACKEND in ("compiled", "python")
