"""Kernel backend selection.

The compiled Cython kernels are preferred when importable; otherwise the
numpy fallback is used. ``OODSCORE_BACKEND`` overrides: ``compiled`` insists
on the extension (raising if absent), ``python`` forces the fallback, and
``auto`` (default) picks whatever is available.

Both backends take C-contiguous float64 matrices and int64 prediction
vectors; ``prepare`` coerces inputs once at the call boundary.
"""

from __future__ import annotations

import os

import numpy as np

from . import _ref

_requested = os.environ.get("OODSCORE_BACKEND", "auto").strip().lower()

if _requested in ("auto", "", "compiled"):
    try:
        from . import _fast as _impl

        BACKEND = "compiled"
    except ImportError:
        if _requested == "compiled":
            raise
        _impl = _ref
        BACKEND = "python"
elif _requested in ("python", "fallback"):
    _impl = _ref
    BACKEND = "python"
else:
    raise ValueError(
        f"OODSCORE_BACKEND={_requested!r}; expected auto, compiled, or python"
    )


def prepare(features, class_means, weights, pred):
    """Coerce kernel operands to the layouts both backends expect."""
    return (
        np.ascontiguousarray(features, dtype=np.float64),
        np.ascontiguousarray(class_means, dtype=np.float64),
        np.ascontiguousarray(weights, dtype=np.float64) if weights is not None else None,
        np.ascontiguousarray(pred, dtype=np.int64),
    )


def relative_l1_errors(features, class_means, pred):
    f, m, _, p = prepare(features, class_means, None, pred)
    return _impl.relative_l1_errors(f, m, p)


def decoupled_error_sums(features, class_means, weights, pred, relative_sign, sum_abs):
    f, m, w, p = prepare(features, class_means, weights, pred)
    return _impl.decoupled_error_sums(f, m, w, p, relative_sign, sum_abs)
