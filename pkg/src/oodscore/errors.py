"""Exception hierarchy for the scoring engine.

ConfigError subclasses indicate bad user input (CLI exit code 2); the
remaining EngineError subclasses indicate runtime failures (exit code 1).
"""


class OodscoreError(Exception):
    """Base class for all engine errors."""


class ConfigError(OodscoreError):
    """Invalid configuration, manifest, or CLI input."""


class EngineError(OodscoreError):
    """Runtime failure inside the scoring engine."""


# --- interchange -------------------------------------------------------------

class MalformedHeader(ConfigError):
    """Tensor file header is corrupt, truncated, or has an unsupported rank."""


class SizeMismatch(ConfigError):
    """Tensor payload length disagrees with the declared shape."""


class UnsupportedDtype(ConfigError):
    """Tensor file declares an unknown dtype code."""


class MissingFile(ConfigError):
    """A file referenced by a manifest does not exist."""


class InvalidManifest(ConfigError):
    """Manifest JSON is missing fields or declares inconsistent metadata."""


class ShapeMismatch(ConfigError):
    """A loaded tensor violates a cross-shape invariant of the manifest."""


class LabelOutOfRange(ConfigError):
    """A label value is not an integer in [0, num_classes)."""


class NonFiniteValues(ConfigError):
    """A loaded tensor contains NaN or infinite entries."""


# --- numerics ---------------------------------------------------------------

class DimensionMismatch(EngineError):
    """Operands have incompatible shapes."""


class EmptyInput(EngineError):
    """An operation received an empty collection."""


class NotSymmetric(EngineError):
    """Eigendecomposition input is not symmetric within tolerance."""


class ConvergenceFailure(EngineError):
    """Iterative solver failed to converge."""


# --- scoring ----------------------------------------------------------------

class MOutOfRange(ConfigError):
    """Truncation count for the generalized-entropy score is outside [1, c]."""


class AllPruned(EngineError):
    """Activation shaping removed every feature of a sample."""


class DOutOfRange(ConfigError):
    """Principal subspace dimension is outside [1, d]."""


class UnusableClass(EngineError):
    """Predicted class has no training members in the fitted profile."""


class ZeroNormFeature(EngineError):
    """Feature vector has zero l1 norm; relative error is undefined."""


class NonPositiveMean(EngineError):
    """Training-mean logit score is not positive; it cannot normalize errors."""


class NotFitted(EngineError):
    """A method that requires fitting was scored before fit()."""
