"""Exception hierarchy shared across the anonymization pipeline."""


class FaceAnonError(Exception):
    """Base class for all library errors."""


class ValidationError(FaceAnonError):
    """Input violates a declared invariant (shape, range, finiteness)."""


class ConfigError(FaceAnonError):
    """Run configuration is invalid; carries the full error list."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class BackendError(FaceAnonError):
    """A model backend is missing, mis-wired, or shape-incompatible."""


class InversionRejected(FaceAnonError):
    """Inversion refused an input image (no valid face detected)."""


class PoolTooSmall(FaceAnonError):
    """Fake pool size does not exceed the real-record count."""


class EmptyPool(FaceAnonError):
    """Nearest-neighbor pairing requires a non-empty pool."""


class EmptyInput(FaceAnonError):
    """Metric requested over an empty collection."""


class FeatureShapeMismatch(FaceAnonError):
    """Two feature sets disagree in shape where they must match."""


class DivergenceError(FaceAnonError):
    """Latent optimization produced a non-finite loss; carries the trajectory."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory or []


class ManifestMismatch(FaceAnonError):
    """Anonymized items and source records do not line up one-to-one."""


class InsufficientData(FaceAnonError):
    """Too few samples to compute the requested statistic."""


class LabelError(FaceAnonError):
    """Attribute labels do not cover the attribute specification."""


class InsufficientMargins(FaceAnonError):
    """Margin ablation needs at least two margin values."""


class DependencyError(FaceAnonError):
    """A pipeline stage was started before its upstream stages completed."""


class StaleArtifactError(FaceAnonError):
    """A consumed artifact's fingerprint no longer matches the producer's."""


class SkipLimitExceeded(FaceAnonError):
    """Per-item skip fraction exceeded the configured limit."""
