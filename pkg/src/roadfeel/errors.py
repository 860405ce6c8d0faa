"""Exception types shared across the pipeline."""


class RoadfeelError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(RoadfeelError):
    """Invalid configuration value or combination."""


class ShapeError(RoadfeelError):
    """Array shape or length does not match the declared contract."""


class InsufficientTrack(RoadfeelError):
    """The positioning track ends (or stalls) before the requested distance is covered."""


class WindowOutOfRange(RoadfeelError):
    """Requested time window is not covered by the recorded stream."""


class DegenerateSegment(RoadfeelError):
    """Arc-length span of a window is zero; spatial resampling is undefined."""


class StepError(RoadfeelError):
    """Diffusion step index outside [1, T]."""


class SamplingDiverged(RoadfeelError):
    """Reverse diffusion produced a non-finite value."""

    def __init__(self, step: int, message: str = ""):
        self.step = step
        super().__init__(message or f"non-finite sample at reverse step t={step}")


class TrainingDiverged(RoadfeelError):
    """Training loss became non-finite."""

    def __init__(self, step: int, message: str = ""):
        self.step = step
        super().__init__(message or f"loss became non-finite at step {step}")


class CheckpointMismatch(RoadfeelError):
    """Checkpoints were produced with incompatible configurations."""


class ManifestIntegrityError(RoadfeelError):
    """Dataset manifest references a file that does not exist or is inconsistent."""


class UndefinedSimilarity(RoadfeelError):
    """Spectral metric undefined (all-zero signal or spectrum)."""


class DecodeError(RoadfeelError):
    """Image could not be interpreted as an H x W x 3 array in [0, 1]."""


class BackboneUnavailable(RoadfeelError):
    """Requested pretrained vision backbone cannot be loaded in this environment."""
