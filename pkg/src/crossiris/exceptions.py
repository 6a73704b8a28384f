"""Exception hierarchy for the crossiris pipeline."""


class CrossIrisError(Exception):
    """Base class for all pipeline errors."""


# --- imaging ---

class UnreadableFile(CrossIrisError):
    """File is missing or does not decode to a supported 8-bit raster."""


class BandMismatch(CrossIrisError):
    """Decoded plane count is inconsistent with the declared spectrum."""


class TargetTooLarge(CrossIrisError):
    """Requested crop exceeds the source dimensions."""


class NotColorImage(CrossIrisError):
    """Channel extraction requires a 3-plane RGB image."""


class PolicyFormatError(CrossIrisError):
    """Channel policy file contains an unknown key or malformed line."""


# --- segmentation ---

class SegmentationFailed(CrossIrisError):
    """Boundary search objective stayed below the confidence floor."""


class BoundaryOrderViolation(CrossIrisError):
    """Pupil and limbic circles violate containment or radius-ratio bounds."""


# --- normalization ---

class EmptyValidRegion(CrossIrisError):
    """Too few valid samples in the unwrapped iris texture."""


# --- encoding / matching ---

class ShapeMismatch(CrossIrisError):
    """Texture shape is incompatible with the encoder parameters."""


class IncompatibleCodes(CrossIrisError):
    """Codes differ in encoder, parameter digest, or shape."""


class InsufficientOverlap(CrossIrisError):
    """Jointly valid bits fall below the minimum required for a score."""


class CodeFormatError(CrossIrisError):
    """Serialized iris-code blob is malformed."""


# --- evaluation ---

class ManifestError(CrossIrisError):
    """Manifest file cannot be parsed or references missing images."""


class MissingEnrollment(ManifestError):
    """A visible-light iris has no near-infrared enrollment entry."""


class InconsistentEyeColor(ManifestError):
    """One iris appears with more than one eye-color label."""


class EmptyScoreList(CrossIrisError):
    """ROC computation needs at least one genuine and one impostor score."""


class ConfigError(CrossIrisError):
    """Run configuration file contains an unknown key or bad value."""


# --- synthdata ---

class GeometryOutOfFrame(CrossIrisError):
    """Requested eye geometry does not fit inside the target frame."""
