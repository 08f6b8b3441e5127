"""Exception types raised across the package."""


class SmicqaError(Exception):
    """Base class for errors raised by smicqa."""


class PreconditionError(SmicqaError, ValueError):
    """Inputs violate a documented precondition (shapes, lengths, ranges)."""


class SearchTooLargeError(SmicqaError, ValueError):
    """Exhaustive MIC search requested on too many samples."""


class StageTooSmallError(PreconditionError):
    """A feature stage cannot host a single patch."""

    def __init__(self, stage, dims, patch):
        self.stage = stage
        self.dims = tuple(dims)
        self.patch = patch
        super().__init__(
            f"stage too small: stage {stage} has spatial dims {self.dims}, "
            f"smaller than the {patch}x{patch} patch"
        )


class BackboneError(SmicqaError):
    """Base class for feature-backbone failures."""


class ModelFileNotFoundError(BackboneError, FileNotFoundError):
    pass


class MissingTapError(BackboneError):
    def __init__(self, tap, available=()):
        self.tap = tap
        super().__init__(f"missing tap {tap!r} in model graph")


class ShapeProbeError(BackboneError):
    pass


class BackboneLoadError(BackboneError):
    pass


class InferenceError(BackboneError):
    pass


class ManifestError(SmicqaError, ValueError):
    """Malformed or inconsistent benchmark manifest."""


class ManifestParseError(ManifestError):
    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")


class DuplicateRowError(ManifestError):
    pass


class UnresolvablePathError(ManifestError, FileNotFoundError):
    pass


class DegenerateRanksError(SmicqaError, ValueError):
    """Rank correlation undefined because one input has zero rank variance."""
