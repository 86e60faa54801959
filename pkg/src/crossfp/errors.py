"""Exception hierarchy shared by all crossfp modules.

Every domain failure derives from CrossFpError so the CLI can map it to a
single nonzero exit code while library users can still catch specific
conditions.
"""


class CrossFpError(Exception):
    """Base class for all crossfp domain errors."""


class UnsupportedFormatError(CrossFpError):
    """Input file is not a supported grayscale image format."""


class ImageTooSmallError(CrossFpError):
    """Image is below the minimum size required by the pipeline."""


class ZeroVarianceError(CrossFpError):
    """Constant image: intensity normalization is undefined."""


class EmptyForegroundError(CrossFpError):
    """Segmentation found less than the minimum fingerprint area."""


class NoValidPixelsError(CrossFpError):
    """Orientation field contains no valid pixels."""


class OffsetTooLargeError(CrossFpError):
    """Co-occurrence offset does not fit inside the field."""


class DegenerateDescriptorError(CrossFpError):
    """Raw descriptor vector is constant; normalization is undefined."""


class InvalidConfigError(CrossFpError):
    """A component was configured with out-of-range parameters."""


class TooFewSamplesError(CrossFpError):
    """Not enough training samples to fit the fusion model."""


class NumericalFailureError(CrossFpError):
    """A linear-algebra routine failed to converge."""


class DimensionMismatchError(CrossFpError):
    """Vector or matrix dimensions do not agree."""


class CorruptModelError(CrossFpError):
    """Stored artifact (model, descriptor, or template DB) is damaged."""


class VersionMismatchError(CrossFpError):
    """Stored artifact was written by an incompatible format version."""


class ModelMismatchError(CrossFpError):
    """Template database is bound to a different fusion model."""


class UnknownSubjectError(CrossFpError):
    """Requested subject has no enrolled templates."""


class DBWriteFailureError(CrossFpError):
    """Appending a record to the template database failed."""


class EmptyDatasetError(CrossFpError):
    """Dataset directory holds no usable fingerprint images."""


class EmptyScoresError(CrossFpError):
    """Metric computation requires nonempty genuine and impostor lists."""


class InvalidProfileError(CrossFpError):
    """Synthetic sensor profile has out-of-range parameters."""


class ConfigParseError(CrossFpError):
    """Configuration file is syntactically malformed."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ConfigValidationError(CrossFpError):
    """Configuration value failed validation."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key
