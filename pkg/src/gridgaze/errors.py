"""Exception types raised across the pipeline.

All inherit from PipelineError so callers (and the CLI) can catch one
base class; each also subclasses ValueError to stay idiomatic.
"""


class PipelineError(ValueError):
    """Base class for every gridgaze-specific error."""


# --- saliency maps -------------------------------------------------------

class AllZeroMapError(PipelineError):
    """Map has no strictly positive pixel where one is required."""


class EmptyBinaryMapError(PipelineError):
    """Binarization produced a map with no set bits."""


class DimensionMismatchError(PipelineError):
    """Array dimensions incompatible with the requested operation."""


class NegativeValueError(PipelineError):
    """Value violates the non-negative / finite map invariant."""


# --- gaze head / training ------------------------------------------------

class SpecMismatchError(PipelineError):
    """Grid shapes of prediction and target disagree."""


class ShapeMismatchError(PipelineError):
    """Parameter, gradient or moment shapes disagree."""


class EmptyDatasetError(PipelineError):
    """Training requires at least one sample."""


class InconsistentDimsError(PipelineError):
    """Samples in a dataset do not share feature dimensions."""


# --- attention mapping ---------------------------------------------------

class EmptyIntersectionError(PipelineError):
    """Clipped box contains no pixel centers."""


class InvalidBoxError(PipelineError):
    """Bounding box fails its coordinate invariants."""


# --- metrics -------------------------------------------------------------

class LengthMismatchError(PipelineError):
    """Paired vectors have different lengths."""


class DegenerateLabelsError(PipelineError):
    """Ranking metrics need at least one positive and one negative."""


class ConstantMapError(PipelineError):
    """Correlation undefined for a zero-variance map."""


# --- synthetic data ------------------------------------------------------

class InfeasibleSpecError(PipelineError):
    """Scene spec can never produce a focused object."""


class EmptyInputError(PipelineError):
    """An aggregate over maps received an empty sequence."""


# --- file formats --------------------------------------------------------

class FormatError(PipelineError):
    """Base class for file format errors."""


class MalformedHeaderError(FormatError):
    """File header does not match the expected format."""


class TruncatedPayloadError(FormatError):
    """Payload length disagrees with the declared dimensions."""


class ParseError(FormatError):
    """Structured text input failed to parse.

    Carries the 1-based line number when known.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ManifestError(FormatError):
    """Dataset manifest violates its invariants."""
