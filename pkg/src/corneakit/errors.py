"""Exception hierarchy shared across the toolkit.

Validation failures (bad inputs, bad configuration) exit the CLI with
code 1; storage/file problems exit with code 2.
"""


class CornealError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(CornealError):
    """Invalid input data or configuration."""


class DegenerateInput(ValidationError):
    """Point set cannot determine a fit (too few points, singular system)."""


class OutOfBounds(ValidationError):
    """Requested crop square exceeds the image extents."""


class InvalidBands(ValidationError):
    """Requested spectral band count exceeds the radial index range."""


class InvalidWindow(ValidationError):
    """Sliding-window height/stride incompatible with the map."""


class EmptyTrainingSet(ValidationError):
    pass


class KTooLarge(ValidationError):
    """k (neighbors or codebook size) exceeds what the data supports."""


class DimensionMismatch(ValidationError):
    pass


class SymbolOutOfRange(ValidationError):
    """Observation symbol outside the model's alphabet."""


class MissingClass(ValidationError):
    """Training split lacks one of the required class labels."""


class InvalidParams(ValidationError):
    """Synthetic generator parameters violate their constraints."""


class IoError(CornealError):
    """File could not be read, written, or parsed."""


class SchemaVersionMismatch(IoError):
    """Persisted model uses an unsupported format version."""


class ChecksumMismatch(IoError):
    """Persisted model payload does not match its recorded checksum."""


class DegenerateEmissionWarning(RuntimeWarning):
    """A state's emission row re-estimated to all-zero and was kept as-is."""
