"""Exception types shared across the package."""


class FormatError(ValueError):
    """A file does not conform to one of the binary/CSV formats."""


class DimensionMismatch(ValueError):
    """Array shapes disagree (feature count, point count, or index range)."""
