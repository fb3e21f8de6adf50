"""Exception types shared across the pipeline."""


class KoasynthError(Exception):
    """Base class for all package-specific errors."""


class SchemaError(KoasynthError):
    """A manifest is missing a required column."""


class RowValidationError(KoasynthError):
    """A manifest row holds an out-of-domain value."""

    def __init__(self, row: int, message: str):
        super().__init__(f"row {row}: {message}")
        self.row = row


class InfeasibleSplitError(KoasynthError):
    """The requested partition cannot be realized at patient granularity."""


class NumericsError(KoasynthError):
    """A loss or gradient became non-finite; names the offending term."""


class ConstructionError(KoasynthError):
    """Layer shapes do not propagate consistently; names the layer."""


class MissingArtifactError(KoasynthError):
    """A pipeline stage was invoked before its prerequisites exist."""
