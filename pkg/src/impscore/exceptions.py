"""Exception types shared across the package."""


class ImpscoreError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(ImpscoreError):
    """Raised when a configuration value is out of its legal range."""


class DimensionError(ImpscoreError):
    """Raised when an array has the wrong shape for an operation."""

    def __init__(self, expected, actual, context: str = ""):
        self.expected = expected
        self.actual = actual
        where = f" in {context}" if context else ""
        super().__init__(f"expected dimension {expected}, got {actual}{where}")


class SchemaError(ImpscoreError):
    """Raised when a file or payload does not match its wire format."""


class MissingEmbeddingError(ImpscoreError):
    """Raised by lookup backends when a text has no stored vector."""

    def __init__(self, text: str):
        self.text = text
        shown = text if len(text) <= 80 else text[:77] + "..."
        super().__init__(f"no stored embedding for text: {shown!r}")


class BackendError(ImpscoreError):
    """Raised when an embedding backend fails to produce vectors."""
