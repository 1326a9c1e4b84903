"""Exception hierarchy shared across the pipeline.

Exit-code mapping (see cli): ConfigError -> 1, DataError -> 2,
TransportError -> 3.
"""


class AtlasError(Exception):
    """Base class for all pipeline errors."""


class ConfigError(AtlasError):
    """Invalid configuration or CLI usage."""


class DataError(AtlasError):
    """Bad or missing input data (snapshots, corpora, analytics files)."""


class CacheMissError(DataError):
    """Offline mode asked for a request that is not in the snapshot cache."""

    def __init__(self, request_key: str):
        super().__init__(f"cache miss for request: {request_key}")
        self.request_key = request_key


class CorpusFormatError(DataError):
    """Corpus file is truncated, corrupt, or has an incompatible version."""


class WorkParseError(DataError):
    """A raw OpenAlex work record could not be parsed."""


class TransportError(AtlasError):
    """HTTP failure that survived the retry policy."""


class UndefinedDistanceError(AtlasError):
    """Collaboration distance requested between two empty work sets."""


class DegeneratePathError(AtlasError):
    """Great-circle arc requested between two identical points."""


class AntipodalArcError(AtlasError):
    """Great-circle arc requested between antipodal points (no unique arc)."""


class EmptyFigureError(AtlasError):
    """A figure was requested with no data to draw."""
