"""
Exception hierarchy for wavepinn.

Every error carries a short category and the process exit code the CLI uses for it.
"""


class WavePinnError(Exception):
    category = "error"
    exit_code = 1

    def __init__(self, detail: str):
        self.detail = detail
        super().__init__(detail)


class ConfigError(WavePinnError):
    category = "config"
    exit_code = 2


class ArgumentError(WavePinnError, ValueError):
    category = "invalid-argument"
    exit_code = 2


class ProblemLookupError(WavePinnError, KeyError):
    category = "lookup"
    exit_code = 2

    def __str__(self) -> str:
        return self.detail


class FileError(WavePinnError):
    category = "file"
    exit_code = 3

    def __init__(self, path, detail: str):
        self.path = str(path)
        super().__init__(f"{self.path}: {detail}")


class GeometryError(WavePinnError):
    category = "geometry"
    exit_code = 4


class ShapeError(WavePinnError, ValueError):
    category = "shape"
    exit_code = 4


class NumericError(WavePinnError):
    category = "numeric"
    exit_code = 5

    def __init__(self, term: str, detail: str):
        self.term = term
        super().__init__(f"{term}: {detail}")


class DegenerateReferenceError(WavePinnError):
    category = "degenerate-reference"
    exit_code = 5


class UnsupportedError(WavePinnError):
    category = "unsupported"
    exit_code = 6


class CheckFailedError(WavePinnError):
    category = "check-failed"
    exit_code = 7
