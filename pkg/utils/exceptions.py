from typing import Optional


class ConfigError(ValueError):
    """Invalid configuration: unknown registry key, bad flag value or
    evaluator/solver combination that cannot run."""


class ParseError(ValueError):
    def __init__(self, message: str, lineno: Optional[int] = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class ShapeMismatchError(ValueError):
    pass


class NoSolutionError(RuntimeError):
    pass


class InadmissibleEtaError(ValueError):
    """Raised when a bound needs a PHS-admissible heuristic factor and the
    tree's factor is not."""
