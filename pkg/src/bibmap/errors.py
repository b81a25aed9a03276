"""Exception hierarchy shared across the workbench."""


class BibmapError(Exception):
    """Base class for all errors raised by bibmap."""


class RisParseError(BibmapError):
    """Malformed RIS input. Carries the 1-based line number of the failure."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class SidecarError(BibmapError):
    """Bad citation sidecar (conflicting duplicate keys, missing columns...)."""


class QuerySyntaxError(BibmapError):
    """Query text could not be parsed. Carries the 0-based character position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class LedgerError(BibmapError):
    """Provenance ledger failed a reconciliation check."""


class CurationError(BibmapError):
    """Curation stage could not be applied (e.g. unresolved review verdicts)."""

    def __init__(self, message: str, unresolved: list | None = None):
        super().__init__(message)
        self.unresolved = list(unresolved or [])


class SamplingError(BibmapError):
    """Invalid sampling plan or exhausted population."""


class SessionError(BibmapError):
    """Review session misuse (duplicate verdict, unissued id, closed session)."""


class RegressionError(BibmapError):
    """Stepwise fit could not run (too few points, rank deficiency...)."""


class PipelineError(BibmapError):
    """Pipeline configuration or execution failure."""


class ReviewRequired(BibmapError):
    """A pipeline stage needs human verdicts before it can proceed."""

    def __init__(self, message: str, resume_command: str, flagged: list[str]):
        super().__init__(message)
        self.resume_command = resume_command
        self.flagged = flagged


class ServiceError(BibmapError):
    """HTTP service failure surfaced to the caller (port busy, lock held)."""
