"""Exception types shared across the toolkit."""


class CohortError(Exception):
    """Base class for all toolkit errors."""


class ParseError(CohortError):
    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class SchemaError(CohortError):
    pass


class IntegrityError(CohortError):
    pass


class ConfigError(CohortError):
    pass


class UnsupportedOperationError(CohortError):
    pass


class ColumnMismatchError(CohortError):
    def __init__(self, missing, extra=()):
        self.missing = list(missing)
        self.extra = list(extra)
        msg = f"missing feature columns: {', '.join(self.missing) or '-'}"
        if self.extra:
            msg += f"; unexpected columns: {', '.join(self.extra)}"
        super().__init__(msg)


class TrainingError(CohortError):
    pass


class RankDeficiencyError(CohortError):
    pass


class UndefinedScoreError(CohortError):
    pass


class UndefinedCorrelationError(CohortError):
    pass


class FormatVersionError(CohortError):
    pass


class StageError(CohortError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage, cause):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


class ExplanationError(CohortError):
    """Explaining one row failed; ``row`` and ``subject_id`` identify it."""

    def __init__(self, row, subject_id, cause):
        where = f"row {row}" + ("" if subject_id is None else f" ({subject_id})")
        super().__init__(f"{where}: {cause}")
        self.row = row
        self.subject_id = subject_id
        self.cause = cause
