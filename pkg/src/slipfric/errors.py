"""Exception hierarchy shared by all slipfric modules."""


class SlipFricError(Exception):
    """Base class for every error raised by the package."""


class InputDomainError(SlipFricError, ValueError):
    """An argument lies outside the domain of a formula."""


class UndefinedSlipError(SlipFricError, ValueError):
    """Slip ratio or slip angle is undefined (vehicle at rest or reversing)."""


class OrderingError(SlipFricError, ValueError):
    """A stream is not strictly time-ordered."""


class ParseError(SlipFricError, ValueError):
    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class AlignmentError(SlipFricError, ValueError):
    pass


class CalibrationError(SlipFricError, ValueError):
    pass


class FoldError(SlipFricError, ValueError):
    pass


class LabelingError(SlipFricError, ValueError):
    def __init__(self, message: str, stream_id: str | None = None):
        self.stream_id = stream_id
        super().__init__(message)


class ConfigError(SlipFricError, ValueError):
    pass
