"""Exception hierarchy shared by every module."""


class StatFrobError(ValueError):
    pass


class DimensionMismatch(StatFrobError):
    pass


class RankDeficient(StatFrobError):
    pass


class NonFinite(StatFrobError):
    pass


class SingularMetric(StatFrobError):
    pass


class OrderOutOfRange(StatFrobError):
    pass


class NewtonDivergence(StatFrobError):
    pass


class GridMismatch(StatFrobError):
    pass


class TargetOutsideSimplexInterior(StatFrobError):
    pass


class InvalidProbability(StatFrobError):
    pass


class ParseError(StatFrobError):
    """Malformed spec file; ``line``/``column`` locate the problem when known."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{where}")


class ValidationError(StatFrobError):
    """Spec parsed but is inconsistent; ``key`` names the offending field."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")
