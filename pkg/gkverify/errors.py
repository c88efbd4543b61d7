"""Exception hierarchy shared by every gkverify module."""
from typing import Optional


class VerifyError(Exception):
    """Base class for every error raised by gkverify."""


class ExpressionSyntaxError(VerifyError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class UnknownIdentifierError(ExpressionSyntaxError):
    pass


class VariableIndexError(ExpressionSyntaxError):
    pass


class EvaluationDomainError(VerifyError):
    def __init__(self, message: str, node: Optional[str] = None):
        text = f"{message} in `{node}`" if node else message
        super().__init__(text)
        self.node = node


class TensorIndexError(VerifyError):
    pass


class DefinitionError(VerifyError):
    """A space or pair definition that cannot be loaded."""


class SingularMetricError(VerifyError):
    pass


class MappingError(VerifyError):
    pass


class GeodesicError(VerifyError):
    pass


class DimensionError(VerifyError):
    """A point or tensor whose dimension does not match the space."""


class ConfigError(VerifyError):
    """An unreadable or malformed YAML run configuration."""
