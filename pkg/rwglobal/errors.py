"""Exception hierarchy for rwglobal."""


class RWGlobalError(Exception):
    pass


class ConfigurationError(RWGlobalError, ValueError):
    """Incompatible dimensions, rings, orders or enumeration bounds."""


class TruncationError(ConfigurationError):
    """A requested order is not resolved by the truncation of the inputs."""


class NotInvertibleError(RWGlobalError, ArithmeticError):
    pass


class GeometryError(RWGlobalError):
    pass


class GraphError(RWGlobalError, ValueError):
    pass


class UnknownSignatureError(GraphError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "unknown vertex signature"


class ParseError(RWGlobalError):
    """
    Raised for malformed input files. `location` names the file and, where
    known, the offending entry.
    """
    def __init__(self, message, location=None):
        self.location = location
        if location:
            message = f"{location}: {message}"
        super().__init__(message)
