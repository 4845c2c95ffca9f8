"""Exception types shared across the package.

The CLI maps these onto exit codes: parameter/usage problems -> 1,
data/dimension/protocol problems -> 2, resource budgets -> 3.
"""


class GGFError(Exception):
    """Base class for all package-specific errors."""


class ParameterError(GGFError, ValueError):
    """A parameter value is outside its documented domain (bad preset name, s <= 0, ...)."""


class DimensionError(GGFError, ValueError):
    """Matrix/vector shapes do not line up for the requested operation."""


class DomainError(GGFError, ValueError):
    """Input data violates a value-domain requirement (negative entries, non-finite values)."""


class DataFormatError(GGFError, ValueError):
    """A dataset or snapshot file is malformed; carries file/line context in the message."""


class ProtocolError(GGFError, ValueError):
    """The evaluation protocol cannot be honored (empty split, masked positive, ...)."""


class ResourceError(GGFError, RuntimeError):
    """A configured size/memory budget was exceeded."""
