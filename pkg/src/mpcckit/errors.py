"""Exception types shared across the solver suite."""


class MpccError(Exception):
    """Base class for all solver errors."""


class BoundsError(MpccError):
    """Inconsistent variable or constraint bounds (lower > upper)."""

    def __init__(self, kind, index, lower, upper):
        self.kind = kind
        self.index = index
        self.lower = lower
        self.upper = upper
        super().__init__(
            f"inconsistent {kind} bounds at index {index}: "
            f"lower={lower!r} > upper={upper!r}"
        )


class ComplementarityInfeasible(MpccError):
    """A point violates complementarity beyond the requested tolerance."""

    def __init__(self, index, residual):
        self.index = index
        self.residual = residual
        super().__init__(
            f"pair {index} has both components above tolerance "
            f"(product residual {residual:.3e})"
        )


class AssemblyError(MpccError):
    """KKT assembly attempted at a non-interior iterate."""

    def __init__(self, component, index, value):
        self.component = component
        self.index = index
        self.value = value
        super().__init__(
            f"iterate not strictly interior: {component}[{index}] = {value!r}"
        )


class EvaluatorError(MpccError):
    """A user callback failed or returned malformed data."""


class OptionError(MpccError):
    """Unknown option key or invalid option value."""


class ParseError(MpccError):
    """Problem file does not match the documented schema."""

    def __init__(self, message, location=""):
        self.location = location
        super().__init__(f"{message}" + (f" (at {location})" if location else ""))


class EnumerationCapExceeded(MpccError):
    """Biactive set too large for exhaustive branch enumeration."""

    def __init__(self, size, cap):
        self.size = size
        self.cap = cap
        super().__init__(
            f"biactive set of size {size} exceeds enumeration cap {cap}; "
            "use the relaxation-based LPCC path"
        )
