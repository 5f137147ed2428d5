"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: :class:`CapacityError` gives 4, every
other :class:`LabError` gives 3 and argument problems give 2.
"""


class LabError(Exception):
    """Base class for all errors raised by :mod:`carlemanlab`."""


class ContractError(LabError, ValueError):
    """An argument violates a documented precondition (shape, sign, range)."""


class DomainError(ContractError):
    """A parameter lies outside the domain where a formula is defined."""


class GeometryError(ContractError):
    """Norms and separation that cannot form a triangle."""


class UndefinedEncodingError(ContractError):
    """Amplitude encoding or overlap requested for a zero vector."""


class SingularityError(LabError, ZeroDivisionError):
    """Evaluation hit a pole of a closed-form expression."""


class CapacityError(LabError):
    """A requested object would exceed the configured size cap."""


class NumericalError(LabError):
    """A numerical routine failed to converge."""


class NonDissipativeError(NumericalError):
    """The linear part has an eigenvalue with non-negative real part."""


class StiffnessError(NumericalError):
    """The adaptive integrator's step size underflowed."""


class DivergenceError(NumericalError):
    """A non-finite state appeared during integration.

    ``time`` is the first grid time with a non-finite state and ``partial``
    holds whatever was computed before that point (may be ``None``).
    """

    def __init__(self, message, time, partial=None):
        super().__init__(message)
        self.time = time
        self.partial = partial


class ParseError(LabError):
    """A system definition file could not be read.

    ``field`` names the offending JSON path, ``line`` is the 1-based line
    number when the failure is syntactic.
    """

    def __init__(self, message, *, field=None, line=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.field = field
        self.line = line
