"""Exception hierarchy.

Every error raised by the library derives from :class:`LdrbmError`. The
``exit_code`` attribute is what the command line driver returns when the
error escapes a command: 2 for input/configuration problems, 3 for
numerical failures.
"""


class LdrbmError(Exception):
    exit_code = 3


class InputError(LdrbmError):
    exit_code = 2


class ParseError(InputError):
    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)


class SchemaError(InputError):
    """Missing or inconsistent boundary tags."""


TagError = SchemaError


class GeometryError(InputError):
    pass


class DimensionError(InputError):
    pass


class ConfigError(InputError):
    pass


class SingularityError(LdrbmError):
    pass


class SolverError(LdrbmError):
    def __init__(self, message, residual=None, iterations=None):
        self.residual = residual
        self.iterations = iterations
        super().__init__(message)


class DegeneracyError(LdrbmError):
    def __init__(self, message, nodes=()):
        self.nodes = tuple(int(n) for n in nodes)
        super().__init__(message)


class FiberError(DegeneracyError):
    pass


class TensorError(LdrbmError):
    pass


class DivergenceError(LdrbmError):
    def __init__(self, message, time=None):
        self.time = time
        super().__init__(message)


class MeasurementError(LdrbmError):
    pass


class FitError(LdrbmError):
    def __init__(self, message, trace=()):
        self.trace = list(trace)
        super().__init__(message)


class CoverageError(LdrbmError):
    def __init__(self, message, nodes=()):
        self.nodes = tuple(int(n) for n in nodes)
        super().__init__(message)
