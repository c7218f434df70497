"""Exceptions raised by thermoqc.

Lookups fail with a `KeyError`, bad input with a `ValueError` and failed
numerics with a `RuntimeError`, so callers can catch either the builtin or
the specific class.
"""


class ThermoQCError(Exception):
    pass


class InvalidDimensionError(ThermoQCError, ValueError):
    pass


class InvalidModelError(ThermoQCError, ValueError):
    pass


class InvalidBathError(ThermoQCError, ValueError):
    pass


class InvalidGridError(ThermoQCError, ValueError):
    pass


class InvalidStateError(ThermoQCError, ValueError):
    pass


class ContractError(ThermoQCError, ValueError):
    pass


class LogDomainError(ThermoQCError, ValueError):
    pass


class PropagationError(ThermoQCError, RuntimeError):
    def __init__(self, error, **diagnostics):
        super().__init__(error)
        self.error = error
        self.diagnostics = diagnostics

    def __str__(self):
        if not self.diagnostics:
            return self.error
        details = ', '.join(f'{k}={v}' for k, v in self.diagnostics.items())
        return f'{self.error} ({details})'


class OracleError(ThermoQCError, RuntimeError):
    pass


class UndersampledGridError(ThermoQCError, RuntimeError):
    def __init__(self, error, index, increment):
        super().__init__(error)
        self.error = error
        self.index = index
        self.increment = increment


class AttractorMultiplicityError(ThermoQCError, RuntimeError):
    def __init__(self, error, dimension, eigenvalues):
        super().__init__(error)
        self.error = error
        self.dimension = dimension
        self.eigenvalues = eigenvalues


class DissipatorError(ThermoQCError, RuntimeError):
    pass


class ConfigError(ThermoQCError, ValueError):
    def __init__(self, error, field=None, line=None):
        super().__init__(error)
        self.error = error
        self.field = field
        self.line = line

    def __str__(self):
        where = []
        if self.line is not None:
            where.append(f'line {self.line}')
        if self.field is not None:
            where.append(f'field {self.field!r}')
        return f'{self.error} ({", ".join(where)})' if where else self.error


class UnknownProbeError(ThermoQCError, KeyError):
    pass


class UnknownComponentError(ThermoQCError, KeyError):
    pass


class UnknownSystemError(ThermoQCError, KeyError):
    pass


class EnsembleError(ThermoQCError, RuntimeError):
    def __init__(self, error, eid, cid, component, other=None):
        super().__init__(error)
        self.error = error
        self.eid = eid
        self.cid = cid
        self.component = component
        self.other = other
