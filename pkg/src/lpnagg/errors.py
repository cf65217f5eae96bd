"""Exception types shared across the package."""


class LpnAggError(Exception):
    """Base class for all errors raised by :mod:`lpnagg`."""


class ParameterError(LpnAggError, ValueError):
    """A parameter lies outside its admissible range."""


class DimensionError(LpnAggError, ValueError):
    """Operands have incompatible shapes."""


class RangeError(LpnAggError, ValueError):
    """A value is not a canonical residue of the relevant modulus."""


class InfeasibleError(LpnAggError):
    """No admissible solution exists for the requested constraints."""

    def __init__(self, message, constraint=None):
        super().__init__(message)
        self.constraint = constraint


class ProtocolError(LpnAggError):
    """A protocol message or share set is inconsistent."""


class InsufficientSharesError(ProtocolError):
    pass


class DecodeError(LpnAggError, ValueError):
    """A byte string could not be parsed."""


class PkeError(LpnAggError):
    """PKE decryption failed (malformed envelope or wrong key)."""


class ConditioningError(LpnAggError, ValueError):
    """Conditioning on an event of probability zero."""


class SessionError(ProtocolError):
    """A protocol session failed; ``step`` is the failing protocol step (1-6)."""

    def __init__(self, step: int, message: str):
        super().__init__(f"step {step}: {message}")
        self.step = step
