"""Exception hierarchy shared across the engine."""


class CasteletError(Exception):
    """Base class for all engine errors."""


class ContractError(CasteletError):
    """A caller violated a documented precondition (mismatched skeletons, bad counts)."""


class ConfigurationError(CasteletError):
    """Bad static configuration (unknown rotation order, unknown effect target)."""


class BvhParseError(CasteletError):
    """BVH text could not be parsed; carries the offending 1-based line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class StreamProtocolError(CasteletError):
    """Mocap wire handshake or framing violation."""


class BindingError(CasteletError):
    """A retarget map references a joint that does not exist."""


class SplitError(CasteletError):
    """Take cut points out of range or segments too short."""


class ChainError(CasteletError):
    """Clip chain references do not resolve."""


class ShowLoadError(CasteletError):
    """Show bundle failed validation; carries the full violation report."""

    def __init__(self, report):
        self.report = list(report)
        super().__init__("show bundle invalid:\n" + "\n".join(f"  - {r}" for r in self.report))


class EffectError(CasteletError):
    """A scene effect named an unknown target."""
