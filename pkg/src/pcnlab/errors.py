"""Exception types shared across the package."""


class ContractViolation(ValueError):
    """A caller broke an operation's precondition (malformed path, bad trace...)."""


class SizeLimitError(ValueError):
    """An enumeration or LP would exceed its explicit size cap."""


class InvalidTraceError(ValueError):
    """A path trace is consistent with no available path."""


class SnapshotParseError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line
