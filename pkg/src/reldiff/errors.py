"""Exception hierarchy; ``exit_code`` maps onto the CLI exit status."""


class ReldiffError(Exception):
    exit_code = 2


class ConfigError(ReldiffError):
    exit_code = 1


class DomainError(ReldiffError):
    """Input outside the domain of an operation (spacelike momentum, bad bath)."""

    exit_code = 2


class FrameError(DomainError):
    pass


class OffShellError(DomainError):
    pass


class InvalidBathError(DomainError):
    pass


class InvariantError(DomainError):
    """A constructed object failed one of its own consistency checks."""

    def __init__(self, check, detail=""):
        self.check = check
        super().__init__(f"invariant '{check}' violated{': ' + detail if detail else ''}")


class SamplerError(DomainError):
    pass


class ConvergenceError(ReldiffError):
    exit_code = 3

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = history if history is not None else []


class InconsistencyError(ConvergenceError):
    pass
