"""Exception types shared across the toolkit.

Each class carries the CLI exit code it maps to.
"""


class OptochaosError(Exception):
    exit_code = 1


class PreconditionError(OptochaosError, ValueError):
    """An input violates an operation's documented precondition."""

    exit_code = 2


class DivergenceError(OptochaosError, ArithmeticError):
    """The integrated state left the finite range."""

    exit_code = 3

    def __init__(self, t, component=None):
        self.t = float(t)
        self.component = component
        where = f" in {component}" if component else ""
        super().__init__(f"integration diverged{where} at t = {self.t:.6e} s")


class InsufficientDataError(OptochaosError):
    exit_code = 4
