"""Exception types shared by all modules."""


class DomainError(ValueError):
    """An argument lies outside the domain where the operation is defined."""


class PreconditionError(ValueError):
    """Inputs are individually valid but inconsistent with each other."""


class CausalityError(RuntimeError):
    """A delayed value was requested beyond the computed frontier."""


class InvariantViolation(RuntimeError):
    """A numerical invariant that the theory guarantees did not hold.

    ``tag`` names the property that failed so batch drivers can report it.
    """

    def __init__(self, message, tag=None):
        super().__init__(message)
        self.tag = tag

    def __str__(self):
        base = super().__str__()
        return f"[{self.tag}] {base}" if self.tag else base
