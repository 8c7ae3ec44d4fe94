"""Exception types shared across the package."""


class ContractError(ValueError):
    """An argument violates a documented precondition (shape, range, kind)."""


class NumericFailure(ArithmeticError):
    """A numerical routine could not produce a trustworthy result."""


class DataFormatError(ValueError):
    """A dataset file or record is malformed or violates its invariants."""


class DescriptorError(DataFormatError):
    """A sequence could not be encoded as a descriptor.

    Carries the label of the offending sample so batch runners can skip
    and report it.
    """

    def __init__(self, message, label=None):
        super().__init__(message)
        self.label = label
