"""Exception types shared across the package."""


class QudotnError(Exception):
    """Base class for all package errors."""

    code = "error"


class InvalidAssignmentError(QudotnError):
    """An assignment does not match the problem dimensions or value range."""

    code = "invalid-assignment"


class NotAChainError(QudotnError):
    """The problem bandwidth exceeds the requested neighbor count."""

    code = "not-a-chain"

    def __init__(self, pair, k):
        self.pair = tuple(pair)
        self.k = k
        super().__init__(
            f"coefficient at {self.pair} has distance "
            f"{self.pair[1] - self.pair[0]} > k={k}"
        )


class CapacityError(QudotnError):
    """The requested computation exceeds a configured size cap."""

    code = "capacity"


class NumericFaultError(QudotnError):
    """Normalization hit an all-zero or non-finite vector."""

    code = "numeric-fault"


class InstanceFormatError(QudotnError):
    """An instance document is malformed."""

    code = "instance-format"
