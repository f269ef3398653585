"""Exception types shared across the package."""
from __future__ import annotations


class MaccError(Exception):
    """Base class for all library errors."""


class ValidationError(MaccError, ValueError):
    """Malformed input (bad connectivity, profile, config...)."""


class IndivisibleFileSize(ValidationError):
    def __init__(self, bits: int, parts: int, suggested: int):
        self.bits = bits
        self.parts = parts
        self.suggested = suggested
        super().__init__(
            f"file size {bits} bits cannot be split into {parts} whole-byte subfiles; "
            f"smallest compatible size >= {bits} is {suggested} bits"
        )


class DemandIncomplete(ValidationError):
    pass


class TopologyMismatch(ValidationError):
    pass


class NonDistinctDemand(ValidationError):
    pass


class DivisibilityViolation(ValidationError):
    pass


class OutOfRange(ValidationError):
    pass


class TooLarge(MaccError):
    def __init__(self, what: str, size: int, cap: int):
        self.size = size
        self.cap = cap
        super().__init__(f"{what}: size {size} exceeds cap {cap}")


class UnknownVertex(MaccError, KeyError):
    pass


class CyclicSubset(MaccError):
    pass


class DecodeFailure(MaccError):
    """A user could not recover one of its missing subfiles."""

    def __init__(self, subfile):
        self.subfile = subfile
        super().__init__(f"cannot recover subfile {subfile}")
