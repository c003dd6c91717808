"""Exception types shared across the library.

The CLI maps these onto its exit-code contract (2 for usage/validation
problems, 1 for verification failures).
"""


class FollmerLabError(Exception):
    """Base class for library errors."""


class TreeValidationError(FollmerLabError):
    """A tree file or tree structure violates the filtered-tree invariants."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class EnumerationCapError(FollmerLabError):
    """Stopping-time enumeration would exceed the configured cap."""

    def __init__(self, count, cap):
        super().__init__(
            f"refusing to enumerate {count} stopping times (cap is {cap}); "
            f"raise the cap explicitly if this is intended"
        )
        self.count = count
        self.cap = cap


class NotSupermartingaleError(FollmerLabError):
    """An operation requiring a supermartingale got something else."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class FreezeTargetError(FollmerLabError):
    """The freeze-state target collides with a charged path of the tree."""

    def __init__(self, message, path=None):
        super().__init__(message)
        self.path = path


class GridError(FollmerLabError):
    """A time grid is degenerate or too coarse for the requested window."""


class MartingaleWitnessError(FollmerLabError):
    """A non-uniqueness witness was requested for a martingale (no lost mass)."""
