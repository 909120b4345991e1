"""Exception types shared across the library."""


class ShapeError(ValueError):
    """Array shape or size violates an operation's contract."""


class FormatError(ValueError):
    """On-disk file does not match the supported format subset."""


class GraphError(ValueError):
    """Layer graph is malformed or inconsistent with its weights."""


class AllNanWindowError(RuntimeError):
    """A substitution was asked to fill a window with no non-NaN values.

    Callers are expected to have skipped such windows; reaching this is an
    internal contract violation, not a user input error.
    """
