"""Exception types shared across modules."""


class ResourceError(RuntimeError):
    """A configured size cap (box entries, rows, rank) would be exceeded."""


class CertificationError(RuntimeError):
    """A computed certificate failed its check."""


class ConvergenceError(RuntimeError):
    """The iteration stopped contracting; the partial trace is attached."""

    def __init__(self, msg, trace=None):
        super().__init__(msg)
        self.trace = trace
