"""Exception hierarchy shared by the library and the CLI."""


class LinkStreamError(Exception):
    """Base class for all errors raised by this package."""


class InputError(LinkStreamError, ValueError):
    """Malformed or inconsistent input data.

    ``line`` is the 1-based line number in the source file when known.
    """

    def __init__(self, message, *, line=None, source=None):
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where += f"{source}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)
        self.message = message


class MissingMembershipError(InputError):
    """A node has no group under the requested grouping scheme."""

    def __init__(self, node, scheme):
        self.node = node
        self.scheme = scheme
        super().__init__(f"node {node!r} has no membership under scheme {scheme!r}")


class InvariantViolation(LinkStreamError, AssertionError):
    """An internal consistency check failed (a bug, not bad input)."""
