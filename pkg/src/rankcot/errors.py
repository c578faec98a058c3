"""Exception types shared across the package."""


class RankCotError(Exception):
    """Base class for all library errors."""


class InvalidArgumentError(RankCotError, ValueError):
    pass


class ResourceError(RankCotError, RuntimeError):
    """A table or search would exceed its configured budget."""

    def __init__(self, message, required=None, budget=None):
        super().__init__(message)
        self.required = required
        self.budget = budget


class MalformedTreeError(RankCotError, ValueError):
    """A tree is missing a child for an answer that some input reaches."""


class UnsupportedDomainError(RankCotError, ValueError):
    pass


class AmbiguousOutputError(RankCotError, ValueError):
    """The output map (or an order construction) hit an unresolved tie."""


class ProtocolFault(RankCotError, RuntimeError):
    """A protocol message had the wrong length."""
