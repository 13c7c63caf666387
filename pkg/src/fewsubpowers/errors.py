"""Exception hierarchy shared by all modules."""


class FewSubpowersError(Exception):
    """Base class for every error raised by this package."""


class PreconditionError(FewSubpowersError, ValueError):
    """An operation was called on input violating its contract."""


class MalformedTermError(PreconditionError):
    pass


class SignatureMismatchError(PreconditionError):
    pass


class DegenerateAlgebraError(PreconditionError):
    """Raised for questions that have no answer on a one-element algebra."""


class ResourceLimitError(FewSubpowersError):
    """A configured size or search cap was exceeded."""


class NotApplicableError(FewSubpowersError):
    """The template has no edge polymorphism within the searched bound."""


class InvariantError(FewSubpowersError, AssertionError):
    """An internal invariant failed; indicates a bug or a false assumption."""
