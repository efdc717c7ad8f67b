"""Exception types shared across the package."""


class VisearchError(Exception):
    """Base class for all errors raised by this package."""


class InputError(VisearchError, ValueError):
    """Malformed or inconsistent caller input."""


class DimensionError(InputError):
    """Vector or fingerprint dimensions do not line up."""


class NotFoundError(VisearchError, KeyError):
    """A referenced signature, object, or record does not exist."""

    def __str__(self) -> str:  # KeyError quotes its args; keep plain messages
        return Exception.__str__(self)


class PreconditionError(VisearchError):
    """A required prior stage has not completed."""


class IntegrityError(VisearchError):
    """Stored data failed a checksum or ordering check."""


class RunLockError(VisearchError):
    """Another pipeline run currently holds the data directory lock."""
