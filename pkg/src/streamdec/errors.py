"""Exception types shared by all modules."""


class StreamdecError(ValueError):
    """Base class for contract violations raised by the library."""


class ParseError(StreamdecError):
    """A field file does not match the expected JSON layout."""
