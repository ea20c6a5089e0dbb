"""Exception hierarchy shared by all tracedyn modules."""


class TraceDynError(Exception):
    """Base class for all package errors."""


class ConfigurationError(TraceDynError, ValueError):
    """Inputs are inconsistent (shapes, gradings, generator counts, schema)."""


class TraceSyntaxError(ConfigurationError):
    """Malformed trace-polynomial text.  ``position`` is a 0-based column."""

    def __init__(self, message, text="", position=0):
        self.text = text
        self.position = position
        caret = ""
        if text:
            caret = f"\n  {text}\n  {' ' * position}^"
        super().__init__(f"{message} (at column {position}){caret}")


class NumericalError(TraceDynError, RuntimeError):
    """Integration or sampling produced non-finite or otherwise unusable numbers."""


class HorizonError(NumericalError):
    """A TOV integration reached 2m >= r."""


class InvariantViolation(TraceDynError, AssertionError):
    """A checked invariant failed beyond its tolerance."""
