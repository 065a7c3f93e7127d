"""
Exceptions raised by bmposterior.

Every error derives from `BMPosteriorException`. The concrete classes also
derive from the closest builtin so callers can catch e.g. ``ValueError``.
"""


class BMPosteriorException(Exception):
    pass


class InvalidConfiguration(BMPosteriorException, ValueError):
    pass


class InvalidModel(BMPosteriorException, ValueError):
    pass


class InvalidState(BMPosteriorException, ValueError):
    pass


class LayoutMismatch(BMPosteriorException, ValueError):
    pass


class HiddenEntriesPresent(BMPosteriorException, ValueError):
    pass


class EnumerationCapExceeded(BMPosteriorException):
    pass


class NonFiniteValue(BMPosteriorException, ArithmeticError):
    pass


class InconsistentBeliefs(BMPosteriorException, ValueError):
    pass


class NegativeCoupling(BMPosteriorException, ValueError):
    pass


class EmptyInput(BMPosteriorException, ValueError):
    pass


class MalformedData(BMPosteriorException, ValueError):
    pass


__all__ = [
    'BMPosteriorException', 'InvalidConfiguration', 'InvalidModel', 'InvalidState', 'LayoutMismatch',
    'HiddenEntriesPresent', 'EnumerationCapExceeded', 'NonFiniteValue', 'InconsistentBeliefs',
    'NegativeCoupling', 'EmptyInput', 'MalformedData',
]
