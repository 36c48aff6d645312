"""Exception and warning types raised across the package."""


class HeadRCError(Exception):
    """Base class for all errors raised by headrc."""


class DomainError(HeadRCError, ValueError):
    """An input lies outside the mathematical domain of an operation."""


class TableParseError(HeadRCError, ValueError):
    """A dispersion table file could not be parsed.

    The message always carries ``<path>:<line>`` context.
    """

    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = line
        super().__init__(f"{self.path}:{line}: {message}")


class SingularConfigurationError(HeadRCError, ArithmeticError):
    """A spherical-harmonics term has a (numerically) vanishing denominator."""


class SingularNetworkError(HeadRCError, ArithmeticError):
    """The nodal admittance matrix of a circuit cannot be inverted."""


class ParameterDomainError(HeadRCError, ValueError):
    """Fitted parameters were evaluated outside their validity range."""


class DegenerateDesignError(HeadRCError, ValueError):
    """A polynomial regression has too few distinct abscissae."""


class ConfigError(HeadRCError, ValueError):
    """A run configuration is malformed or references missing files."""


class TableRangeWarning(UserWarning):
    """A dispersion table was evaluated outside its frequency range and clamped."""


class SeriesTruncationWarning(UserWarning):
    """The spherical-harmonics series hit its term cap before converging."""


class NonConvergenceWarning(UserWarning):
    """A local optimizer stopped on its iteration budget."""
