"""Exception types shared by the engine and the command line."""


class DomainError(ValueError):
    """An input lies outside the mathematical domain of an operation."""


class ConfigError(ValueError):
    """A model, calendar or run configuration is malformed or inconsistent."""


class IntegrabilityError(ArithmeticError):
    """A jump integral or conditional expectation is not finite."""


class NumericalError(ArithmeticError):
    """Two numerical routes disagree beyond tolerance, or a solver failed."""


class UnsupportedLawError(NotImplementedError):
    """A jump law outside the supported finite-activity classes was supplied."""
