"""Exception types shared across the library."""


class DomainError(ValueError):
    """Input outside the mathematical domain of a function."""


class SaturationError(DomainError):
    """Inversion target at or beyond the function's upper limit."""


class NormalizationError(ValueError):
    """Utility cannot be rescaled to take the value 1 at 1."""


class AssociationError(ValueError):
    """Associated distortion requires an unbounded loss utility."""


class ParameterError(ValueError):
    """Parameter outside its admissible range."""


class DivergenceError(RuntimeError):
    """An integral that must be finite was found to diverge."""


class EvaluationError(RuntimeError):
    """A numeric procedure could not produce a usable result."""


class ConstructionError(RuntimeError):
    """The explicit payoff construction cannot proceed."""


class LevelTooLowError(ConstructionError):
    """Kernel level not yet high enough; retry with a larger index."""


class InfeasibleError(RuntimeError):
    """No candidate satisfies the budget constraint."""


class ConfigError(ValueError):
    """Invalid or incomplete experiment configuration."""
