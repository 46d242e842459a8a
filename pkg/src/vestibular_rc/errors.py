"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """A configuration value is out of range or internally inconsistent."""


class InvalidInputError(ValueError):
    """An array argument has the wrong shape or contains non-finite entries."""


class SingularityError(ValueError):
    """A vector field was evaluated where a denominator (nearly) vanishes."""


class DivergenceError(RuntimeError):
    """An integration left the finite region.

    Attributes
    ----------
    step_index : int or None
        Index of the first step (or input sample) at which the state
        became non-finite.
    """

    def __init__(self, message, step_index=None):
        super().__init__(message)
        self.step_index = step_index


class DegenerateChannelError(ValueError):
    """A data channel is constant where variation is required."""


class InsufficientDataError(ValueError):
    """A series is too short for the requested analysis."""


class GridMismatchError(ValueError):
    """Two histograms were built on incompatible grids."""


class SearchFailureError(RuntimeError):
    """Every configuration tried by a hyperparameter search failed.

    Attributes
    ----------
    tried : list
        The configurations that were evaluated before giving up.
    """

    def __init__(self, message, tried=None):
        super().__init__(message)
        self.tried = list(tried) if tried is not None else []
