"""Exception hierarchy.

Every error carries an ``exit_code`` so the command-line drivers can map
failures onto their documented process exit status.
"""


class GPEError(Exception):
    exit_code = 1
    category = "error"


class ConfigError(GPEError, ValueError):
    exit_code = 2
    category = "config"

    def __init__(self, message, line=None, key=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)
        self.line = line
        self.key = key


class GridMismatchError(GPEError, ValueError):
    """Fields (or a potential) defined on incompatible grids."""

    exit_code = 2
    category = "shape"


class DegenerateStateError(GPEError, ValueError):
    """The zero field, where a normalisable state is required."""

    exit_code = 3
    category = "numerical"


class ResolutionError(GPEError, ValueError):
    exit_code = 2
    category = "config"


class StabilityError(GPEError, ValueError):
    """Time step above the explicit RK4 stability limit."""

    exit_code = 2
    category = "config"


class DivergenceError(GPEError, FloatingPointError):
    exit_code = 3
    category = "numerical"

    def __init__(self, message, step=None, time=None, stage=None):
        super().__init__(message)
        self.step = step
        self.time = time
        self.stage = stage


class ConvergenceError(GPEError, RuntimeError):
    exit_code = 5
    category = "convergence"

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class FitError(GPEError, RuntimeError):
    exit_code = 5
    category = "fit"

    def __init__(self, message, series=None, residual=None):
        super().__init__(message)
        self.series = series
        self.residual = residual


class OutputError(GPEError, OSError):
    exit_code = 4
    category = "io"
