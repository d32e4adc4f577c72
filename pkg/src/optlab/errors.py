"""Exception types shared across the package."""


class OptlabError(Exception):
    """Base class for all optlab-specific failures."""


class ShapeError(OptlabError, ValueError):
    """A vector or matrix does not match the dimensions the operation expects."""


class UnsupportedOracleError(OptlabError, ValueError):
    """The requested derivative oracle does not exist for this loss."""


class CurvatureError(OptlabError, ValueError):
    """A quasi-Newton curvature pair violates s.y > 0."""


class LineSearchError(OptlabError, RuntimeError):
    """No acceptable step length was found within the bracketing budget."""


class NegativeCurvatureError(OptlabError, RuntimeError):
    """CG hit a direction p with p.A.p <= 0; carries the iterate reached so far."""

    def __init__(self, iterate, direction, iterations):
        super().__init__("conjugate gradient detected non-positive curvature")
        self.iterate = iterate
        self.direction = direction
        self.iterations = iterations


class ConfigError(OptlabError, ValueError):
    """An experiment configuration is invalid; names the offending key."""

    def __init__(self, key, message):
        super().__init__(f"config key '{key}': {message}")
        self.key = key


class LibsvmParseError(OptlabError, ValueError):
    """A LIBSVM-format line could not be parsed; carries the 1-based line number."""

    def __init__(self, line_no, message):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no
