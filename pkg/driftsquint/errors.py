"""Exception hierarchy shared by every driftsquint module."""


class DriftSquintError(Exception):
    pass


class LossRangeError(DriftSquintError, ValueError):
    pass


class DimensionError(DriftSquintError, ValueError):
    pass


class DistributionError(DriftSquintError, ValueError):
    pass


class IntervalError(DriftSquintError, ValueError):
    pass


class RouteMismatchError(DriftSquintError, ArithmeticError):
    pass


class ConfigError(DriftSquintError, ValueError):
    def __init__(self, message, path=None, line=None, key=None):
        self.path = path
        self.line = line
        self.key = key
        self.reason = message
        if path is not None:
            message = "{0}:{1}: {2}".format(path, line or 0, message)
        super().__init__(message)


class RunError(DriftSquintError):
    def __init__(self, t, error):
        self.round = t
        super().__init__("round {0}: {1}".format(t, error))
