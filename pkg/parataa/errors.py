"""Error handling"""


class ParaTAAError(Exception):
    def __init__(self, message, line=None, column=None):
        self.message = message
        self.line = line
        self.column = column
        super().__init__(self.format())

    def format(self):
        if self.line:
            return f"Error at line {self.line}, column {self.column}: {self.message}"
        return f"Error: {self.message}"


class ScheduleError(ParaTAAError):
    pass


class ShapeError(ParaTAAError):
    pass


class ScoreEvaluationError(ParaTAAError):
    def __init__(self, message, index):
        self.index = index
        super().__init__(f"point {index}: {message}")


class InternalStateError(ParaTAAError):
    pass


class RankDeficiencyError(ParaTAAError):
    def __init__(self, message, iteration):
        self.iteration = iteration
        super().__init__(f"iteration {iteration}: {message}")


class SolverConfigError(ParaTAAError):
    pass


class IncompatibleTrajectoryError(ParaTAAError):
    pass


class EarlyStopError(ParaTAAError):
    pass


class TrajectoryFileError(ParaTAAError):
    def __init__(self, message, field):
        self.field = field
        super().__init__(f"{field}: {message}")


class ConfigError(ParaTAAError):
    pass


class ConfigSyntaxError(ConfigError):
    pass


class ConfigValidationError(ConfigError):
    """Every problem found in one config file; the first one locates the diagnostic."""

    def __init__(self, problems):
        self.problems = list(problems)
        first = self.problems[0]
        more = len(self.problems) - 1
        suffix = f" (and {more} more)" if more else ""
        super().__init__(first.message + suffix, first.line, first.column)
