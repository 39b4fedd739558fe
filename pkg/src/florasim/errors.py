"""Exception hierarchy shared by all florasim modules."""


class FlorasimError(Exception):
    """Base class for every error raised by the package."""


# -- scaffold graph -----------------------------------------------------------

class ScaffoldError(FlorasimError):
    def __init__(self, message, ids=()):
        super().__init__(message)
        self.ids = tuple(ids)


class DisconnectedGraph(ScaffoldError):
    pass


class MissingRoot(ScaffoldError):
    pass


class BadFilamentCount(ScaffoldError):
    pass


class CycleWithoutFusionMark(ScaffoldError):
    pass


class BadSegment(ScaffoldError):
    """Unknown endpoint, zero length, inconsistent length or wrong orientation."""


class EmptyGraph(ScaffoldError):
    pass


# -- vmc ----------------------------------------------------------------------

class MissingLeafScore(FlorasimError):
    def __init__(self, node_id):
        super().__init__(f"no success score for leaf {node_id!r}")
        self.node_id = node_id


class InsufficientFilaments(FlorasimError):
    pass


# -- braiding machine ---------------------------------------------------------

class LayoutError(FlorasimError):
    pass


class DanglingSwitch(LayoutError):
    pass


class OpenRing(LayoutError):
    pass


class OverlappingModules(LayoutError):
    pass


class ProgramLayoutMismatch(FlorasimError):
    pass


class UnroutableSplit(FlorasimError):
    pass


class InvalidSchedule(FlorasimError):
    def __init__(self, report):
        super().__init__(f"schedule has {len(report.violations)} violation(s)")
        self.report = report


class ScheduleFormatError(FlorasimError):
    def __init__(self, line_number, message):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


# -- plant / nodes ------------------------------------------------------------

class NoOptions(FlorasimError):
    pass


class NoValidSamples(FlorasimError):
    pass


# -- configuration and run logs -----------------------------------------------

class ConfigError(FlorasimError):
    """Invalid scenario configuration; ``path`` locates the offending field."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class ConfigSyntaxError(ConfigError):
    def __init__(self, line, column, message):
        super().__init__("", f"syntax error at line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class SchemaError(ConfigError):
    pass


class ConfigReferenceError(ConfigError):
    pass


class MalformedLine(FlorasimError):
    def __init__(self, line_number, message="malformed log line"):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class SimulationError(FlorasimError):
    """A component failed during a run; carries the tick number."""

    def __init__(self, tick, cause):
        super().__init__(f"tick {tick}: {cause}")
        self.tick = tick
        self.cause = cause
