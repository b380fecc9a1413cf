"""Typed errors raised across the toolkit.

Every failure mode a caller may want to catch gets its own class; all of
them derive from ToolkitError so CLI code can report uniformly.
"""


class ToolkitError(Exception):
    pass


# --- ingest -----------------------------------------------------------------

class MissingHeader(ToolkitError):
    pass


class MalformedLine(ToolkitError):
    def __init__(self, line_no, reason=""):
        self.line_no = line_no
        msg = f"line {line_no}: malformed"
        if reason:
            msg += f" ({reason})"
        super().__init__(msg)


class NonMonotonicTimestamp(ToolkitError):
    def __init__(self, line_no):
        self.line_no = line_no
        super().__init__(f"line {line_no}: timestamp decreases")


class InvalidBox(ToolkitError):
    def __init__(self, line_no):
        self.line_no = line_no
        super().__init__(f"line {line_no}: box has non-positive extent")


class SlideMismatch(ToolkitError):
    pass


class EmptySession(ToolkitError):
    pass


class UnknownGrade(ToolkitError):
    def __init__(self, value):
        self.value = value
        super().__init__(f"unknown grade {value!r}")


class DegeneratePolygon(ToolkitError):
    pass


# --- grids / heatmaps -------------------------------------------------------

class EmptyInput(ToolkitError):
    pass


class DimensionMismatch(ToolkitError):
    pass


# --- scanpath alignment -----------------------------------------------------

class EmptyString(ToolkitError):
    pass


class NeedTwoObservers(ToolkitError):
    pass


# --- metrics ----------------------------------------------------------------

class ConstantInput(ToolkitError):
    pass


class InsufficientData(ToolkitError):
    pass


class ZeroVariance(ToolkitError):
    pass


# --- prediction -------------------------------------------------------------

class OutOfRange(ToolkitError):
    pass


class MissingPrediction(ToolkitError):
    def __init__(self, px, py):
        self.px = px
        self.py = py
        super().__init__(f"no prediction for patch ({px}, {py})")


class DuplicatePatch(ToolkitError):
    def __init__(self, px, py):
        self.px = px
        self.py = py
        super().__init__(f"duplicate prediction for patch ({px}, {py})")


class BinOutOfRange(ToolkitError):
    pass


# --- rendering --------------------------------------------------------------

class AspectMismatch(ToolkitError):
    pass
