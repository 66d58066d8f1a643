class MalformedRow(ValueError):
    """A CSV row that cannot be read as `time,event,group`"""

    def __init__(self, row, message="malformed row"):
        self.row = row
        super().__init__(f"Row {row}: {message}")


class NonPositiveTime(MalformedRow):
    def __init__(self, row, value=None):
        super().__init__(row, f"time must be positive, got {value}")


class InvalidEvent(MalformedRow):
    def __init__(self, row, value=None):
        super().__init__(row, f"event must be 0 or 1, got {value}")


class InvalidGroup(MalformedRow):
    def __init__(self, row, value=None):
        super().__init__(row, f"group must be 0 or 1, got {value}")


class EmptyFile(ValueError):
    pass


class EmptyStratum(ValueError):
    pass


class EmptyRiskSet(ValueError):
    pass


class NoInformativeFailures(ValueError):
    """Every failure happens while only one group is at risk"""


class SegmentTooSmall(ValueError):
    pass


class DegenerateShape(ValueError):
    """The shape b(t) vanishes on every informative failure"""


class UndefinedRatio(ValueError):
    """Slope before the changepoint is zero, so the slope ratio is undefined"""


class InvalidSpec(ValueError):
    pass
