"""Exception types shared across the package."""


class HqplabError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(HqplabError):
    """Array shapes are inconsistent with the declared problem dimensions."""


class NonSymmetric(HqplabError):
    """Objective matrix is asymmetric beyond tolerance."""


class NotPsd(HqplabError):
    """Matrix required to be positive semidefinite is not."""


class LevelInfeasible(HqplabError):
    """A cascade level admits no feasible point.

    Carries the 1-based index of the first infeasible level.
    """

    def __init__(self, level, message=""):
        self.level = level
        super().__init__(message or f"level {level} infeasible")


class SlackInactive(HqplabError):
    """Slack block requested on a layout built without slack."""


class InconsistentLimits(HqplabError):
    """Velocity interval from position/velocity/acceleration limits is empty."""


class DegenerateGrid(HqplabError):
    """Score grid does not determine a quadratic surface."""


class WrongFrame(HqplabError):
    """Map supplied in the wrong reference frame."""


class MissingClass(HqplabError):
    """Map registry lacks a required stature class."""


class SingleClass(HqplabError):
    """Training data contains only one label."""


class NonPositiveC(HqplabError):
    """SVM trade-off parameter must be positive."""


class ToolBeforeDelivery(HqplabError):
    """PickTool event arrived before any object was delivered."""


class EventOutOfRange(HqplabError):
    """Scenario event timestamped outside the simulated horizon."""


class CascadeInfeasible(HqplabError):
    """Cascade became infeasible during simulation; carries the abort time."""

    def __init__(self, t, level, message=""):
        self.t = t
        self.level = level
        super().__init__(message or f"cascade infeasible at t={t:.6f}s (level {level})")
