"""Exception hierarchy shared by the planning pipeline, file formats and the CLI."""

from __future__ import annotations

from typing import TYPE_CHECKING, Any

if TYPE_CHECKING:
    from grasp_proposals.core.planner import PlanResult


class GraspPlanningError(Exception):
    """Base class for every error raised by grasp_proposals."""


class EmptyCloudError(GraspPlanningError, ValueError):
    """An operation received a point cloud without points."""


class TooFewPointsError(GraspPlanningError, ValueError):
    """Fewer points than the operation needs."""


class DegenerateCloudError(GraspPlanningError, ValueError):
    """Point covariance is rank deficient (collinear or coplanar input)."""


class NoCorrespondencesError(GraspPlanningError):
    """Registration found no model/scene pairs within the correspondence distance."""


class NotConvergedError(GraspPlanningError):
    """A registration result was used although it did not converge."""


class InvalidResolutionError(GraspPlanningError, ValueError):
    """Reachability voxel size must be strictly positive."""


class NoValidBasePoseError(GraspPlanningError):
    """Every base candidate collides with the environment or cannot reach the object."""


class DegenerateStandoffError(GraspPlanningError, ValueError):
    """The sampling sphere does not clear the object bounding box."""


class NotFeasibleError(GraspPlanningError):
    """Only feasible candidates can be scored."""


class NoFeasibleGraspError(GraspPlanningError):
    """All grasp candidates were rejected.

    The partially evaluated plan is attached so callers can still report every
    candidate with its rejection status.
    """

    def __init__(self, message: str, result: PlanResult | None = None):
        super().__init__(message)
        self.result = result


class OutOfRangeError(GraspPlanningError, ValueError):
    """Encoder or expected width outside the gripper range."""


class EmptyHistoryError(GraspPlanningError, ValueError):
    """The supervisor needs at least one grasp attempt."""


class UnclassifiedAttemptError(GraspPlanningError, ValueError):
    """The last grasp attempt has not been classified yet."""


class InvalidRecipeError(GraspPlanningError, ValueError):
    """A scene recipe violates its physical constraints."""


class MalformedFileError(GraspPlanningError):
    """A point-cloud file could not be parsed."""

    def __init__(self, message: str, path: Any = None, line: int | None = None, offset: int | None = None):
        location = ""
        if line is not None:
            location = f" (line {line})"
        elif offset is not None:
            location = f" (offset {offset})"
        prefix = f"{path}: " if path is not None else ""
        super().__init__(f"{prefix}{message}{location}")
        self.path = path
        self.line = line
        self.offset = offset


class EmptyAfterFilteringError(GraspPlanningError):
    """Every point of a file was dropped as non-finite."""


class SceneFileError(GraspPlanningError):
    """Scene, recipe or config document failed schema validation."""


class ReachabilityMapFormatError(GraspPlanningError):
    """Reachability map file has a wrong magic, version or size."""
