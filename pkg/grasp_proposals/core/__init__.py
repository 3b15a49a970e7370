"""Core planning modules."""

from grasp_proposals.core.exceptions import *  # noqa: F403
from grasp_proposals.core.geometry import (
    OrientedBoundingBox,
    PointCloud,
    Pose,
    SourceTag,
    compose,
    fit_obb,
    inverse,
    quaternion_distance,
    transform_cloud,
)
from grasp_proposals.core.models import (
    CollisionProbe,
    CostTerms,
    GraspCandidate,
    GraspStatus,
    GripperSpec,
    PlannerConfig,
    SamplingParams,
    SceneModel,
    ScoreWeights,
)
from grasp_proposals.core.planner import (
    PlanResult,
    check_approach_collision,
    check_pose_collision,
    check_width,
    plan,
    sample_candidates,
    score_candidate,
)
from grasp_proposals.core.reachability import (
    ArmModel,
    ReachabilityMap,
    WorkspaceBounds,
    align_base,
    build_reachability_map,
    is_reachable,
)
from grasp_proposals.core.registration import (
    RegistrationParams,
    RegistrationResult,
    complete_cloud,
    icp_register,
    register_with_sweep,
)
from grasp_proposals.core.spatial_index import KdTree
from grasp_proposals.core.supervisor import (
    GraspAttemptRecord,
    GraspOutcome,
    GraspSupervisor,
    NextAction,
    SupervisorPolicy,
    classify_outcome,
    next_action,
)

__all__ = [
    # Geometry
    "OrientedBoundingBox",
    "PointCloud",
    "Pose",
    "SourceTag",
    "compose",
    "fit_obb",
    "inverse",
    "quaternion_distance",
    "transform_cloud",
    # Spatial index and registration
    "KdTree",
    "RegistrationParams",
    "RegistrationResult",
    "complete_cloud",
    "icp_register",
    "register_with_sweep",
    # Reachability
    "ArmModel",
    "ReachabilityMap",
    "WorkspaceBounds",
    "align_base",
    "build_reachability_map",
    "is_reachable",
    # Planner
    "CollisionProbe",
    "CostTerms",
    "GraspCandidate",
    "GraspStatus",
    "GripperSpec",
    "PlanResult",
    "PlannerConfig",
    "SamplingParams",
    "SceneModel",
    "ScoreWeights",
    "check_approach_collision",
    "check_pose_collision",
    "check_width",
    "plan",
    "sample_candidates",
    "score_candidate",
    # Supervisor
    "GraspAttemptRecord",
    "GraspOutcome",
    "GraspSupervisor",
    "NextAction",
    "SupervisorPolicy",
    "classify_outcome",
    "next_action",
]
