"""Brute-force twins of the planner checks, used as test references."""

import itertools
import math

import numpy as np

from grasp_proposals.core.geometry import OrientedBoundingBox, Pose, PointCloud
from grasp_proposals.core.models import GraspCandidate, GripperSpec
from grasp_proposals.core.reachability import WorkspaceBounds


def _env_points(env_cloud: PointCloud | None) -> np.ndarray:
    return np.zeros((0, 3)) if env_cloud is None else env_cloud.points


def oracle_collision(pose: Pose, gripper: GripperSpec, env_cloud: PointCloud | None) -> bool:
    """Every probe against every environment point."""
    points = _env_points(env_cloud)
    if len(points) == 0:
        return False
    for probe in gripper.probes:
        center = pose.transform_points(np.asarray(probe.center))[0]
        if np.any(((points - center) ** 2).sum(axis=1) <= probe.radius**2):
            return True
    return False


def oracle_approach_collision(
    candidate: GraspCandidate, gripper: GripperSpec, env_cloud: PointCloud | None, step: float | None = None
) -> bool:
    """Collision anywhere on the approach; ``step`` re-samples the pre-grasp to grasp segment densely."""
    if step is None:
        return any(oracle_collision(pose, gripper, env_cloud) for pose in candidate.approach_path)
    start = np.asarray(candidate.pre_grasp_pose.position)
    end = np.asarray(candidate.grasp_pose.position)
    count = max(int(math.ceil(np.linalg.norm(end - start) / step)), 1)
    for t in np.linspace(0.0, 1.0, count + 1):
        pose = Pose(position=tuple(start + t * (end - start)), orientation=candidate.grasp_pose.orientation)
        if oracle_collision(pose, gripper, env_cloud):
            return True
    return False


def oracle_closing_extent(grasp_pose: Pose, obb: OrientedBoundingBox) -> float:
    axes = obb.axes
    corners = [
        np.asarray(obb.center) + sum(s * h * axes[:, k] for k, (s, h) in enumerate(zip(signs, obb.half_extents)))
        for signs in itertools.product((-1.0, 1.0), repeat=3)
    ]
    local = grasp_pose.inverse().transform_points(np.array(corners))
    return float(local[:, 1].max() - local[:, 1].min())


def oracle_width_rejected(
    grasp_pose: Pose, obb: OrientedBoundingBox, gripper: GripperSpec, closing_clearance: float = 0.01
) -> bool:
    return oracle_closing_extent(grasp_pose, obb) > gripper.max_opening - closing_clearance


def oracle_clearance(position, env_cloud: PointCloud | None) -> float:
    points = _env_points(env_cloud)
    if len(points) == 0:
        return math.inf
    return float(np.sqrt(((points - np.asarray(position)) ** 2).sum(axis=1)).min())


def oracle_workspace_margin(position, workspace: WorkspaceBounds, base_pose: Pose) -> float:
    local = base_pose.inverse().transform_points(np.asarray(position))[0]
    faces = [local[i] - workspace.min[i] for i in range(3)] + [workspace.max[i] - local[i] for i in range(3)]
    return float(min(faces))
