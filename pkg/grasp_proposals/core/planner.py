"""Grasp planning pipeline: sample on the quadrant sphere, filter, score, rank.

Grasp frame: X is the approach axis (pointing at the object CoM), Y the
finger closing axis and Z the finger axis, kept as vertical as the approach
allows. Candidate checks are independent per candidate; work is split into
contiguous chunks for ``jobs`` threads and merged back in sample order, so the
ranked output does not depend on the number of threads.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Iterable, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.spatial.transform import Rotation

from grasp_proposals.core.exceptions import (
    DegenerateCloudError,
    DegenerateStandoffError,
    NoCorrespondencesError,
    NoFeasibleGraspError,
    NotFeasibleError,
    NoValidBasePoseError,
    TooFewPointsError,
)
from grasp_proposals.core.geometry import OrientedBoundingBox, Pose, PointCloud, fit_obb
from grasp_proposals.core.models import (
    CostTerms,
    GraspCandidate,
    GraspStatus,
    GripperSpec,
    PlannerConfig,
    SamplingParams,
    SceneModel,
    ScoreWeights,
)
from grasp_proposals.core.reachability import BaseAlignmentParams, ReachabilityMap, WorkspaceBounds, align_base
from grasp_proposals.core.registration import (
    RegistrationParams,
    RegistrationResult,
    complete_cloud,
    register_with_sweep,
)
from grasp_proposals.core.spatial_index import KdTree

logger = logging.getLogger(__name__)

WORLD_UP = np.array([0.0, 0.0, 1.0])


class PlanResult(BaseModel):
    """Ranked candidates (feasible by cost, then rejected by index) and the selection."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    candidates: list[GraspCandidate] = Field(default_factory=list)
    selected: GraspCandidate | None = None
    obb: OrientedBoundingBox
    com: tuple[float, float, float]
    base_pose: Pose
    registration: RegistrationResult | None = None
    timings: dict[str, float] = Field(default_factory=dict, description="Seconds per pipeline stage")

    @property
    def feasible(self) -> list[GraspCandidate]:
        return [c for c in self.candidates if c.status is GraspStatus.FEASIBLE]

    @property
    def feasible_count(self) -> int:
        return len(self.feasible)

    def status_counts(self) -> dict[str, int]:
        counts = {status.value: 0 for status in GraspStatus}
        for candidate in self.candidates:
            counts[candidate.status.value] += 1
        return counts


def pose_arrays(poses: Sequence[Pose]) -> tuple[np.ndarray, np.ndarray]:
    """Stacked rotation matrices (M, 3, 3) and positions (M, 3)."""
    if not poses:
        return np.zeros((0, 3, 3)), np.zeros((0, 3))
    quaternions = np.array([(p.orientation[1], p.orientation[2], p.orientation[3], p.orientation[0]) for p in poses])
    positions = np.array([p.position for p in poses], dtype=np.float64)
    return Rotation.from_quat(quaternions).as_matrix(), positions


def resolve_standoff(obb: OrientedBoundingBox, gripper: GripperSpec, params: SamplingParams) -> float:
    largest = max(obb.half_extents)
    standoff = params.standoff if params.standoff is not None else largest + gripper.palm_depth + params.standoff_margin
    if standoff <= largest:
        raise DegenerateStandoffError(
            f"Standoff {standoff:.4f} m does not clear the largest half-extent {largest:.4f} m"
        )
    return standoff


def robot_bearing(com: np.ndarray, base_pose: Pose) -> float:
    """World azimuth of the direction from the CoM toward the robot base."""
    offset = np.asarray(base_pose.position[:2]) - com[:2]
    if np.hypot(*offset) < 1e-9:
        return base_pose.yaw + math.pi
    return float(math.atan2(offset[1], offset[0]))


def _approach_frame(approach: np.ndarray, azimuth: float) -> np.ndarray:
    finger = WORLD_UP - np.dot(WORLD_UP, approach) * approach
    if np.linalg.norm(finger) < 1e-9:
        finger = np.array([math.cos(azimuth), math.sin(azimuth), 0.0])
        finger = finger - np.dot(finger, approach) * approach
    finger /= np.linalg.norm(finger)
    closing = np.cross(finger, approach)
    return np.column_stack([approach, closing, finger])


def _twist(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def sample_candidates(
    obb: OrientedBoundingBox,
    com: Iterable[float],
    base_pose: Pose,
    gripper: GripperSpec,
    params: SamplingParams | None = None,
) -> list[GraspCandidate]:
    """Candidates on the robot-facing, above-horizon quarter of the sphere around the CoM.

    Rows and columns use cell centers: elevation (i + 0.5) * 90 / n_polar degrees,
    azimuth offsets -90 + (j + 0.5) * 180 / n_azimuth degrees from the bearing to
    the robot. A sampling seed shifts the whole grid by one random offset of at
    most half a cell per axis. Sample index is (polar * n_azimuth + azimuth) *
    n_twist + twist.
    """
    params = params or SamplingParams()
    com = np.asarray(tuple(com), dtype=np.float64)
    standoff = resolve_standoff(obb, gripper, params)
    bearing = robot_bearing(com, base_pose)
    twists = params.twist_angles

    steps = max(int(math.ceil(params.pregrasp_offset / params.approach_step - 1e-9)), 0)
    path_offsets = np.linspace(params.pregrasp_offset, 0.0, steps + 1) if steps else np.zeros(1)

    polar_shift, azimuth_shift = 0.5, 0.5
    if params.seed is not None:
        polar_shift, azimuth_shift = (float(v) for v in np.random.default_rng(params.seed).uniform(0.0, 1.0, 2))

    candidates: list[GraspCandidate] = []
    for i_polar in range(params.n_polar):
        elevation = (i_polar + polar_shift) * (math.pi / 2.0) / params.n_polar
        for i_azimuth in range(params.n_azimuth):
            azimuth = bearing - math.pi / 2.0 + (i_azimuth + azimuth_shift) * math.pi / params.n_azimuth
            outward = np.array(
                [math.cos(elevation) * math.cos(azimuth), math.cos(elevation) * math.sin(azimuth), math.sin(elevation)]
            )
            position = com + standoff * outward
            frame = _approach_frame(-outward, azimuth)
            for i_twist, twist in enumerate(twists):
                rotation = frame @ _twist(twist)
                grasp = Pose.from_matrix(rotation, position)
                path = [
                    Pose(position=tuple(position + offset * outward), orientation=grasp.orientation)
                    for offset in path_offsets
                ]
                candidates.append(
                    GraspCandidate(
                        index=len(candidates),
                        polar_index=i_polar,
                        azimuth_index=i_azimuth,
                        twist_index=i_twist,
                        elevation=elevation,
                        azimuth=azimuth,
                        twist_angle=twist,
                        grasp_pose=grasp,
                        pre_grasp_pose=path[0],
                        approach_path=path,
                    )
                )
    logger.debug("Sampled %d candidates at standoff %.4f m", len(candidates), standoff)
    return candidates


def _collision_mask(
    rotations: np.ndarray, positions: np.ndarray, probes: tuple[np.ndarray, np.ndarray], env: KdTree | None
) -> np.ndarray:
    if env is None or len(positions) == 0:
        return np.zeros(len(positions), dtype=bool)
    centers, radii = probes
    world = np.einsum("mij,pj->mpi", rotations, centers) + positions[:, None, :]
    hits = env.any_within(world.reshape(-1, 3), np.tile(radii, len(positions)))
    return hits.reshape(len(positions), len(centers)).any(axis=1)


def check_pose_collision(pose: Pose, gripper: GripperSpec, env: KdTree | None) -> bool:
    """True if any gripper probe placed at ``pose`` has an environment point within its radius."""
    rotations, positions = pose_arrays([pose])
    return bool(_collision_mask(rotations, positions, gripper.probe_arrays(), env)[0])


def check_approach_collision(candidate: GraspCandidate, gripper: GripperSpec, env: KdTree | None) -> bool:
    """True if the gripper collides at any waypoint of the approach path."""
    if not candidate.approach_path:
        raise ValueError(f"Candidate {candidate.index} has an empty approach path")
    rotations, positions = pose_arrays(candidate.approach_path)
    return bool(_collision_mask(rotations, positions, gripper.probe_arrays(), env).any())


def closing_extent(grasp_pose: Pose, obb: OrientedBoundingBox) -> float:
    """Spread of the 8 box corners along the grasp closing axis."""
    along = (obb.corners() - np.asarray(grasp_pose.position)) @ grasp_pose.axis(1)
    return float(along.max() - along.min())


def check_width(
    candidate: GraspCandidate, obb: OrientedBoundingBox, gripper: GripperSpec, closing_clearance: float = 0.01
) -> bool:
    """True (reject) when the object is wider than the usable opening along the closing axis."""
    return closing_extent(candidate.grasp_pose, obb) > gripper.max_opening - closing_clearance


def _to_base_frame(base_pose: Pose, rotations: np.ndarray, positions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    base_rotation = base_pose.rotation_matrix
    local_positions = (positions - np.asarray(base_pose.position)) @ base_rotation
    local_approach = rotations[:, :, 0] @ base_rotation
    return local_positions, local_approach


def pregrasp_available(
    poses: Sequence[Pose],
    gripper: GripperSpec,
    env: KdTree | None,
    reach_map: ReachabilityMap | None,
    base_pose: Pose,
    probes: tuple[np.ndarray, np.ndarray] | None = None,
) -> np.ndarray:
    """Per pose: collision-free and, when a map is given, reachable from ``base_pose``."""
    rotations, positions = pose_arrays(poses)
    available = ~_collision_mask(rotations, positions, probes or gripper.probe_arrays(), env)
    if reach_map is not None and len(poses):
        local_positions, local_approach = _to_base_frame(base_pose, rotations, positions)
        available &= reach_map.reachable_many(local_positions, local_approach)
    return available


def obstacle_clearance(position: Iterable[float], env: KdTree | None) -> float:
    if env is None:
        return math.inf
    return env.nearest(np.asarray(tuple(position)))[1]


def workspace_margin(position: Iterable[float], workspace: WorkspaceBounds, base_pose: Pose) -> float:
    local = base_pose.inverse().transform_points(np.asarray(tuple(position)))
    return float(workspace.margin(local)[0])


def total_cost(terms: CostTerms, weights: ScoreWeights) -> float:
    """Lower is better."""
    return (
        weights.w_pregrasp * (1.0 - terms.pregrasp_availability)
        + weights.w_clearance * math.exp(-terms.obstacle_clearance / weights.sigma_clearance)
        + weights.w_margin * math.exp(-terms.workspace_margin / weights.sigma_margin)
    )


def grid_neighbors(
    candidate: GraspCandidate, lookup: dict[tuple[int, int, int], GraspCandidate]
) -> list[GraspCandidate]:
    """Candidates one cell away along exactly one of the polar, azimuth or twist axes."""
    neighbors = []
    p, a, t = candidate.grid_key
    for key in ((p - 1, a, t), (p + 1, a, t), (p, a - 1, t), (p, a + 1, t), (p, a, t - 1), (p, a, t + 1)):
        if key in lookup:
            neighbors.append(lookup[key])
    return neighbors


def score_candidate(
    candidate: GraspCandidate,
    reach_map: ReachabilityMap | None,
    env: KdTree | None,
    workspace: WorkspaceBounds,
    weights: ScoreWeights | None = None,
    neighbors: Sequence[GraspCandidate] = (),
    gripper: GripperSpec | None = None,
    base_pose: Pose | None = None,
) -> float:
    """Score a feasible candidate, store its cost terms and return its total cost."""
    if candidate.status is not GraspStatus.FEASIBLE:
        raise NotFeasibleError(f"Candidate {candidate.index} is {candidate.status.value}")
    weights = weights or ScoreWeights()
    gripper = gripper or GripperSpec()
    base_pose = base_pose or Pose.identity()
    pregrasps = [n.pre_grasp_pose for n in neighbors]
    availability = float(pregrasp_available(pregrasps, gripper, env, reach_map, base_pose).mean()) if neighbors else 0.0
    return _apply_cost(candidate, availability, env, workspace, weights, base_pose)


def _apply_cost(
    candidate: GraspCandidate,
    availability: float,
    env: KdTree | None,
    workspace: WorkspaceBounds,
    weights: ScoreWeights,
    base_pose: Pose,
) -> float:
    terms = CostTerms(
        pregrasp_availability=availability,
        obstacle_clearance=obstacle_clearance(candidate.grasp_pose.position, env),
        workspace_margin=workspace_margin(candidate.grasp_pose.position, workspace, base_pose),
    )
    candidate.cost_terms = terms
    candidate.total_cost = total_cost(terms, weights)
    return candidate.total_cost


class _FilterContext:
    def __init__(
        self,
        env: KdTree | None,
        gripper: GripperSpec,
        obb: OrientedBoundingBox,
        reach_map: ReachabilityMap | None,
        base_pose: Pose,
        closing_clearance: float,
    ):
        self.env = env
        self.gripper = gripper
        self.probes = gripper.probe_arrays()
        self.obb = obb
        self.reach_map = reach_map
        self.base_pose = base_pose
        self.width_limit = gripper.max_opening - closing_clearance

    def evaluate(self, chunk: list[GraspCandidate]) -> np.ndarray:
        """Run the filters in pipeline order on ``chunk`` and return its pre-grasp availability mask."""
        rotations, positions = pose_arrays([c.grasp_pose for c in chunk])
        for candidate, hit in zip(chunk, _collision_mask(rotations, positions, self.probes, self.env)):
            if hit:
                candidate.status = GraspStatus.REJECTED_COLLISION

        pending = [c for c in chunk if c.status is GraspStatus.PENDING]
        if pending and self.env is not None:
            lengths = [len(c.approach_path) for c in pending]
            path_rotations, path_positions = pose_arrays([pose for c in pending for pose in c.approach_path])
            hits = _collision_mask(path_rotations, path_positions, self.probes, self.env)
            for candidate, hit in zip(pending, np.split(hits, np.cumsum(lengths)[:-1])):
                if hit.any():
                    candidate.status = GraspStatus.REJECTED_APPROACH

        for candidate in chunk:
            if candidate.status is GraspStatus.PENDING:
                candidate.closing_extent = closing_extent(candidate.grasp_pose, self.obb)
                if candidate.closing_extent > self.width_limit:
                    candidate.status = GraspStatus.REJECTED_WIDTH

        pending = [i for i, c in enumerate(chunk) if c.status is GraspStatus.PENDING]
        if pending and self.reach_map is not None:
            local_positions, local_approach = _to_base_frame(self.base_pose, rotations[pending], positions[pending])
            reachable = self.reach_map.reachable_many(local_positions, local_approach)
            for i, ok in zip(pending, reachable):
                if not ok:
                    chunk[i].status = GraspStatus.REJECTED_UNREACHABLE

        for candidate in chunk:
            if candidate.status is GraspStatus.PENDING:
                candidate.status = GraspStatus.FEASIBLE

        return pregrasp_available(
            [c.pre_grasp_pose for c in chunk], self.gripper, self.env, self.reach_map, self.base_pose, self.probes
        )


def _chunks(items: list, parts: int) -> list[list]:
    bounds = np.linspace(0, len(items), min(parts, max(len(items), 1)) + 1).astype(int)
    return [items[bounds[i] : bounds[i + 1]] for i in range(len(bounds) - 1)]


def rank_candidates(candidates: Iterable[GraspCandidate]) -> list[GraspCandidate]:
    """Feasible candidates by (total_cost, index), then every rejected candidate by index."""
    candidates = list(candidates)
    feasible = sorted(
        (c for c in candidates if c.status is GraspStatus.FEASIBLE), key=lambda c: (c.total_cost, c.index)
    )
    rejected = sorted((c for c in candidates if c.status is not GraspStatus.FEASIBLE), key=lambda c: c.index)
    return feasible + rejected


def _complete_object(
    cloud: PointCloud, model: PointCloud | None, params: RegistrationParams
) -> tuple[PointCloud, RegistrationResult | None]:
    if model is None:
        return cloud, None
    try:
        result = register_with_sweep(model, cloud, params)
    except (NoCorrespondencesError, TooFewPointsError, DegenerateCloudError) as e:
        logger.warning("Registration skipped, planning on the partial cloud: %s", e)
        return cloud, None
    if not result.converged:
        logger.warning("Registration did not converge (rmse %.5f m), planning on the partial cloud", result.rmse)
        return cloud, result
    return complete_cloud(cloud, model, result), result


def plan(
    scene: SceneModel,
    config: PlannerConfig | None = None,
    *,
    reach_map: ReachabilityMap | None = None,
    model: PointCloud | None = None,
    registration: RegistrationParams | None = None,
    excluded_indices: Iterable[int] = (),
    base_alignment: BaseAlignmentParams | None = None,
) -> PlanResult:
    """Run the full pipeline on ``scene`` and select the cheapest feasible grasp.

    Order: optional registration and completion, box fit, sampling, pose
    collision, approach collision, width, reachability (only with a map),
    scoring, ranking. Raises ``NoFeasibleGraspError`` carrying the evaluated
    result when every candidate is rejected.
    """
    config = config or PlannerConfig()
    timings: dict[str, float] = {}
    excluded = set(excluded_indices)

    def timed(stage: str, started: float) -> None:
        timings[stage] = time.perf_counter() - started

    started = time.perf_counter()
    cloud, registration_result = scene.object_cloud, None
    if config.use_registration:
        cloud, registration_result = _complete_object(cloud, model, registration or RegistrationParams())
    timed("registration", started)

    started = time.perf_counter()
    obb = fit_obb(cloud, gravity_aligned=config.gravity_aligned)
    com = cloud.centroid()
    timed("obb", started)

    started = time.perf_counter()
    env = KdTree(scene.environment_cloud) if scene.environment_cloud is not None else None
    timed("index", started)

    base_pose = scene.base_pose
    if config.align_base and reach_map is not None:
        started = time.perf_counter()
        try:
            base_pose = align_base(obb, reach_map, env, scene.base_pose, params=base_alignment)
        except NoValidBasePoseError as e:
            logger.warning("Base alignment failed, keeping the current base: %s", e)
        timed("base_alignment", started)

    started = time.perf_counter()
    candidates = sample_candidates(obb, com, base_pose, scene.gripper, config.sampling)
    candidates = [c for c in candidates if c.index not in excluded]
    timed("sampling", started)

    started = time.perf_counter()
    context = _FilterContext(env, scene.gripper, obb, reach_map, base_pose, config.closing_clearance)
    chunks = _chunks(candidates, config.jobs)
    if config.jobs > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as executor:
            masks = list(executor.map(context.evaluate, chunks))
    else:
        masks = [context.evaluate(chunk) for chunk in chunks]
    available = {c.index: bool(ok) for chunk, mask in zip(chunks, masks) for c, ok in zip(chunk, mask)}
    timed("filtering", started)

    started = time.perf_counter()
    lookup = {c.grid_key: c for c in candidates}
    for candidate in candidates:
        if candidate.status is not GraspStatus.FEASIBLE:
            continue
        neighbors = grid_neighbors(candidate, lookup)
        availability = float(np.mean([available[n.index] for n in neighbors])) if neighbors else 0.0
        _apply_cost(candidate, availability, env, scene.workspace, config.weights, base_pose)
        logger.debug("Scored %s", candidate)
    timed("scoring", started)

    started = time.perf_counter()
    ranked = rank_candidates(candidates)
    timed("ranking", started)

    result = PlanResult(
        candidates=ranked,
        obb=obb,
        com=tuple(float(v) for v in com),
        base_pose=base_pose,
        registration=registration_result,
        timings=timings,
    )
    counts = result.status_counts()
    logger.info(
        "Planned %d candidates: %s",
        len(ranked),
        ", ".join(f"{status}={count}" for status, count in counts.items() if count),
    )
    if not result.feasible:
        raise NoFeasibleGraspError(f"All {len(ranked)} grasp candidates were rejected", result=result)
    result.selected = ranked[0]
    logger.info("Selected candidate %s", result.selected)
    return result
