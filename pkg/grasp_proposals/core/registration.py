"""Point-to-point ICP used to complete a partial object cloud with a known model."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from grasp_proposals.core.exceptions import NoCorrespondencesError, NotConvergedError, TooFewPointsError
from grasp_proposals.core.geometry import Pose, PointCloud, SourceTag, compose, fit_obb, transform_cloud
from grasp_proposals.core.spatial_index import KdTree

logger = logging.getLogger(__name__)

SWEEP_YAWS_DEG = (0.0, 90.0, 180.0, 270.0)


class RegistrationParams(BaseModel):
    """ICP settings."""

    model_config = ConfigDict(extra="forbid")

    max_iterations: int = Field(default=50, ge=1, description="Iteration cap")
    convergence_eps: float = Field(default=1e-6, gt=0.0, description="Stop when rmse improves by less than this (m)")
    max_correspondence_dist: float = Field(default=0.05, gt=0.0, description="Pairs farther apart are ignored (m)")
    yaw_sweep: bool = Field(default=True, description="Try 0/90/180/270 degree initial yaws and keep the best")
    sweep_workers: int = Field(default=1, ge=1, description="Threads evaluating the yaw sweep")


class RegistrationResult(BaseModel):
    """Outcome of one registration run."""

    model_config = ConfigDict(frozen=True, protected_namespaces=())

    model_to_scene: Pose = Field(description="Transform taking model points into the scene frame")
    rmse: float = Field(ge=0.0, description="RMS scene-to-model distance, capped at the correspondence distance (m)")
    fitness: float = Field(default=1.0, ge=0.0, le=1.0, description="Fraction of scene points with a correspondence")
    iterations: int = Field(ge=0, description="Iterations performed")
    converged: bool = Field(description="Stopped on the convergence criterion rather than the iteration cap")
    rmse_history: tuple[float, ...] = Field(default=(), description="rmse at the initial pose and after each iteration")
    initial_yaw_deg: float | None = Field(default=None, description="Winning yaw of the initialization sweep")


def _rigid_fit(source: np.ndarray, target: np.ndarray) -> Pose:
    """Least-squares rotation and translation taking ``source`` onto ``target`` (SVD of the cross-covariance)."""
    source_mean = source.mean(axis=0)
    target_mean = target.mean(axis=0)
    h = (source - source_mean).T @ (target - target_mean)
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T)) or 1.0
    rotation = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    return Pose.from_matrix(rotation, target_mean - rotation @ source_mean)


class _Correspondences:
    def __init__(self, tree: KdTree, scene: np.ndarray, pose: Pose, max_dist: float):
        model_frame = pose.inverse().transform_points(scene)
        self.model_index, distances = tree.nearest_many(model_frame)
        self.inliers = distances <= max_dist
        self.count = int(self.inliers.sum())
        self.fitness = self.count / len(distances)
        # outliers enter at the cap, which keeps the objective non-increasing under the rigid update
        self.rmse = float(np.sqrt(np.mean(np.minimum(distances, max_dist) ** 2)))


def icp_register(
    model: PointCloud,
    scene: PointCloud,
    init: Pose | None = None,
    params: RegistrationParams | None = None,
    model_tree: KdTree | None = None,
) -> RegistrationResult:
    """Register ``model`` onto ``scene`` starting from ``init``.

    Every scene point is paired with its nearest model point; pairs beyond the
    correspondence distance are left out of the fit and enter the rmse at that
    distance. An update that would raise the rmse is discarded and the run
    stops, so the recorded rmse never increases.
    """
    params = params or RegistrationParams()
    init = init or Pose.identity()
    if len(model) < 3 or len(scene) < 3:
        raise TooFewPointsError(f"ICP needs at least 3 points per cloud, got {len(model)} and {len(scene)}")

    tree = model_tree or KdTree(model)
    pose = init
    pairs = _Correspondences(tree, scene.points, pose, params.max_correspondence_dist)
    if pairs.count < 3:
        raise NoCorrespondencesError(
            f"{pairs.count} scene points within {params.max_correspondence_dist} m of the model at the initial pose"
        )

    history = [pairs.rmse]
    converged = False
    iterations = 0
    for _ in range(params.max_iterations):
        candidate = _rigid_fit(model.points[pairs.model_index[pairs.inliers]], scene.points[pairs.inliers])
        updated = _Correspondences(tree, scene.points, candidate, params.max_correspondence_dist)
        iterations += 1
        if updated.count < 3 or updated.rmse > pairs.rmse:
            converged = True
            break
        improvement = pairs.rmse - updated.rmse
        pose, pairs = candidate, updated
        history.append(pairs.rmse)
        if improvement < params.convergence_eps:
            converged = True
            break

    logger.debug(
        "ICP finished: rmse %.6f, fitness %.3f after %d iterations (converged=%s)",
        pairs.rmse, pairs.fitness, iterations, converged,
    )
    return RegistrationResult(
        model_to_scene=pose,
        rmse=pairs.rmse,
        fitness=pairs.fitness,
        iterations=iterations,
        converged=converged,
        rmse_history=tuple(history),
    )


def sweep_initial_poses(model: PointCloud, scene: PointCloud) -> list[Pose]:
    """Initial guesses: model centroid moved onto the scene's gravity-aligned box center, one per sweep yaw."""
    scene_center = np.asarray(fit_obb(scene, gravity_aligned=True).center)
    to_origin = Pose(position=tuple(-model.centroid()))
    return [
        compose(Pose.from_yaw(np.deg2rad(yaw), scene_center), to_origin)
        for yaw in SWEEP_YAWS_DEG
    ]


def register_with_sweep(
    model: PointCloud, scene: PointCloud, params: RegistrationParams | None = None
) -> RegistrationResult:
    """Run ICP from each sweep yaw and keep the best branch.

    Branches rank by fitness first and rmse second; ties go to the earliest yaw.
    """
    params = params or RegistrationParams()
    if len(model) < 3 or len(scene) < 3:
        raise TooFewPointsError(f"ICP needs at least 3 points per cloud, got {len(model)} and {len(scene)}")

    initial_poses = sweep_initial_poses(model, scene)
    if not params.yaw_sweep:
        initial_poses = initial_poses[:1]
    tree = KdTree(model)

    def attempt(init: Pose) -> RegistrationResult | None:
        try:
            return icp_register(model, scene, init, params, model_tree=tree)
        except NoCorrespondencesError:
            return None

    if params.sweep_workers > 1:
        with ThreadPoolExecutor(max_workers=params.sweep_workers) as executor:
            outcomes = list(executor.map(attempt, initial_poses))
    else:
        outcomes = [attempt(init) for init in initial_poses]

    ranked = sorted(
        ((-outcome.fitness, outcome.rmse, index), yaw, outcome)
        for index, (yaw, outcome) in enumerate(zip(SWEEP_YAWS_DEG, outcomes))
        if outcome is not None
    )
    if not ranked:
        raise NoCorrespondencesError("No sweep yaw produced correspondences within the correspondence distance")

    _, best_yaw, best = ranked[0]
    logger.info(
        "Registration: rmse %.5f m, fitness %.3f from initial yaw %.0f deg", best.rmse, best.fitness, best_yaw
    )
    return best.model_copy(update={"initial_yaw_deg": best_yaw})


def complete_cloud(partial: PointCloud, model: PointCloud, result: RegistrationResult) -> PointCloud:
    """Union of the partial cloud and the registered model (model points tagged ``synthetic``)."""
    if not result.converged:
        raise NotConvergedError(f"Registration did not converge (rmse {result.rmse:.5f} m)")
    placed = transform_cloud(result.model_to_scene, model).with_source(SourceTag.SYNTHETIC)
    return PointCloud.merge(partial, placed)
