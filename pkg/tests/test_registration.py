import math

import numpy as np
import pytest

from grasp_proposals.core.exceptions import NoCorrespondencesError, NotConvergedError, TooFewPointsError
from grasp_proposals.core.geometry import PointCloud, Pose, SourceTag, fit_obb, quaternion_distance, transform_cloud
from grasp_proposals.core.registration import (
    SWEEP_YAWS_DEG,
    RegistrationParams,
    RegistrationResult,
    complete_cloud,
    icp_register,
    register_with_sweep,
    sweep_initial_poses,
)
from grasp_proposals.harness import ObjectSpec, model_cloud

WIDE = RegistrationParams(max_correspondence_dist=0.2)


def rotation_angle(a: Pose, b: Pose) -> float:
    relative = a.rotation_matrix.T @ b.rotation_matrix
    return math.acos(max(-1.0, min(1.0, (np.trace(relative) - 1.0) / 2.0)))


def test_self_registration(rng, make_solid):
    model = make_solid(rng)
    result = icp_register(model, model)
    assert result.converged
    assert result.iterations <= 2
    assert result.rmse < 1e-9
    assert np.allclose(result.model_to_scene.position, 0.0, atol=1e-9)
    assert quaternion_distance(result.model_to_scene.orientation, (1.0, 0.0, 0.0, 0.0)) < 1e-6


def test_recovers_known_transform(rng, make_solid):
    model = make_solid(rng)
    truth = Pose.from_axis_angle((0.0, 0.0, 1.0), math.radians(10.0), (0.05, 0.0, 0.0))
    scene = transform_cloud(truth, model)
    result = icp_register(model, scene, params=WIDE)
    assert result.converged
    assert np.linalg.norm(np.subtract(result.model_to_scene.position, truth.position)) < 1e-3
    assert math.degrees(rotation_angle(result.model_to_scene, truth)) < 0.5


def test_rmse_history_never_increases(rng, make_solid):
    model = make_solid(rng)
    scene = transform_cloud(Pose.from_axis_angle((0.3, 0.2, 1.0), 0.15, (0.02, -0.03, 0.01)), model)
    history = icp_register(model, scene, params=WIDE).rmse_history
    assert len(history) >= 2
    assert all(later <= earlier for earlier, later in zip(history, history[1:]))


def test_too_few_points_raises(rng, make_solid):
    with pytest.raises(TooFewPointsError):
        icp_register(PointCloud(points=np.zeros((2, 3))), make_solid(rng))


def test_far_scene_has_no_correspondences(rng, make_solid):
    model = make_solid(rng)
    with pytest.raises(NoCorrespondencesError):
        icp_register(model, transform_cloud(Pose.translate(10.0, 0.0, 0.0), model))


def test_sweep_yields_one_pose_per_yaw(rng, make_solid):
    model = make_solid(rng)
    poses = sweep_initial_poses(model, transform_cloud(Pose.translate(1.0, 0.0, 0.5), model))
    assert len(poses) == len(SWEEP_YAWS_DEG)
    assert [round(math.degrees(p.yaw)) % 360 for p in poses] == [0, 90, 180, 270]


def test_sweep_registers_a_turned_box():
    model = model_cloud(ObjectSpec(shape="box", dimensions=(0.12, 0.06, 0.04), pose=Pose.identity()))
    scene = transform_cloud(Pose.from_yaw(math.radians(185.0), (0.6, 0.1, 0.8)), model)
    result = register_with_sweep(model, scene)
    assert result.converged
    assert result.rmse < 2e-3
    assert result.fitness == 1.0
    assert result.initial_yaw_deg in SWEEP_YAWS_DEG


def test_sweep_without_yaws_tries_one_pose(rng, make_solid):
    model = make_solid(rng)
    result = register_with_sweep(model, model, RegistrationParams(yaw_sweep=False))
    assert result.initial_yaw_deg == 0.0


class TestCompleteCloud:
    def test_union_sizes_and_tags(self, rng, make_solid):
        model = make_solid(rng)
        partial = PointCloud(points=model.points[model.points[:, 0] <= 0.0]).with_source(SourceTag.CAMERA)
        result = icp_register(model, partial)
        completed = complete_cloud(partial, model, result)
        assert len(completed) == len(partial) + len(model)
        assert list(completed.source[: len(partial)]) == ["camera"] * len(partial)
        assert list(completed.source[len(partial) :]) == ["synthetic"] * len(model)

    def test_completed_box_matches_full_model(self, rng, make_solid):
        model = make_solid(rng)
        partial = PointCloud(points=model.points[model.points[:, 0] <= 0.0])
        completed = complete_cloud(partial, model, icp_register(model, partial))
        full = fit_obb(model, gravity_aligned=False).half_extents
        assert fit_obb(completed, gravity_aligned=False).half_extents == pytest.approx(full, rel=0.1)

    def test_refuses_unconverged_result(self, rng, make_solid):
        model = make_solid(rng)
        result = RegistrationResult(model_to_scene=Pose.identity(), rmse=0.1, iterations=50, converged=False)
        with pytest.raises(NotConvergedError):
            complete_cloud(model, model, result)


def test_unmatched_scene_points_lower_fitness(rng, make_solid):
    model = make_solid(rng)
    stray = rng.uniform(1.0, 1.5, size=(100, 3))
    scene = PointCloud(points=np.vstack([model.points, stray]))
    result = icp_register(model, scene)
    assert result.fitness == pytest.approx(len(model) / len(scene))
    assert result.rmse == pytest.approx(0.05 * math.sqrt(100 / len(scene)))
    assert np.allclose(result.model_to_scene.position, 0.0, atol=1e-9)


def towered_box(rng, make_box_surface) -> PointCloud:
    """Box surface with a small tower on one top corner, centered on its centroid."""
    base = make_box_surface(rng, size=(0.2, 0.12, 0.06), count=400)
    tower = make_box_surface(rng, size=(0.05, 0.05, 0.08), count=100) + (0.075, 0.035, 0.07)
    points = np.vstack([base, tower])
    return PointCloud(points=points - points.mean(axis=0))


@pytest.mark.slow
def test_sweep_recovers_perturbed_partial_views(make_box_surface):
    recovered = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        model = towered_box(rng, make_box_surface)
        axis = rng.normal(size=3)
        shift = rng.normal(size=3)
        shift *= rng.uniform(0.0, 0.1) / np.linalg.norm(shift)
        truth = Pose.from_axis_angle(axis, math.radians(rng.uniform(0.0, 20.0)), shift)
        placed = truth.transform_points(model.points)
        depth = placed @ rng.normal(size=3)
        scene = PointCloud(points=placed[depth <= np.quantile(depth, 0.7)])

        result = register_with_sweep(model, scene)
        history = result.rmse_history
        assert all(later <= earlier for earlier, later in zip(history, history[1:]))
        position_error = np.linalg.norm(np.subtract(result.model_to_scene.position, truth.position))
        if position_error < 5e-3 and math.degrees(rotation_angle(result.model_to_scene, truth)) < 2.0:
            recovered += 1
    assert recovered >= 95
