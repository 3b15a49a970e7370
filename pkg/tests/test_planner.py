import math

import numpy as np
import pytest
from pydantic import ValidationError

from grasp_proposals.core.exceptions import DegenerateStandoffError, NoFeasibleGraspError, NotFeasibleError
from grasp_proposals.core.geometry import OrientedBoundingBox, PointCloud, Pose
from grasp_proposals.core.models import (
    CollisionProbe,
    GraspCandidate,
    GraspStatus,
    GripperSpec,
    PlannerConfig,
    SamplingParams,
    SceneModel,
    ScoreWeights,
)
from grasp_proposals.core.planner import (
    check_approach_collision,
    check_pose_collision,
    check_width,
    closing_extent,
    grid_neighbors,
    plan,
    rank_candidates,
    sample_candidates,
    score_candidate,
    total_cost,
)
from grasp_proposals.core.reachability import WorkspaceBounds, is_reachable
from grasp_proposals.core.spatial_index import KdTree
from grasp_proposals.harness import (
    ObjectSpec,
    SceneRecipe,
    generate_scene,
    model_cloud,
    oracle_approach_collision,
    oracle_clearance,
    oracle_closing_extent,
    oracle_collision,
    oracle_width_rejected,
    oracle_workspace_margin,
)
from grasp_proposals.io.report import build_report

CUBE_CENTER = (0.6, 0.0, 0.78)
CUBE_OBB = OrientedBoundingBox(center=CUBE_CENTER, half_extents=(0.03, 0.03, 0.03))

# Eight small probes in a row across the wrist plane.
WRIST_PROBES = tuple(CollisionProbe(center=(0.0, float(y), 0.0), radius=0.004) for y in np.linspace(-0.035, 0.035, 8))


def candidate_at(pose: Pose, status: GraspStatus = GraspStatus.PENDING) -> GraspCandidate:
    return GraspCandidate(
        index=0,
        polar_index=0,
        azimuth_index=0,
        twist_index=0,
        elevation=0.0,
        azimuth=0.0,
        twist_angle=0.0,
        grasp_pose=pose,
        pre_grasp_pose=pose,
        approach_path=[pose],
        status=status,
    )


def sample_cube(params: SamplingParams | None = None, gripper: GripperSpec | None = None) -> list[GraspCandidate]:
    return sample_candidates(CUBE_OBB, CUBE_CENTER, Pose.identity(), gripper or GripperSpec(), params)


class TestGripperSpec:
    def test_default_probes_cover_fingers_and_palm(self):
        gripper = GripperSpec()
        centers, radii = gripper.probe_arrays()
        assert len(centers) == len(gripper.default_probes()) >= 8
        fingers = centers[np.isclose(radii, gripper.finger_thickness / 2.0)]
        assert np.allclose(np.abs(fingers[:, 1]), gripper.max_opening / 2.0 + gripper.finger_thickness / 2.0)
        assert fingers[:, 0].min() == pytest.approx(gripper.palm_depth)
        assert fingers[:, 0].max() == pytest.approx(gripper.reach)

    def test_explicit_probes_replace_defaults(self):
        assert GripperSpec(collision_probes=WRIST_PROBES).probes == WRIST_PROBES

    def test_rejects_too_few_probes(self):
        with pytest.raises(ValidationError):
            GripperSpec(collision_probes=WRIST_PROBES[:3])


class TestSampling:
    def test_single_sample_points_at_com(self):
        params = SamplingParams(n_polar=1, n_azimuth=1, twist_angles_deg=(0.0,))
        (candidate,) = sample_cube(params)
        to_com = np.asarray(CUBE_CENTER) - np.asarray(candidate.grasp_pose.position)
        assert candidate.grasp_pose.axis(0) @ (to_com / np.linalg.norm(to_com)) == pytest.approx(1.0, abs=1e-9)
        assert candidate.elevation == pytest.approx(math.pi / 4)

    def test_count_and_standoff(self):
        params = SamplingParams(n_polar=3, n_azimuth=5, twist_angles_deg=(-90.0, -45.0, 0.0, 45.0))
        candidates = sample_cube(params)
        assert len(candidates) == 60
        standoff = 0.03 + GripperSpec().palm_depth + params.standoff_margin
        for candidate in candidates:
            distance = np.linalg.norm(np.subtract(candidate.grasp_pose.position, CUBE_CENTER))
            assert distance == pytest.approx(standoff, abs=1e-9)

    def test_index_follows_grid_order(self):
        params = SamplingParams(n_polar=3, n_azimuth=5, twist_angles_deg=(-45.0, 0.0, 45.0))
        for candidate in sample_cube(params):
            p, a, t = candidate.grid_key
            assert candidate.index == (p * 5 + a) * 3 + t

    def test_samples_stay_on_the_robot_facing_upper_quadrant(self):
        com = np.asarray(CUBE_CENTER)
        toward_robot = -com[:2]
        for candidate in sample_cube():
            offset = np.asarray(candidate.grasp_pose.position) - com
            assert offset[2] > 0.0
            assert offset[:2] @ toward_robot > 0.0

    def test_elevation_rows(self):
        elevations = sorted({round(math.degrees(c.elevation), 6) for c in sample_cube()})
        assert elevations == [11.25, 33.75, 56.25, 78.75]

    def test_seed_shifts_the_grid_within_half_a_cell(self):
        centered = sample_cube()
        shifted = sample_cube(SamplingParams(seed=3))
        assert [c.grasp_pose for c in shifted] == [c.grasp_pose for c in sample_cube(SamplingParams(seed=3))]
        assert [c.grasp_pose for c in shifted] != [c.grasp_pose for c in sample_cube(SamplingParams(seed=4))]
        assert [c.grasp_pose for c in shifted] != [c.grasp_pose for c in centered]
        for before, after in zip(centered, shifted):
            assert after.grid_key == before.grid_key
            assert abs(after.elevation - before.elevation) <= math.pi / 16 + 1e-12
            assert abs(after.azimuth - before.azimuth) <= math.pi / 18 + 1e-12
            assert 0.0 <= after.elevation <= math.pi / 2

    def test_pre_grasp_backs_off_along_approach(self):
        params = SamplingParams()
        for candidate in sample_cube(params)[::7]:
            expected = np.asarray(candidate.grasp_pose.position) - params.pregrasp_offset * candidate.grasp_pose.axis(0)
            assert candidate.pre_grasp_pose.position == pytest.approx(tuple(expected), abs=1e-9)
            path = candidate.approach_path
            assert len(path) == 11
            assert path[0] == candidate.pre_grasp_pose
            assert path[-1].position == pytest.approx(candidate.grasp_pose.position, abs=1e-12)
            steps = np.linalg.norm(np.diff([p.position for p in path], axis=0), axis=1)
            assert steps == pytest.approx(np.full(10, params.approach_step), abs=1e-9)

    def test_fingers_as_vertical_as_possible_without_twist(self):
        up = np.array([0.0, 0.0, 1.0])
        for candidate in sample_cube():
            if candidate.twist_angle != 0.0:
                continue
            x = candidate.grasp_pose.axis(0)
            expected = up - (up @ x) * x
            expected /= np.linalg.norm(expected)
            assert candidate.grasp_pose.axis(2) == pytest.approx(tuple(expected), abs=1e-9)

    def test_small_standoff_is_degenerate(self):
        with pytest.raises(DegenerateStandoffError):
            sample_cube(SamplingParams(standoff=0.02))


class TestCollisionChecks:
    def test_empty_environment_never_collides(self):
        assert not check_pose_collision(Pose.translate(0.6, 0.0, 0.8), GripperSpec(), None)

    def test_point_at_probe_center_collides(self):
        gripper = GripperSpec()
        pose = sample_cube()[40].grasp_pose
        point = pose.transform_points(np.asarray(gripper.probes[-1].center))
        assert check_pose_collision(pose, gripper, KdTree(PointCloud(points=point)))

    def test_pose_check_agrees_with_oracle(self, rng, make_pose):
        gripper = GripperSpec()
        env_cloud = PointCloud(points=rng.uniform(-0.15, 0.15, size=(300, 3)))
        env = KdTree(env_cloud)
        for _ in range(100):
            pose = make_pose(rng, max_shift=0.15)
            assert check_pose_collision(pose, gripper, env) == oracle_collision(pose, gripper, env_cloud)

    def test_obstacle_midway_along_the_approach(self):
        gripper = GripperSpec(collision_probes=WRIST_PROBES)
        candidate = sample_cube(gripper=gripper)[20]
        midway = candidate.approach_path[len(candidate.approach_path) // 2]
        env_cloud = PointCloud(points=midway.transform_points(np.array([0.0, 0.005, 0.0])))
        env = KdTree(env_cloud)
        assert not check_pose_collision(candidate.grasp_pose, gripper, env)
        assert not check_pose_collision(candidate.pre_grasp_pose, gripper, env)
        assert check_approach_collision(candidate, gripper, env)
        assert oracle_approach_collision(candidate, gripper, env_cloud, step=0.001)

    def test_single_waypoint_reduces_to_pose_check(self):
        gripper = GripperSpec()
        candidate = sample_cube()[12]
        single = candidate.model_copy(update={"approach_path": [candidate.grasp_pose]})
        point = candidate.grasp_pose.transform_points(np.asarray(gripper.probes[0].center))
        env = KdTree(PointCloud(points=point))
        expected = check_pose_collision(candidate.grasp_pose, gripper, env)
        assert expected
        assert check_approach_collision(single, gripper, env) == expected

    def test_empty_path_raises(self):
        candidate = sample_cube()[0].model_copy(update={"approach_path": []})
        with pytest.raises(ValueError):
            check_approach_collision(candidate, GripperSpec(), None)


class TestWidthCheck:
    GRIPPER = GripperSpec(max_opening=0.10)

    def test_wide_object_is_rejected(self):
        obb = OrientedBoundingBox(
            center=(0.0, 0.0, 0.0), rotation=Pose.from_yaw(math.pi / 2).orientation, half_extents=(0.06, 0.02, 0.01)
        )
        assert check_width(candidate_at(Pose.identity()), obb, self.GRIPPER)

    def test_narrow_object_is_kept(self):
        obb = OrientedBoundingBox(center=(0.0, 0.0, 0.0), half_extents=(0.02, 0.02, 0.02))
        assert not check_width(candidate_at(Pose.identity()), obb, self.GRIPPER)

    def test_rotated_grasp_matches_oracle(self):
        obb = OrientedBoundingBox(center=(0.1, 0.0, 0.0), half_extents=(0.06, 0.02, 0.01))
        pose = Pose.from_yaw(math.radians(30.0))
        assert closing_extent(pose, obb) == pytest.approx(oracle_closing_extent(pose, obb), abs=1e-9)
        angle = math.radians(30.0)
        assert closing_extent(pose, obb) == pytest.approx(0.12 * math.sin(angle) + 0.04 * math.cos(angle))

    def test_random_pairs_match_oracle(self, rng, make_pose):
        for _ in range(1000):
            pose = make_pose(rng)
            half = np.sort(rng.uniform(0.005, 0.08, 3))[::-1]
            obb = OrientedBoundingBox(
                center=tuple(rng.uniform(-1, 1, 3)), rotation=make_pose(rng).orientation, half_extents=tuple(half)
            )
            assert closing_extent(pose, obb) == pytest.approx(oracle_closing_extent(pose, obb), abs=1e-9)
            assert check_width(candidate_at(pose), obb, self.GRIPPER) == oracle_width_rejected(pose, obb, self.GRIPPER)


class TestScoring:
    WORKSPACE = WorkspaceBounds()

    def feasible(self) -> GraspCandidate:
        candidate = sample_cube()[62]
        candidate.status = GraspStatus.FEASIBLE
        return candidate

    def test_unfiltered_candidate_is_not_feasible(self):
        with pytest.raises(NotFeasibleError):
            score_candidate(sample_cube()[0], None, None, self.WORKSPACE)

    def test_terms_and_formula(self):
        candidate = self.feasible()
        weights = ScoreWeights()
        cost = score_candidate(candidate, None, None, self.WORKSPACE, weights, neighbors=[candidate])
        terms = candidate.cost_terms
        assert terms.pregrasp_availability == 1.0
        assert math.isinf(terms.obstacle_clearance)
        expected_margin = oracle_workspace_margin(candidate.grasp_pose.position, self.WORKSPACE, Pose.identity())
        assert terms.workspace_margin == pytest.approx(expected_margin, abs=1e-12)
        assert cost == pytest.approx(weights.w_margin * math.exp(-expected_margin / weights.sigma_margin))
        assert cost == candidate.total_cost == total_cost(terms, weights)

    def test_more_clearance_costs_less(self):
        candidate = self.feasible()
        position = np.asarray(candidate.grasp_pose.position)
        near = KdTree(PointCloud(points=np.atleast_2d(position + (0.02, 0.0, 0.0))))
        far = KdTree(PointCloud(points=np.atleast_2d(position + (0.5, 0.0, 0.0))))
        far_cost = score_candidate(candidate, None, far, self.WORKSPACE)
        assert far_cost < score_candidate(candidate, None, near, self.WORKSPACE)
        assert candidate.cost_terms.obstacle_clearance == pytest.approx(0.02)

    def test_available_neighbors_cost_less(self):
        candidate = self.feasible()
        without = score_candidate(candidate, None, None, self.WORKSPACE)
        assert candidate.cost_terms.pregrasp_availability == 0.0
        with_neighbor = score_candidate(candidate, None, None, self.WORKSPACE, neighbors=[candidate])
        assert without - with_neighbor == pytest.approx(ScoreWeights().w_pregrasp)

    def test_grid_neighbors(self):
        candidates = sample_cube()
        lookup = {c.grid_key: c for c in candidates}
        corner = grid_neighbors(candidates[0], lookup)
        assert sorted(c.grid_key for c in corner) == [(0, 0, 1), (0, 1, 0), (1, 0, 0)]
        inner = next(c for c in candidates if c.grid_key == (1, 4, 2))
        assert len(grid_neighbors(inner, lookup)) == 6

    def test_rank_orders_feasible_by_cost_then_index(self):
        candidates = sample_cube()[:4]
        for candidate, status, cost in zip(
            candidates,
            (GraspStatus.FEASIBLE, GraspStatus.REJECTED_WIDTH, GraspStatus.FEASIBLE, GraspStatus.FEASIBLE),
            (0.5, None, 0.2, 0.5),
        ):
            candidate.status, candidate.total_cost = status, cost
        assert [c.index for c in rank_candidates(candidates)] == [2, 0, 3, 1]


@pytest.fixture(scope="module")
def cube_plan(cube_scene):
    return plan(cube_scene, PlannerConfig())


class TestPlan:
    def test_cube_has_feasible_grasps(self, cube_plan):
        assert cube_plan.feasible_count >= 1
        assert cube_plan.selected is cube_plan.candidates[0]
        assert sum(cube_plan.status_counts().values()) == len(cube_plan.candidates) == 180

    def test_ranking_order(self, cube_plan):
        feasible = cube_plan.feasible
        keys = [(c.total_cost, c.index) for c in feasible]
        assert keys == sorted(keys)
        rejected = cube_plan.candidates[len(feasible) :]
        assert all(c.status is not GraspStatus.FEASIBLE for c in rejected)
        assert [c.index for c in rejected] == sorted(c.index for c in rejected)

    def test_selected_grasp_passes_every_oracle(self, cube_scene, cube_plan):
        selected = cube_plan.selected
        env = cube_scene.environment_cloud
        assert not oracle_collision(selected.grasp_pose, cube_scene.gripper, env)
        assert not oracle_approach_collision(selected, cube_scene.gripper, env)
        assert not oracle_width_rejected(selected.grasp_pose, cube_plan.obb, cube_scene.gripper)

    def test_selection_matches_brute_force_cost(self, cube_scene, cube_plan):
        env_cloud = cube_scene.environment_cloud
        env = KdTree(env_cloud)
        weights = ScoreWeights()
        lookup = {c.grid_key: c for c in cube_plan.candidates}
        best = None
        for candidate in cube_plan.feasible:
            neighbors = grid_neighbors(candidate, lookup)
            free = [not check_pose_collision(n.pre_grasp_pose, cube_scene.gripper, env) for n in neighbors]
            availability = float(np.mean(free)) if neighbors else 0.0
            clearance = oracle_clearance(candidate.grasp_pose.position, env_cloud)
            margin = oracle_workspace_margin(candidate.grasp_pose.position, cube_scene.workspace, cube_scene.base_pose)
            assert candidate.cost_terms.pregrasp_availability == pytest.approx(availability)
            assert candidate.cost_terms.obstacle_clearance == pytest.approx(clearance, abs=1e-12)
            assert candidate.cost_terms.workspace_margin == pytest.approx(margin, abs=1e-12)
            cost = (
                weights.w_pregrasp * (1.0 - availability)
                + weights.w_clearance * math.exp(-clearance / weights.sigma_clearance)
                + weights.w_margin * math.exp(-margin / weights.sigma_margin)
            )
            assert candidate.total_cost == pytest.approx(cost, rel=1e-12)
            if best is None or (cost, candidate.index) < best:
                best = (cost, candidate.index)
        assert cube_plan.selected.index == best[1]

    def test_scaled_weights_keep_the_selection(self, cube_scene, cube_plan):
        scaled = plan(cube_scene, PlannerConfig(weights=ScoreWeights().scaled(3.0)))
        assert scaled.selected.index == cube_plan.selected.index
        assert scaled.selected.total_cost == pytest.approx(3.0 * cube_plan.selected.total_cost, rel=1e-12)

    def test_report_does_not_depend_on_jobs(self, cube_scene):
        reports = []
        for jobs in (1, 4):
            config = PlannerConfig(jobs=jobs)
            reports.append(build_report(plan(cube_scene, config), cube_scene, config).model_dump_json())
        assert reports[0] == reports[1]

    def test_excluded_indices_are_skipped(self, cube_scene, cube_plan):
        first = cube_plan.selected.index
        retry = plan(cube_scene, PlannerConfig(), excluded_indices=[first])
        assert first not in {c.index for c in retry.candidates}
        assert retry.selected.index != first

    def test_empty_environment(self, cube_scene):
        result = plan(SceneModel(object_cloud=cube_scene.object_cloud, environment_cloud=PointCloud.empty()))
        assert result.status_counts()["rejected_collision"] == 0
        assert result.status_counts()["rejected_approach"] == 0
        assert all(math.isinf(c.cost_terms.obstacle_clearance) for c in result.feasible)

    def test_reachability_filter(self, cube_scene, small_reach_map):
        try:
            result = plan(cube_scene, PlannerConfig(), reach_map=small_reach_map)
        except NoFeasibleGraspError as e:
            result = e.result
        for candidate in result.feasible:
            assert is_reachable(small_reach_map, candidate.grasp_pose)

    def test_registration_completes_the_cube(self, cube_scene):
        model = model_cloud(ObjectSpec(shape="box", dimensions=(0.06, 0.06, 0.06), pose=Pose.identity()))
        result = plan(cube_scene, PlannerConfig(), model=model)
        assert result.registration is not None
        assert result.registration.converged
        assert result.obb.half_extents == pytest.approx((0.03, 0.03, 0.03), abs=0.003)

    def test_registration_can_be_switched_off(self, cube_scene):
        model = model_cloud(ObjectSpec(shape="box", dimensions=(0.06, 0.06, 0.06), pose=Pose.identity()))
        result = plan(cube_scene, PlannerConfig(use_registration=False), model=model)
        assert result.registration is None

    def test_tight_box_only_top_down_grasps(self, tight_box_scene):
        result = plan(tight_box_scene, PlannerConfig())
        assert result.feasible_count >= 1
        assert all(c.elevation >= math.pi / 4 for c in result.feasible)

    def test_oversized_object_has_no_grasp(self, oversized_scene):
        with pytest.raises(NoFeasibleGraspError) as info:
            plan(oversized_scene, PlannerConfig())
        result = info.value.result
        assert result is not None
        assert result.selected is None
        assert result.feasible_count == 0
        assert len(result.candidates) == 180


def assert_statuses_match_oracles(scene: SceneModel, result) -> None:
    gripper, env = scene.gripper, scene.environment_cloud
    for candidate in result.candidates:
        collides = oracle_collision(candidate.grasp_pose, gripper, env)
        assert (candidate.status is GraspStatus.REJECTED_COLLISION) == collides
        if collides:
            continue
        blocked = oracle_approach_collision(candidate, gripper, env)
        assert (candidate.status is GraspStatus.REJECTED_APPROACH) == blocked
        if blocked:
            continue
        too_wide = oracle_width_rejected(candidate.grasp_pose, result.obb, gripper)
        assert (candidate.status is GraspStatus.REJECTED_WIDTH) == too_wide
        if not too_wide:
            assert candidate.status is GraspStatus.FEASIBLE


def random_box_recipe(seed: int) -> SceneRecipe:
    """One upright box of random size, place and yaw on the default table, with random clutter and noise."""
    rng = np.random.default_rng(seed)
    size = rng.uniform(0.03, 0.07, 3)
    position = (rng.uniform(0.45, 0.75), rng.uniform(-0.2, 0.2), 0.75 + size[2] / 2.0)
    pose = Pose.from_yaw(rng.uniform(-math.pi, math.pi), position)
    return SceneRecipe(
        seed=seed,
        objects=[ObjectSpec(shape="box", dimensions=tuple(size), pose=pose)],
        clutter_density=float(rng.choice([0.0, 500.0, 2000.0])),
        sensor_noise_sigma=float(rng.choice([0.0, 0.0005, 0.001])),
    )


@pytest.mark.slow
def test_filter_statuses_agree_with_oracles(cube_scene, cube_plan):
    assert_statuses_match_oracles(cube_scene, cube_plan)


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(50))
def test_filter_statuses_agree_with_oracles_on_generated_scenes(seed):
    scene = generate_scene(random_box_recipe(seed))
    try:
        result = plan(scene, PlannerConfig())
    except NoFeasibleGraspError as e:
        result = e.result
    assert len(result.candidates) == 180
    assert_statuses_match_oracles(scene, result)
