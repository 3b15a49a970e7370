import json

import pytest

from grasp_proposals.core.models import GraspStatus, PlannerConfig
from grasp_proposals.core.planner import plan
from grasp_proposals.io.point_cloud_io import read_point_cloud
from grasp_proposals.io.report import build_report, write_debug_export, write_report


@pytest.fixture(scope="module")
def cube_result(cube_scene):
    return plan(cube_scene)


def test_report_mirrors_the_plan(cube_scene, cube_result):
    report = build_report(cube_result, cube_scene, PlannerConfig())
    assert report.selected == cube_result.selected.index
    assert report.candidates[0].index == cube_result.selected.index
    assert len(report.candidates) == len(cube_result.candidates)
    assert report.feasible_count == cube_result.feasible_count
    assert report.status_counts[GraspStatus.FEASIBLE.value] == cube_result.feasible_count
    assert report.object_points == len(cube_scene.object_cloud)
    assert report.timings is None
    assert "jobs" not in report.config


def test_timings_only_on_request(cube_scene, cube_result):
    report = build_report(cube_result, cube_scene, PlannerConfig(), include_timings=True)
    assert set(report.timings) == set(cube_result.timings)


def test_empty_environment_has_null_clearance(tmp_path, cube_scene):
    bare = cube_scene.model_copy(update={"environment_cloud": None})
    report = build_report(plan(bare), bare, PlannerConfig())
    path = write_report(tmp_path / "out" / "report.json", report)
    data = json.loads(path.read_text())
    assert data["environment_points"] == 0
    feasible = [row for row in data["candidates"] if row["status"] == GraspStatus.FEASIBLE.value]
    assert feasible
    assert all(row["obstacle_clearance"] is None for row in feasible)
    assert all(row["total_cost"] is not None for row in feasible)


def test_rejected_rows_have_no_cost(cube_scene, cube_result):
    report = build_report(cube_result, cube_scene, PlannerConfig())
    rejected = [row for row in report.candidates if row.status is not GraspStatus.FEASIBLE]
    assert rejected
    assert all(row.total_cost is None for row in rejected)


def test_debug_export(tmp_path, cube_scene, cube_result):
    path = write_debug_export(tmp_path / "debug.ply", cube_scene, cube_result.selected)
    exported = read_point_cloud(path).cloud
    assert len(exported) == len(cube_scene.object_cloud) + len(cube_scene.environment_cloud) + 150


def test_debug_export_without_selection(tmp_path, cube_scene):
    path = write_debug_export(tmp_path / "debug.ply", cube_scene, None)
    assert len(read_point_cloud(path).cloud) == len(cube_scene.object_cloud) + len(cube_scene.environment_cloud)
