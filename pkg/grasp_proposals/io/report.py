"""Grasp report (JSON) and the colored debug point-cloud export."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
from pydantic import BaseModel, Field

from grasp_proposals.core.models import GraspCandidate, GraspStatus, PlannerConfig, SceneModel
from grasp_proposals.core.planner import PlanResult
from grasp_proposals.core.supervisor import SupervisionReport
from grasp_proposals.io.point_cloud_io import write_point_cloud

logger = logging.getLogger(__name__)

REPORT_VERSION = 1

ENVIRONMENT_COLOR = (150, 150, 150)
OBJECT_COLOR = (40, 180, 60)
AXIS_COLORS = ((230, 30, 30), (30, 200, 30), (30, 60, 230))


class CandidateRow(BaseModel):
    index: int
    polar_index: int
    azimuth_index: int
    twist_index: int
    status: GraspStatus
    position: tuple[float, float, float]
    orientation: tuple[float, float, float, float]
    pre_grasp_position: tuple[float, float, float]
    twist_angle: float
    closing_extent: float | None = None
    pregrasp_availability: float | None = None
    obstacle_clearance: float | None = Field(default=None, description="null when the environment is empty")
    workspace_margin: float | None = None
    total_cost: float | None = None

    @classmethod
    def from_candidate(cls, candidate: GraspCandidate) -> CandidateRow:
        terms = candidate.cost_terms
        clearance = None if terms is None or not np.isfinite(terms.obstacle_clearance) else terms.obstacle_clearance
        return cls(
            index=candidate.index,
            polar_index=candidate.polar_index,
            azimuth_index=candidate.azimuth_index,
            twist_index=candidate.twist_index,
            status=candidate.status,
            position=candidate.grasp_pose.position,
            orientation=candidate.grasp_pose.orientation,
            pre_grasp_position=candidate.pre_grasp_pose.position,
            twist_angle=candidate.twist_angle,
            closing_extent=candidate.closing_extent,
            pregrasp_availability=None if terms is None else terms.pregrasp_availability,
            obstacle_clearance=clearance,
            workspace_margin=None if terms is None else terms.workspace_margin,
            total_cost=candidate.total_cost,
        )


class GraspReport(BaseModel):
    """Everything ``plan`` decided, in ranked order; ``timings`` only when requested."""

    version: int = REPORT_VERSION
    config: dict
    object_label: str | None = None
    object_points: int
    environment_points: int
    obb: dict
    com: tuple[float, float, float]
    base_pose: dict
    registration: dict | None = None
    status_counts: dict[str, int]
    feasible_count: int
    selected: int | None = Field(default=None, description="Sample index of the selected candidate")
    candidates: list[CandidateRow]
    supervision: dict | None = None
    timings: dict[str, float] | None = None


def build_report(
    result: PlanResult,
    scene: SceneModel,
    config: PlannerConfig,
    include_timings: bool = False,
    supervision: SupervisionReport | None = None,
) -> GraspReport:
    registration = None
    if result.registration is not None:
        registration = result.registration.model_dump(mode="json", exclude={"rmse_history"})
    return GraspReport(
        config=config.model_dump(mode="json", exclude={"jobs"}),
        object_label=scene.object_label,
        object_points=len(scene.object_cloud),
        environment_points=0 if scene.environment_cloud is None else len(scene.environment_cloud),
        obb=result.obb.model_dump(mode="json"),
        com=result.com,
        base_pose=result.base_pose.model_dump(mode="json"),
        registration=registration,
        status_counts=result.status_counts(),
        feasible_count=sum(1 for c in result.candidates if c.status is GraspStatus.FEASIBLE),
        selected=None if result.selected is None else result.selected.index,
        candidates=[CandidateRow.from_candidate(c) for c in result.candidates],
        supervision=None if supervision is None else supervision.model_dump(mode="json"),
        timings=dict(result.timings) if include_timings else None,
    )


def write_report(path: str | Path, report: GraspReport) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(report.model_dump_json(indent=2, exclude_none=False))
        f.write("\n")
    logger.info("Report saved to %s", path)
    return path


def write_debug_export(
    path: str | Path, scene: SceneModel, selected: GraspCandidate | None, axis_length: float = 0.1
) -> Path:
    """Environment, object and the selected grasp frame axes as colored points."""
    parts = []
    if scene.environment_cloud is not None:
        parts.append((scene.environment_cloud.points, ENVIRONMENT_COLOR))
    parts.append((scene.object_cloud.points, OBJECT_COLOR))
    if selected is not None:
        origin = np.asarray(selected.grasp_pose.position)
        steps = np.linspace(0.0, axis_length, 50)[:, None]
        for axis, color in enumerate(AXIS_COLORS):
            parts.append((origin + steps * selected.grasp_pose.axis(axis), color))

    points = np.concatenate([p for p, _ in parts])
    colors = np.concatenate([np.tile(c, (len(p), 1)) for p, c in parts])
    return write_point_cloud(path, points, colors=colors)
