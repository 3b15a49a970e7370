"""Grasp outcome classification from encoder readings and the retry / handover policy."""

from __future__ import annotations

import logging
from enum import Enum
from typing import Sequence

from pydantic import BaseModel, ConfigDict, Field

from grasp_proposals.core.exceptions import (
    EmptyHistoryError,
    NoFeasibleGraspError,
    OutOfRangeError,
    UnclassifiedAttemptError,
)
from grasp_proposals.core.geometry import PointCloud
from grasp_proposals.core.models import GripperSpec, PlannerConfig, SceneModel
from grasp_proposals.core.planner import PlanResult, plan
from grasp_proposals.core.reachability import BaseAlignmentParams, ReachabilityMap
from grasp_proposals.core.registration import RegistrationParams

logger = logging.getLogger(__name__)


class GraspOutcome(str, Enum):
    SUCCESS = "success"
    EMPTY_CLOSE = "empty_close"
    SLIP = "slip"
    PENDING = "pending"


class NextAction(str, Enum):
    PROCEED = "proceed"
    RETRY_GRASP = "retry_grasp"
    HANDOVER = "handover"


class SupervisorPolicy(BaseModel):
    """Thresholds for judging a closed gripper and the failure budget before handover."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    min_grasp_width: float = Field(default=0.005, gt=0.0, description="Below this the fingers closed on nothing (m)")
    width_tolerance: float = Field(default=0.5, ge=0.0, description="Accepted deviation as a fraction of expected")
    max_retries: int = Field(default=2, ge=0, description="Failures tolerated before handing over")


class GraspAttemptRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    attempt_index: int = Field(ge=1)
    encoder_width: float = Field(ge=0.0, description="Opening reported after the close command (m)")
    expected_width: float = Field(gt=0.0, description="Object extent along the closing axis (m)")
    outcome: GraspOutcome = GraspOutcome.PENDING
    candidate_index: int | None = Field(default=None, description="Sample index of the attempted grasp")


def classify_outcome(
    encoder_width: float, expected_width: float, policy: SupervisorPolicy, gripper: GripperSpec | None = None
) -> GraspOutcome:
    """Judge one close against the opening range of ``gripper`` (the default gripper when None)."""
    max_opening = (gripper or GripperSpec()).max_opening
    if policy.min_grasp_width >= max_opening:
        raise OutOfRangeError(f"min_grasp_width {policy.min_grasp_width} is not below the opening {max_opening}")
    if not 0.0 <= encoder_width <= max_opening:
        raise OutOfRangeError(f"Encoder width {encoder_width} outside [0, {max_opening}]")
    if not 0.0 < expected_width <= max_opening:
        raise OutOfRangeError(f"Expected width {expected_width} outside (0, {max_opening}]")
    if encoder_width < policy.min_grasp_width:
        return GraspOutcome.EMPTY_CLOSE
    if abs(encoder_width - expected_width) <= policy.width_tolerance * expected_width:
        return GraspOutcome.SUCCESS
    return GraspOutcome.SLIP


def next_action(history: Sequence[GraspAttemptRecord], policy: SupervisorPolicy) -> NextAction:
    if not history:
        raise EmptyHistoryError("No grasp attempts recorded")
    last = history[-1]
    if last.outcome is GraspOutcome.PENDING:
        raise UnclassifiedAttemptError(f"Attempt {last.attempt_index} has not been classified")
    if last.outcome is GraspOutcome.SUCCESS:
        return NextAction.PROCEED
    failures = sum(1 for record in history if record.outcome in (GraspOutcome.EMPTY_CLOSE, GraspOutcome.SLIP))
    return NextAction.RETRY_GRASP if failures <= policy.max_retries else NextAction.HANDOVER


class SupervisionReport(BaseModel):
    attempts: list[GraspAttemptRecord] = Field(default_factory=list)
    action: NextAction | None = Field(default=None, description="Final decision; None when readings ran out")
    readings_exhausted: bool = False
    last_plan: PlanResult | None = Field(default=None, exclude=True)


class GraspSupervisor:
    """Runs one manipulation episode against a scripted sequence of encoder readings.

    Each retry plans again with every previously attempted sample index excluded.
    """

    def __init__(
        self,
        policy: SupervisorPolicy | None = None,
        config: PlannerConfig | None = None,
        reach_map: ReachabilityMap | None = None,
        model: PointCloud | None = None,
        registration: RegistrationParams | None = None,
        base_alignment: BaseAlignmentParams | None = None,
    ):
        self.policy = policy or SupervisorPolicy()
        self.config = config or PlannerConfig()
        self.reach_map = reach_map
        self.model = model
        self.registration = registration
        self.base_alignment = base_alignment

    def run(self, scene: SceneModel, encoder_readings: Sequence[float]) -> SupervisionReport:
        report = SupervisionReport()
        excluded: set[int] = set()
        readings = list(encoder_readings)

        while True:
            try:
                result = plan(
                    scene,
                    self.config,
                    reach_map=self.reach_map,
                    model=self.model,
                    registration=self.registration,
                    excluded_indices=excluded,
                    base_alignment=self.base_alignment,
                )
            except NoFeasibleGraspError:
                logger.warning("No untried feasible grasp left after %d attempts, handing over", len(report.attempts))
                report.action = NextAction.HANDOVER
                return report
            report.last_plan = result
            selected = result.selected

            if len(report.attempts) >= len(readings):
                logger.warning("Encoder readings exhausted after %d attempts", len(report.attempts))
                report.readings_exhausted = True
                return report

            attempt_index = len(report.attempts) + 1
            encoder_width = readings[attempt_index - 1]
            outcome = classify_outcome(encoder_width, selected.closing_extent, self.policy, scene.gripper)
            report.attempts.append(
                GraspAttemptRecord(
                    attempt_index=attempt_index,
                    encoder_width=encoder_width,
                    expected_width=selected.closing_extent,
                    outcome=outcome,
                    candidate_index=selected.index,
                )
            )
            action = next_action(report.attempts, self.policy)
            logger.info(
                "Attempt %d with candidate #%d: encoder %.4f m, expected %.4f m -> %s, %s",
                attempt_index, selected.index, encoder_width, selected.closing_extent, outcome.value, action.value,
            )
            if action is not NextAction.RETRY_GRASP:
                report.action = action
                return report
            excluded.add(selected.index)
