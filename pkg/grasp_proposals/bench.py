"""Repeated planning runs with per-stage timing statistics."""

import logging
import time

import pandas as pd
from pydantic import BaseModel, Field

from grasp_proposals.core.exceptions import NoFeasibleGraspError
from grasp_proposals.core.geometry import PointCloud
from grasp_proposals.core.models import PlannerConfig, SceneModel
from grasp_proposals.core.planner import PlanResult, plan
from grasp_proposals.core.reachability import BaseAlignmentParams, ReachabilityMap
from grasp_proposals.core.registration import RegistrationParams

logger = logging.getLogger(__name__)


class StageStats(BaseModel):
    stage: str
    min_seconds: float
    median_seconds: float
    max_seconds: float


class BenchSummary(BaseModel):
    """Timing summary over ``repeats`` identical planning runs."""

    repeats: int = Field(description="Number of planning runs")
    jobs: int = Field(description="Planner worker threads")
    feasible: bool = Field(description="Whether the scene has a feasible grasp")
    feasible_count: int = Field(default=0, description="Feasible candidates in the last run")
    stages: list[StageStats] = Field(default_factory=list, description="Per-stage timings, pipeline order")

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([s.model_dump() for s in self.stages]).set_index("stage")


def stage_statistics(timings: list[dict[str, float]]) -> list[StageStats]:
    """Min / median / max per stage; stage order follows the first run."""
    frame = pd.DataFrame(timings)
    described = frame.agg(["min", "median", "max"]).T
    return [
        StageStats(
            stage=str(stage),
            min_seconds=float(row["min"]),
            median_seconds=float(row["median"]),
            max_seconds=float(row["max"]),
        )
        for stage, row in described.iterrows()
    ]


def run_bench(
    scene: SceneModel,
    config: PlannerConfig,
    repeats: int = 5,
    *,
    reach_map: ReachabilityMap | None = None,
    model: PointCloud | None = None,
    registration: RegistrationParams | None = None,
    base_alignment: BaseAlignmentParams | None = None,
) -> BenchSummary:
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")

    timings: list[dict[str, float]] = []
    result: PlanResult | None = None
    for run in range(repeats):
        started = time.perf_counter()
        try:
            result = plan(
                scene, config, reach_map=reach_map, model=model, registration=registration,
                base_alignment=base_alignment,
            )
        except NoFeasibleGraspError as e:
            result = e.result
        run_timings = dict(result.timings)
        run_timings["total"] = time.perf_counter() - started
        timings.append(run_timings)
        logger.debug("Bench run %d/%d took %.4f s", run + 1, repeats, run_timings["total"])

    return BenchSummary(
        repeats=repeats,
        jobs=config.jobs,
        feasible=result.selected is not None,
        feasible_count=result.feasible_count,
        stages=stage_statistics(timings),
    )
