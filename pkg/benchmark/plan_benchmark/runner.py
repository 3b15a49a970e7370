"""Benchmark runner: plans every fixture for every seed and worker count."""

import hashlib
import logging
import time
import uuid
from datetime import datetime

from grasp_proposals.bench import run_bench
from grasp_proposals.core.exceptions import GraspPlanningError, NoFeasibleGraspError
from grasp_proposals.core.models import PlannerConfig
from grasp_proposals.core.planner import plan
from grasp_proposals.harness.fixtures import FIXTURES
from grasp_proposals.harness.scene_generation import generate_scene
from grasp_proposals.io.report import build_report

from .models import BenchmarkConfig, BenchmarkReport, FixtureRun

logger = logging.getLogger(__name__)


class BenchmarkRunner:
    """Runs the planner across fixtures, seeds and worker counts."""

    def __init__(self, config: BenchmarkConfig, planner: PlannerConfig | None = None):
        unknown = [name for name in config.fixtures if name not in FIXTURES]
        if unknown:
            raise ValueError(f"Unknown fixtures {unknown}, available: {list(FIXTURES)}")
        self.config = config
        self.planner = planner or PlannerConfig()
        self.benchmark_id = f"benchmark_{datetime.now().strftime('%Y%m%d_%H%M%S')}_{uuid.uuid4().hex[:8]}"
        self.report = BenchmarkReport(benchmark_id=self.benchmark_id, start_time=datetime.now())

    def run_single(self, fixture: str, seed: int, jobs: int) -> FixtureRun:
        result = FixtureRun(fixture=fixture, seed=seed, jobs=jobs)
        try:
            scene = generate_scene(FIXTURES[fixture](seed))
            config = self.planner.model_copy(update={"jobs": jobs})
            result.object_points = len(scene.object_cloud)
            result.environment_points = 0 if scene.environment_cloud is None else len(scene.environment_cloud)

            try:
                planned = plan(scene, config)
            except NoFeasibleGraspError as e:
                planned = e.result
            report = build_report(planned, scene, config)
            result.report_digest = hashlib.sha256(report.model_dump_json().encode("utf-8")).hexdigest()
            result.selected_index = None if planned.selected is None else planned.selected.index

            summary = run_bench(scene, config, self.config.repeats)
            result.feasible = summary.feasible
            result.feasible_count = summary.feasible_count
            result.stages = summary.stages
        except (GraspPlanningError, ValueError) as e:
            result.error_message = str(e)
            logger.error(f"Fixture '{fixture}' (seed {seed}, {jobs} jobs) failed: {e}")
        return result

    def run(self) -> BenchmarkReport:
        started = time.time()
        for fixture in self.config.fixtures:
            for seed in self.config.seeds:
                for jobs in self.config.jobs:
                    logger.info(f"Running fixture '{fixture}' seed {seed} with {jobs} jobs")
                    run = self.run_single(fixture, seed, jobs)
                    self.report.runs.append(run)
                    logger.info(
                        f"Fixture '{fixture}' seed {seed} jobs {jobs}: feasible={run.feasible}, "
                        f"median total {run.median_total_seconds * 1e3:.1f} ms"
                    )
        self.report.end_time = datetime.now()
        self.report.total_duration_seconds = time.time() - started

        for fixture, seed in self.report.inconsistent():
            logger.error(f"Fixture '{fixture}' seed {seed}: report differs between worker counts")
        return self.report
