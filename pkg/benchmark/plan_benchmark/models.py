"""Data models for the planning benchmark."""

from datetime import datetime
from typing import Optional

from pydantic import BaseModel, Field

from grasp_proposals.bench import StageStats


class BenchmarkConfig(BaseModel):
    """Configuration for benchmark execution."""

    fixtures: list[str] = Field(description="Fixture names to plan on")
    seeds: list[int] = Field(default_factory=lambda: [0], description="Scene generation seeds")
    jobs: list[int] = Field(default_factory=lambda: [1, 4], description="Planner worker counts to compare")
    repeats: int = Field(default=5, ge=1, description="Planning runs per fixture, seed and worker count")
    output_directory: str = Field(default="benchmark_results", description="Output directory for reports")


class FixtureRun(BaseModel):
    """Timings and outcome for one fixture / seed / worker count."""

    fixture: str = Field(description="Fixture name")
    seed: int = Field(description="Scene generation seed")
    jobs: int = Field(description="Planner worker threads")
    object_points: int = Field(default=0, description="Object cloud size")
    environment_points: int = Field(default=0, description="Environment cloud size")
    feasible: bool = Field(default=False, description="Whether a grasp was selected")
    feasible_count: int = Field(default=0, description="Feasible candidates")
    selected_index: Optional[int] = Field(default=None, description="Sample index of the selected grasp")
    report_digest: str = Field(default="", description="SHA-256 of the report without timings")
    stages: list[StageStats] = Field(default_factory=list, description="Per-stage timings")
    error_message: Optional[str] = Field(default=None, description="Error message if the run failed")

    @property
    def median_total_seconds(self) -> float:
        return next((s.median_seconds for s in self.stages if s.stage == "total"), 0.0)


class BenchmarkReport(BaseModel):
    """Complete benchmark report across all fixtures."""

    benchmark_id: str = Field(description="Unique benchmark run identifier")
    start_time: datetime = Field(description="Benchmark start time")
    end_time: Optional[datetime] = Field(default=None, description="Benchmark end time")
    total_duration_seconds: float = Field(default=0.0, description="Total benchmark duration")
    runs: list[FixtureRun] = Field(default_factory=list, description="Results per fixture, seed and worker count")

    def inconsistent(self) -> list[tuple[str, int]]:
        """Fixture / seed pairs whose report differs between worker counts."""
        digests: dict[tuple[str, int], set[str]] = {}
        for run in self.runs:
            if run.error_message is None:
                digests.setdefault((run.fixture, run.seed), set()).add(run.report_digest)
        return sorted(key for key, values in digests.items() if len(values) > 1)
