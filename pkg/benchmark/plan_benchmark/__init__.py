"""Planning benchmark over the synthetic fixtures and worker counts."""

from .models import BenchmarkConfig, BenchmarkReport, FixtureRun
from .reports import ReportGenerator
from .runner import BenchmarkRunner

__all__ = [
    "BenchmarkConfig",
    "BenchmarkReport",
    "FixtureRun",
    "BenchmarkRunner",
    "ReportGenerator",
]
