"""Report generation for benchmark results."""

import json
import logging
from pathlib import Path

import pandas as pd

from .models import BenchmarkReport

logger = logging.getLogger(__name__)


class ReportGenerator:
    """Generates JSON, text summary and CSV reports from benchmark results."""

    def __init__(self, report: BenchmarkReport, output_dir: str = "benchmark_results"):
        self.report = report
        self.output_dir = Path(output_dir) / report.benchmark_id
        self.output_dir.mkdir(parents=True, exist_ok=True)

    def generate_all(self) -> dict[str, Path]:
        """Generate all report formats and return paths."""
        return {
            "json": self.generate_json_report(),
            "summary": self.generate_summary_report(),
            "csv": self.generate_csv_report(),
        }

    def to_frame(self) -> pd.DataFrame:
        """One row per run and stage."""
        rows = [
            {
                "fixture": run.fixture,
                "seed": run.seed,
                "jobs": run.jobs,
                "feasible": run.feasible,
                "feasible_count": run.feasible_count,
                **stage.model_dump(),
            }
            for run in self.report.runs
            for stage in run.stages
        ]
        return pd.DataFrame(rows)

    def generate_json_report(self) -> Path:
        filepath = self.output_dir / f"{self.report.benchmark_id}_full.json"
        with open(filepath, "w", encoding="utf-8") as f:
            json.dump(self.report.model_dump(mode="json"), f, indent=2, default=str)
        logger.info(f"JSON report saved: {filepath}")
        return filepath

    def generate_summary_report(self) -> Path:
        """Generate human-readable summary report."""
        filepath = self.output_dir / f"{self.report.benchmark_id}_summary.txt"

        lines = [
            "=" * 80,
            "PLANNING BENCHMARK SUMMARY REPORT",
            "=" * 80,
            "",
            f"Benchmark ID: {self.report.benchmark_id}",
            f"Start Time: {self.report.start_time}",
            f"End Time: {self.report.end_time}",
            f"Total Duration: {self.report.total_duration_seconds:.2f} seconds",
            f"Runs: {len(self.report.runs)}",
            "",
        ]

        header = (
            f"| {'Fixture':<16} | {'Seed':>4} | {'Jobs':>4} | {'Feasible':<8} "
            f"| {'Count':>5} | {'Selected':>8} | {'Median total':>12} |"
        )
        lines.append(header)
        lines.append("|" + "|".join("-" * len(cell) for cell in header.split("|")[1:-1]) + "|")
        for run in self.report.runs:
            selected = "-" if run.selected_index is None else str(run.selected_index)
            lines.append(
                f"| {run.fixture:<16} | {run.seed:>4} | {run.jobs:>4} | {str(run.feasible):<8} "
                f"| {run.feasible_count:>5} | {selected:>8} | {run.median_total_seconds * 1e3:>9.1f} ms |"
            )

        failed = [run for run in self.report.runs if run.error_message]
        if failed:
            lines.extend(["", "-" * 80, "FAILED RUNS", "-" * 80])
            lines.extend(f"  - {run.fixture} (seed {run.seed}, {run.jobs} jobs): {run.error_message}" for run in failed)

        inconsistent = self.report.inconsistent()
        lines.extend(["", "-" * 80, "DETERMINISM ACROSS WORKER COUNTS", "-" * 80])
        if inconsistent:
            lines.extend(f"  - {fixture} seed {seed}: reports differ" for fixture, seed in inconsistent)
        else:
            lines.append("  All reports identical")
        lines.append("=" * 80)

        filepath.write_text("\n".join(lines) + "\n", encoding="utf-8")
        logger.info(f"Summary report saved: {filepath}")
        return filepath

    def generate_csv_report(self) -> Path:
        """Generate CSV report for spreadsheet analysis."""
        filepath = self.output_dir / f"{self.report.benchmark_id}_results.csv"
        self.to_frame().to_csv(filepath, index=False)
        logger.info(f"CSV report saved: {filepath}")
        return filepath
