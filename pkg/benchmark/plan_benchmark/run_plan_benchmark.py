#!/usr/bin/env python3
"""
Planning Benchmark Runner - plan every fixture across seeds and worker counts.

Usage:
    python -m benchmark.plan_benchmark.run_plan_benchmark --output-dir ./results

    # Specific fixtures and worker counts
    python -m benchmark.plan_benchmark.run_plan_benchmark --fixtures cube_on_table --jobs 1 2 4
"""

import argparse
import logging
import sys

from grasp_proposals.harness.fixtures import FIXTURES

from .models import BenchmarkConfig
from .reports import ReportGenerator
from .runner import BenchmarkRunner

logging.basicConfig(level=logging.INFO, format="%(asctime)s - %(name)s - %(levelname)s - %(message)s")
logger = logging.getLogger(__name__)


def parse_args():
    parser = argparse.ArgumentParser(description="Benchmark grasp planning on the synthetic fixtures")
    parser.add_argument(
        "--fixtures", type=str, nargs="+", default=list(FIXTURES), help=f"Fixtures to run (default: {list(FIXTURES)})"
    )
    parser.add_argument("--seeds", type=int, nargs="+", default=[0], help="Scene seeds (default: 0)")
    parser.add_argument("--jobs", type=int, nargs="+", default=[1, 4], help="Worker counts (default: 1 4)")
    parser.add_argument("--repeats", type=int, default=5, help="Planning runs per configuration (default: 5)")
    parser.add_argument(
        "--output-dir", type=str, default="benchmark_results", help="Output directory (default: benchmark_results)"
    )
    return parser.parse_args()


def main():
    args = parse_args()
    config = BenchmarkConfig(
        fixtures=args.fixtures,
        seeds=args.seeds,
        jobs=args.jobs,
        repeats=args.repeats,
        output_directory=args.output_dir,
    )
    try:
        runner = BenchmarkRunner(config)
    except ValueError as e:
        print(f"Error: {e}")
        sys.exit(1)

    report = runner.run()
    paths = ReportGenerator(report, config.output_directory).generate_all()

    print(paths["summary"].read_text(encoding="utf-8"))
    for report_type, path in paths.items():
        print(f"  {report_type:<10}: {path}")
    if report.inconsistent():
        sys.exit(1)


if __name__ == "__main__":
    main()
