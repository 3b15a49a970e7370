"""
Command-line interface for grasp-proposals.

Exit codes: 0 feasible grasp (or command succeeded), 2 no feasible grasp,
1 any input or configuration error. Errors go to standard error.
"""

import logging
from pathlib import Path
from typing import Optional

import typer
import yaml
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from grasp_proposals.bench import run_bench
from grasp_proposals.core.exceptions import GraspPlanningError, NoFeasibleGraspError, SceneFileError
from grasp_proposals.core.geometry import PointCloud
from grasp_proposals.core.models import GraspStatus, SceneModel
from grasp_proposals.core.planner import PlanResult, plan
from grasp_proposals.core.reachability import ReachabilityMap, build_reachability_map
from grasp_proposals.core.supervisor import GraspSupervisor, SupervisionReport
from grasp_proposals.harness.fixtures import FIXTURES
from grasp_proposals.harness.scene_generation import SceneRecipe, generate_scene
from grasp_proposals.io.model_library import ModelLibrary
from grasp_proposals.io.reachmap_file import load_reachability_map, save_reachability_map
from grasp_proposals.io.report import build_report, write_debug_export, write_report
from grasp_proposals.io.scene_file import load_scene, write_scene
from grasp_proposals.settings import AppConfig, get_config, load_config

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_NO_GRASP = 2

INPUT_ERRORS = (GraspPlanningError, FileNotFoundError, ValidationError, ValueError, OSError)

app = typer.Typer(help="Grasp-proposal planning from segmented point clouds.", no_args_is_help=True)
console = Console()
err_console = Console(stderr=True)

logger = logging.getLogger(__name__)


def _fail(message: str) -> None:
    err_console.print(f"[red]Error:[/red] {message}", highlight=False)
    raise typer.Exit(EXIT_INPUT_ERROR)


def _config(path: Path | None) -> AppConfig:
    return load_config(path) if path is not None else get_config()


def _model_for(scene: SceneModel, model_dir: str | None) -> PointCloud | None:
    if model_dir is None or scene.object_label is None:
        return None
    return ModelLibrary(model_dir).get(scene.object_label)


def _reach_map(path: Path | None) -> ReachabilityMap | None:
    return load_reachability_map(path) if path is not None else None


def _print_summary(result: PlanResult) -> None:
    table = Table(title="Grasp candidates")
    table.add_column("Status")
    table.add_column("Count", justify="right")
    for status, count in result.status_counts().items():
        table.add_row(status, str(count))
    console.print(table)
    if result.selected is not None:
        console.print(f"[bold green]Selected[/bold green] {result.selected}", highlight=False)


def _load_recipe(value: str) -> SceneRecipe:
    if value in FIXTURES:
        return FIXTURES[value]()
    path = Path(value)
    if not path.is_file():
        raise FileNotFoundError(f"Recipe not found (neither a fixture nor a file): {value}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            return SceneRecipe.model_validate(yaml.safe_load(f))
    except yaml.YAMLError as e:
        raise SceneFileError(f"{path}: invalid YAML: {e}") from e
    except ValidationError as e:
        raise SceneFileError(f"{path}: {e.errors()[0]['msg']}") from e


@app.command("plan")
def plan_command(
    scene_path: Path = typer.Option(..., "--scene", "-s", help="Scene file (YAML)"),
    config_path: Optional[Path] = typer.Option(None, "--config", "-c", help="Config file (YAML)"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Report path (JSON)"),
    model_dir: Optional[str] = typer.Option(None, "--model-dir", help="Model library for registration"),
    reachmap: Optional[Path] = typer.Option(None, "--reachmap", help="Precomputed reachability map"),
    jobs: Optional[int] = typer.Option(None, "--jobs", "-j", min=1, help="Planner worker threads"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Shift the sampling grid by a seeded sub-cell offset"),
    debug_export: Optional[Path] = typer.Option(None, "--debug-export", help="Colored point cloud of the result (PLY)"),
    timings: bool = typer.Option(False, "--timings", help="Include per-stage timings in the report"),
    supervise: bool = typer.Option(False, "--supervise", help="Run the retry policy on the scene's encoder readings"),
):
    """Plan grasps for a scene and write the ranked report."""
    try:
        config = _config(config_path)
        planner_config = config.planner if jobs is None else config.planner.model_copy(update={"jobs": jobs})
        if seed is not None:
            sampling = planner_config.sampling.model_copy(update={"seed": seed})
            planner_config = planner_config.model_copy(update={"sampling": sampling})
        loaded = load_scene(scene_path)
        model = _model_for(loaded.scene, model_dir or config.registration.model_dir)
        reach_map = _reach_map(reachmap)
    except INPUT_ERRORS as e:
        _fail(str(e))

    registration = config.registration
    base_alignment = config.reachability.base_alignment
    exit_code = EXIT_OK
    try:
        result = plan(
            loaded.scene, planner_config, reach_map=reach_map, model=model, registration=registration,
            base_alignment=base_alignment,
        )
    except NoFeasibleGraspError as e:
        err_console.print(f"[yellow]No feasible grasp:[/yellow] {e}", highlight=False)
        result, exit_code = e.result, EXIT_NO_GRASP
    except INPUT_ERRORS as e:
        _fail(str(e))

    supervision: SupervisionReport | None = None
    if supervise and exit_code == EXIT_OK:
        supervisor = GraspSupervisor(
            config.supervisor, planner_config, reach_map, model, registration, base_alignment
        )
        try:
            supervision = supervisor.run(loaded.scene, loaded.document.encoder_readings)
        except INPUT_ERRORS as e:
            _fail(str(e))
        console.print(
            f"Supervision: {len(supervision.attempts)} attempts, action "
            f"{supervision.action.value if supervision.action else 'none (readings exhausted)'}",
            highlight=False,
        )

    out = out or Path(config.execution.reports_dir) / f"{scene_path.stem}_grasps.json"
    report = build_report(result, loaded.scene, planner_config, include_timings=timings, supervision=supervision)
    write_report(out, report)
    if debug_export is not None:
        write_debug_export(debug_export, loaded.scene, result.selected)

    _print_summary(result)
    console.print(f"Report: {out}", highlight=False)
    raise typer.Exit(exit_code)


@app.command("gen-scene")
def gen_scene_command(
    recipe: str = typer.Option(..., "--recipe", "-r", help=f"Recipe file (YAML) or fixture: {', '.join(FIXTURES)}"),
    out: Path = typer.Option(..., "--out", "-o", help="Scene file to write (YAML)"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Override the recipe seed"),
):
    """Generate a synthetic scene from a recipe."""
    try:
        scene_recipe = _load_recipe(recipe)
        if seed is not None:
            scene_recipe = scene_recipe.model_copy(update={"seed": seed})
        scene = generate_scene(scene_recipe)
    except INPUT_ERRORS as e:
        _fail(str(e))

    write_scene(out, scene, recipe=scene_recipe)
    console.print(
        f"Scene: {out} ({len(scene.object_cloud)} object points, "
        f"{0 if scene.environment_cloud is None else len(scene.environment_cloud)} environment points)",
        highlight=False,
    )


@app.command("build-reachmap")
def build_reachmap_command(
    config_path: Optional[Path] = typer.Option(None, "--config", "-c", help="Config file (YAML)"),
    out: Path = typer.Option(Path("reachmap.bin"), "--out", "-o", help="Map file to write"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Override the sampling seed"),
    jobs: int = typer.Option(1, "--jobs", "-j", min=1, help="Sampling worker threads"),
    samples: Optional[int] = typer.Option(None, "--samples", help="Override the number of joint samples"),
):
    """Precompute the reachability map for the configured arm."""
    try:
        settings = _config(config_path).reachability
        reach_map = build_reachability_map(
            settings.arm,
            resolution=settings.resolution,
            direction_bins_count=settings.direction_bins,
            samples=settings.samples if samples is None else samples,
            seed=settings.seed if seed is None else seed,
            jobs=jobs,
        )
    except INPUT_ERRORS as e:
        _fail(str(e))

    save_reachability_map(out, reach_map)
    console.print(
        f"Reachability map: {out} grid {reach_map.shape}, {100.0 * reach_map.reachable_fraction():.2f}% reachable",
        highlight=False,
    )


@app.command("bench")
def bench_command(
    scene_path: Path = typer.Option(..., "--scene", "-s", help="Scene file (YAML)"),
    config_path: Optional[Path] = typer.Option(None, "--config", "-c", help="Config file (YAML)"),
    repeats: int = typer.Option(5, "--repeats", "-n", min=1, help="Planning runs"),
    jobs: Optional[int] = typer.Option(None, "--jobs", "-j", min=1, help="Planner worker threads"),
    model_dir: Optional[str] = typer.Option(None, "--model-dir", help="Model library for registration"),
    reachmap: Optional[Path] = typer.Option(None, "--reachmap", help="Precomputed reachability map"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Write the summary as CSV"),
):
    """Time repeated planning runs per pipeline stage."""
    try:
        config = _config(config_path)
        planner_config = config.planner if jobs is None else config.planner.model_copy(update={"jobs": jobs})
        loaded = load_scene(scene_path)
        summary = run_bench(
            loaded.scene,
            planner_config,
            repeats,
            reach_map=_reach_map(reachmap),
            model=_model_for(loaded.scene, model_dir or config.registration.model_dir),
            registration=config.registration,
            base_alignment=config.reachability.base_alignment,
        )
    except INPUT_ERRORS as e:
        _fail(str(e))

    table = Table(title=f"Planning stages over {summary.repeats} runs, {summary.jobs} jobs")
    table.add_column("Stage")
    for column in ("min (ms)", "median (ms)", "max (ms)"):
        table.add_column(column, justify="right")
    for stage in summary.stages:
        table.add_row(
            stage.stage,
            f"{1e3 * stage.min_seconds:.2f}",
            f"{1e3 * stage.median_seconds:.2f}",
            f"{1e3 * stage.max_seconds:.2f}",
        )
    console.print(table)
    console.print(
        f"Feasible: {summary.feasible} ({summary.feasible_count} {GraspStatus.FEASIBLE.value} candidates)",
        highlight=False,
    )
    if out is not None:
        out.parent.mkdir(parents=True, exist_ok=True)
        summary.to_frame().to_csv(out)
        console.print(f"Summary: {out}", highlight=False)
