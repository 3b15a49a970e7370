import json

import pytest
import yaml
from typer.testing import CliRunner

from grasp_proposals.cli import EXIT_INPUT_ERROR, EXIT_NO_GRASP, EXIT_OK, app
from grasp_proposals.io.reachmap_file import load_reachability_map

runner = CliRunner()


def gen_scene(tmp_path, recipe: str, name: str):
    path = tmp_path / f"{name}.yaml"
    result = runner.invoke(app, ["gen-scene", "--recipe", recipe, "--out", str(path)])
    assert result.exit_code == EXIT_OK, result.output
    return path


@pytest.fixture(scope="module")
def scenes(tmp_path_factory):
    root = tmp_path_factory.mktemp("scenes")
    return {name: gen_scene(root, name, name) for name in ("cube_on_table", "oversized")}


def test_gen_scene_is_reproducible(tmp_path):
    first = gen_scene(tmp_path / "a", "cube_on_table", "cube")
    second = gen_scene(tmp_path / "b", "cube_on_table", "cube")
    assert first.read_bytes() == second.read_bytes()
    for suffix in ("_object.ply", "_environment.ply"):
        assert (first.parent / f"cube{suffix}").read_bytes() == (second.parent / f"cube{suffix}").read_bytes()


def test_gen_scene_seed_override(tmp_path):
    default = gen_scene(tmp_path / "a", "cube_on_table", "cube")
    override = tmp_path / "b" / "cube.yaml"
    result = runner.invoke(app, ["gen-scene", "-r", "cube_on_table", "-o", str(override), "--seed", "9"])
    assert result.exit_code == EXIT_OK
    assert (default.parent / "cube_object.ply").read_bytes() != (tmp_path / "b" / "cube_object.ply").read_bytes()


def test_gen_scene_unknown_recipe(tmp_path):
    result = runner.invoke(app, ["gen-scene", "--recipe", "no_such_recipe", "--out", str(tmp_path / "x.yaml")])
    assert result.exit_code == EXIT_INPUT_ERROR
    assert not (tmp_path / "x.yaml").exists()


def test_plan_feasible(tmp_path, scenes):
    out = tmp_path / "report.json"
    debug = tmp_path / "debug.ply"
    result = runner.invoke(
        app, ["plan", "--scene", str(scenes["cube_on_table"]), "--out", str(out), "--debug-export", str(debug)]
    )
    assert result.exit_code == EXIT_OK, result.output
    report = json.loads(out.read_text())
    assert report["selected"] is not None
    assert report["candidates"][0]["index"] == report["selected"]
    assert report["timings"] is None
    assert debug.is_file()


def test_plan_reports_are_identical_across_jobs(tmp_path, scenes):
    outputs = []
    for jobs in ("1", "4"):
        out = tmp_path / f"report_{jobs}.json"
        result = runner.invoke(app, ["plan", "-s", str(scenes["cube_on_table"]), "-o", str(out), "-j", jobs])
        assert result.exit_code == EXIT_OK
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]


def test_plan_with_timings(tmp_path, scenes):
    out = tmp_path / "report.json"
    result = runner.invoke(app, ["plan", "-s", str(scenes["cube_on_table"]), "-o", str(out), "--timings"])
    assert result.exit_code == EXIT_OK
    assert json.loads(out.read_text())["timings"]


def test_plan_no_feasible_grasp_still_writes_report(tmp_path, scenes):
    out = tmp_path / "report.json"
    result = runner.invoke(app, ["plan", "--scene", str(scenes["oversized"]), "--out", str(out)])
    assert result.exit_code == EXIT_NO_GRASP
    report = json.loads(out.read_text())
    assert report["selected"] is None
    assert len(report["candidates"]) == 180


def test_plan_malformed_scene(tmp_path):
    scene = tmp_path / "broken.yaml"
    scene.write_text("metadata: [\n")
    out = tmp_path / "report.json"
    result = runner.invoke(app, ["plan", "--scene", str(scene), "--out", str(out)])
    assert result.exit_code == EXIT_INPUT_ERROR
    assert not out.exists()


def test_plan_missing_scene(tmp_path):
    out = tmp_path / "report.json"
    result = runner.invoke(app, ["plan", "--scene", str(tmp_path / "absent.yaml"), "--out", str(out)])
    assert result.exit_code == EXIT_INPUT_ERROR
    assert not out.exists()


def test_plan_bad_config(tmp_path, scenes):
    config = tmp_path / "config.yaml"
    config.write_text("planner:\n  unknown_option: 1\n")
    out = tmp_path / "report.json"
    result = runner.invoke(app, ["plan", "-s", str(scenes["cube_on_table"]), "-c", str(config), "-o", str(out)])
    assert result.exit_code == EXIT_INPUT_ERROR
    assert not out.exists()


def scene_with_readings(tmp_path, readings: list[float]):
    scene = tmp_path / "scene.yaml"
    generated = gen_scene(tmp_path / "gen", "cube_on_table", "cube")
    document = yaml.safe_load(generated.read_text())
    document["encoder_readings"] = readings
    scene.write_text(yaml.safe_dump(document))
    for name in ("cube_object.ply", "cube_environment.ply"):
        (tmp_path / name).write_bytes((generated.parent / name).read_bytes())
    return scene


def test_plan_with_supervision(tmp_path):
    scene = scene_with_readings(tmp_path, [0.001, 0.06])
    out = tmp_path / "report.json"
    result = runner.invoke(app, ["plan", "-s", str(scene), "-o", str(out), "--supervise"])
    assert result.exit_code == EXIT_OK, result.output
    supervision = json.loads(out.read_text())["supervision"]
    assert [a["outcome"] for a in supervision["attempts"]] == ["empty_close", "success"]
    assert supervision["action"] == "proceed"


def test_plan_supervision_rejects_out_of_range_reading(tmp_path):
    scene = scene_with_readings(tmp_path, [0.5])
    out = tmp_path / "report.json"
    result = runner.invoke(app, ["plan", "-s", str(scene), "-o", str(out), "--supervise"])
    assert result.exit_code == EXIT_INPUT_ERROR
    assert "Error:" in result.output
    assert "Traceback" not in result.output
    assert not out.exists()


def test_plan_seed_shifts_the_sampling_grid(tmp_path, scenes):
    reports = {}
    for name, extra in (("plain", []), ("seeded", ["--seed", "5"]), ("again", ["--seed", "5"])):
        out = tmp_path / f"{name}.json"
        result = runner.invoke(app, ["plan", "-s", str(scenes["cube_on_table"]), "-o", str(out), *extra])
        assert result.exit_code in (EXIT_OK, EXIT_NO_GRASP), result.output
        reports[name] = json.loads(out.read_text())
    assert reports["seeded"]["config"]["sampling"]["seed"] == 5
    assert reports["plain"]["config"]["sampling"]["seed"] is None
    assert reports["seeded"] == reports["again"]
    assert reports["seeded"]["candidates"] != reports["plain"]["candidates"]


def test_build_reachmap(tmp_path):
    out = tmp_path / "reach.bin"
    result = runner.invoke(app, ["build-reachmap", "--out", str(out), "--samples", "10000", "--seed", "1"])
    assert result.exit_code == EXIT_OK, result.output
    assert load_reachability_map(out).direction_count == 26


def test_build_reachmap_rejects_too_few_samples(tmp_path):
    out = tmp_path / "reach.bin"
    result = runner.invoke(app, ["build-reachmap", "--out", str(out), "--samples", "10"])
    assert result.exit_code == EXIT_INPUT_ERROR
    assert not out.exists()


def test_bench_writes_csv(tmp_path, scenes):
    out = tmp_path / "bench.csv"
    result = runner.invoke(app, ["bench", "-s", str(scenes["cube_on_table"]), "-n", "2", "-o", str(out)])
    assert result.exit_code == EXIT_OK, result.output
    lines = out.read_text().splitlines()
    assert lines[0].split(",")[0] == "stage"
    assert lines[-1].startswith("total,")
