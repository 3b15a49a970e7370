"""Scene files: strict YAML documents describing a planner input.

Clouds are given inline (``points``) or by a path relative to the scene file.
A scene may instead carry a ``recipe`` section, in which case the clouds are
generated from it. Unknown keys anywhere are an error.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Literal

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from grasp_proposals.core.exceptions import SceneFileError
from grasp_proposals.core.geometry import Pose, PointCloud
from grasp_proposals.core.models import GripperSpec, SceneModel
from grasp_proposals.core.reachability import WorkspaceBounds
from grasp_proposals.harness.scene_generation import SceneRecipe, generate_scene
from grasp_proposals.io.point_cloud_io import read_point_cloud, write_point_cloud

logger = logging.getLogger(__name__)

SCENE_VERSION = 1


class SceneMetadata(BaseModel):
    model_config = ConfigDict(extra="forbid")

    version: int = Field(description="Scene schema version")
    frame: Literal["world_z_up"] = Field(default="world_z_up", description="Right-handed, Z up, meters")


class CloudSource(BaseModel):
    """Exactly one of ``path`` or ``points``."""

    model_config = ConfigDict(extra="forbid")

    path: str | None = None
    points: list[tuple[float, float, float]] | None = None

    @model_validator(mode="after")
    def _one_source(self) -> CloudSource:
        if (self.path is None) == (self.points is None):
            raise ValueError("A cloud needs exactly one of 'path' or 'points'")
        return self

    def load(self, base_dir: Path) -> PointCloud:
        if self.points is not None:
            return PointCloud(points=np.asarray(self.points, dtype=np.float64).reshape(-1, 3))
        path = Path(self.path)
        return read_point_cloud(path if path.is_absolute() else base_dir / path).cloud


class SceneFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    metadata: SceneMetadata
    object_cloud: CloudSource | None = None
    environment_cloud: CloudSource | None = None
    object_label: str | None = None
    gripper: GripperSpec = Field(default_factory=GripperSpec)
    base_pose: Pose = Field(default_factory=Pose.identity)
    workspace: WorkspaceBounds = Field(default_factory=WorkspaceBounds)
    encoder_readings: list[float] = Field(default_factory=list, description="Scripted gripper widths after closing (m)")
    recipe: SceneRecipe | None = None

    @model_validator(mode="after")
    def _has_object(self) -> SceneFile:
        if self.metadata.version != SCENE_VERSION:
            raise ValueError(f"Unsupported scene version {self.metadata.version}, expected {SCENE_VERSION}")
        if self.object_cloud is None and self.recipe is None:
            raise ValueError("Scene needs an 'object_cloud' or a 'recipe'")
        return self


class LoadedScene(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    scene: SceneModel
    document: SceneFile
    path: str


def _format_validation(error: ValidationError) -> str:
    first = error.errors()[0]
    location = ".".join(str(part) for part in first["loc"]) or "<root>"
    return f"{location}: {first['msg']}"


def parse_scene_document(data: dict, source: str = "<scene>") -> SceneFile:
    if not isinstance(data, dict):
        raise SceneFileError(f"{source}: expected a mapping at the top level")
    try:
        return SceneFile.model_validate(data)
    except ValidationError as e:
        raise SceneFileError(f"{source}: {_format_validation(e)}") from e


def load_scene(path: str | Path) -> LoadedScene:
    """Read a scene file and resolve its clouds into a ``SceneModel``."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Scene file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise SceneFileError(f"{path}: invalid YAML: {e}") from e
    document = parse_scene_document(data, str(path))

    if document.object_cloud is None:
        scene = generate_scene(document.recipe)
    else:
        base_dir = path.parent
        environment = document.environment_cloud.load(base_dir) if document.environment_cloud else None
        try:
            scene = SceneModel(
                object_cloud=document.object_cloud.load(base_dir),
                environment_cloud=environment,
                object_label=document.object_label,
                gripper=document.gripper,
                base_pose=document.base_pose,
                workspace=document.workspace,
            )
        except ValidationError as e:
            raise SceneFileError(f"{path}: {_format_validation(e)}") from e
    logger.info(
        "Loaded scene %s: %d object points, %d environment points",
        path, len(scene.object_cloud), 0 if scene.environment_cloud is None else len(scene.environment_cloud),
    )
    return LoadedScene(scene=scene, document=document, path=str(path))


def write_scene(
    path: str | Path,
    scene: SceneModel,
    recipe: SceneRecipe | None = None,
    encoder_readings: list[float] | None = None,
) -> Path:
    """Write ``scene`` as YAML with its clouds in sibling ``<stem>_object.ply`` / ``<stem>_environment.ply``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    object_path = path.with_name(f"{path.stem}_object.ply")
    write_point_cloud(object_path, scene.object_cloud)
    environment = None
    if scene.environment_cloud is not None:
        environment_path = path.with_name(f"{path.stem}_environment.ply")
        write_point_cloud(environment_path, scene.environment_cloud)
        environment = CloudSource(path=environment_path.name)

    document = SceneFile(
        metadata=SceneMetadata(version=SCENE_VERSION),
        object_cloud=CloudSource(path=object_path.name),
        environment_cloud=environment,
        object_label=scene.object_label,
        gripper=scene.gripper,
        base_pose=scene.base_pose,
        workspace=scene.workspace,
        encoder_readings=encoder_readings or [],
        recipe=recipe,
    )
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(document.model_dump(mode="json", exclude_none=True), f, sort_keys=False)
    logger.info("Wrote scene to %s", path)
    return path
