"""Deterministic synthetic tabletop scenes.

The target object is sampled only on surfaces facing a virtual camera, which
mimics the partial view a depth sensor gives. Table, obstacles and clutter form
the environment cloud. A single ``numpy`` generator seeded from the recipe
drives every random draw, in a fixed order.
"""

from __future__ import annotations

import logging
import math
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from grasp_proposals.core.exceptions import InvalidRecipeError
from grasp_proposals.core.geometry import Pose, PointCloud, SourceTag
from grasp_proposals.core.models import GripperSpec, SceneModel
from grasp_proposals.core.reachability import WorkspaceBounds

logger = logging.getLogger(__name__)

REST_TOLERANCE = 1e-3


class TableSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    height: float = Field(default=0.75, gt=0.0, description="Table surface height (m)")
    extent: tuple[float, float] = Field(default=(1.2, 0.8), description="Table size along world X and Y (m)")
    center: tuple[float, float] = Field(default=(0.7, 0.0), description="Table center in world XY (m)")
    spacing: float = Field(default=0.005, gt=0.0, description="Surface grid spacing (m)")


class ObjectSpec(BaseModel):
    """A box (x, y, z sizes) or a cylinder (radius, height); ``pose`` is the shape center."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    shape: Literal["box", "cylinder"]
    dimensions: tuple[float, ...] = Field(description="Box sizes or cylinder radius and height (m)")
    pose: Pose
    label: str | None = None
    target: bool = Field(default=False, description="The object to grasp; defaults to the first object")
    spacing: float = Field(default=0.005, gt=0.0, description="Surface grid spacing when used as an obstacle (m)")

    @model_validator(mode="after")
    def _dimension_count(self) -> ObjectSpec:
        expected = 3 if self.shape == "box" else 2
        if len(self.dimensions) != expected or min(self.dimensions) <= 0.0:
            raise ValueError(f"A {self.shape} needs {expected} positive dimensions, got {self.dimensions}")
        return self

    @property
    def height(self) -> float:
        return self.dimensions[2] if self.shape == "box" else self.dimensions[1]

    @property
    def footprint_radius(self) -> float:
        if self.shape == "box":
            return math.hypot(self.dimensions[0], self.dimensions[1]) / 2.0
        return self.dimensions[0]


class SceneRecipe(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    seed: int = 0
    table: TableSpec = Field(default_factory=TableSpec)
    objects: list[ObjectSpec] = Field(default_factory=list)
    clutter_density: float = Field(default=0.0, ge=0.0, description="Clutter points per m2 of table")
    clutter_height: float = Field(default=0.05, gt=0.0, description="Clutter points lie below this height (m)")
    clutter_keepout: float = Field(default=0.12, ge=0.0, description="Clutter-free ring around the target (m)")
    sensor_noise_sigma: float = Field(default=0.0, ge=0.0, description="Gaussian noise on every point (m)")
    object_density: float = Field(default=2.0e5, gt=0.0, description="Target surface samples per m2")
    camera_position: tuple[float, float, float] = Field(default=(0.0, 0.0, 1.5), description="Virtual camera (m)")
    gripper: GripperSpec = Field(default_factory=GripperSpec)
    base_pose: Pose = Field(default_factory=Pose.identity)
    workspace: WorkspaceBounds = Field(default_factory=WorkspaceBounds)

    @property
    def target_index(self) -> int:
        flagged = [i for i, obj in enumerate(self.objects) if obj.target]
        return flagged[0] if flagged else 0


def _box_faces(dimensions: tuple[float, ...]) -> list[tuple[np.ndarray, np.ndarray, np.ndarray, float, float]]:
    """(center, normal, u, half_u, half_v) per face in the shape frame, bottom face excluded."""
    hx, hy, hz = (d / 2.0 for d in dimensions)
    ex, ey, ez = np.eye(3)
    return [
        (hx * ex, ex, ey, hy, hz),
        (-hx * ex, -ex, ey, hy, hz),
        (hy * ey, ey, ex, hx, hz),
        (-hy * ey, -ey, ex, hx, hz),
        (hz * ez, ez, ex, hx, hy),
    ]


def _face_points(center, normal, u, half_u, half_v, uv: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    v = np.cross(normal, u)
    points = center + uv[:, :1] * half_u * u + uv[:, 1:] * half_v * v
    return points, np.tile(normal, (len(points), 1))


def _grid(count_u: int, count_v: int) -> np.ndarray:
    u, v = np.meshgrid(np.linspace(-1.0, 1.0, count_u), np.linspace(-1.0, 1.0, count_v), indexing="ij")
    return np.column_stack([u.ravel(), v.ravel()])


def sample_shape_surface(
    obj: ObjectSpec,
    rng: np.random.Generator | None = None,
    density: float = 2.0e5,
) -> tuple[np.ndarray, np.ndarray]:
    """Surface points and outward normals in world frame, bottom excluded.

    With ``rng`` the points are uniform random at ``density`` per m2, otherwise a
    regular grid at ``obj.spacing``.
    """
    chunks: list[tuple[np.ndarray, np.ndarray]] = []
    if obj.shape == "box":
        for center, normal, u, half_u, half_v in _box_faces(obj.dimensions):
            if rng is None:
                uv = _grid(
                    int(math.ceil(2 * half_u / obj.spacing)) + 1, int(math.ceil(2 * half_v / obj.spacing)) + 1
                )
            else:
                count = max(int(round(4 * half_u * half_v * density)), 1)
                uv = rng.uniform(-1.0, 1.0, size=(count, 2))
            chunks.append(_face_points(center, normal, u, half_u, half_v, uv))
    else:
        radius, height = obj.dimensions
        if rng is None:
            rows = int(math.ceil(height / obj.spacing)) + 1
            around = max(int(math.ceil(2 * math.pi * radius / obj.spacing)), 8)
            theta = np.repeat(np.linspace(0.0, 2 * math.pi, around, endpoint=False), rows)
            z = np.tile(np.linspace(-height / 2, height / 2, rows), around)
            rings = max(int(math.ceil(radius / obj.spacing)), 1)
            ring_radii, ring_angles = [], []
            for k in range(rings + 1):
                r = radius * k / rings
                count = max(int(math.ceil(2 * math.pi * r / obj.spacing)), 1)
                ring_radii.append(np.full(count, r))
                ring_angles.append(np.linspace(0.0, 2 * math.pi, count, endpoint=False))
            r_cap = np.concatenate(ring_radii)
            phi_cap = np.concatenate(ring_angles)
        else:
            lateral = max(int(round(2 * math.pi * radius * height * density)), 1)
            theta = rng.uniform(0.0, 2 * math.pi, lateral)
            z = rng.uniform(-height / 2, height / 2, lateral)
            cap = max(int(round(math.pi * radius**2 * density)), 1)
            r_cap = radius * np.sqrt(rng.uniform(0.0, 1.0, cap))
            phi_cap = rng.uniform(0.0, 2 * math.pi, cap)
        side = np.column_stack([radius * np.cos(theta), radius * np.sin(theta), z])
        side_normals = np.column_stack([np.cos(theta), np.sin(theta), np.zeros_like(theta)])
        top = np.column_stack([r_cap * np.cos(phi_cap), r_cap * np.sin(phi_cap), np.full_like(r_cap, height / 2)])
        chunks.append((side, side_normals))
        chunks.append((top, np.tile([0.0, 0.0, 1.0], (len(top), 1))))

    points = np.concatenate([c[0] for c in chunks])
    normals = np.concatenate([c[1] for c in chunks])
    rotation = obj.pose.rotation_matrix
    return obj.pose.transform_points(points), normals @ rotation.T


def model_cloud(obj: ObjectSpec) -> PointCloud:
    """Full grid-sampled surface of ``obj`` centered at its own origin, for the model library."""
    centered = obj.model_copy(update={"pose": Pose.identity()})
    points, _ = sample_shape_surface(centered)
    return PointCloud(points=points, source=np.full(len(points), SourceTag.SYNTHETIC.value))


def _check_rests_on_table(obj: ObjectSpec, table: TableSpec) -> None:
    up = obj.pose.axis(2)
    if up[2] < 1.0 - 1e-6:
        raise InvalidRecipeError(f"Object {obj.label or obj.shape} is not upright")
    bottom = obj.pose.position[2] - obj.height / 2.0
    if abs(bottom - table.height) > REST_TOLERANCE:
        raise InvalidRecipeError(
            f"Object {obj.label or obj.shape} bottom at {bottom:.4f} m does not rest on the table at {table.height} m"
        )
    for axis in (0, 1):
        offset = abs(obj.pose.position[axis] - table.center[axis])
        if offset > table.extent[axis] / 2.0:
            raise InvalidRecipeError(f"Object {obj.label or obj.shape} is outside the table")


def _table_points(table: TableSpec) -> np.ndarray:
    counts = [int(math.ceil(e / table.spacing)) + 1 for e in table.extent]
    uv = _grid(*counts)
    xy = np.asarray(table.center) + uv * np.asarray(table.extent) / 2.0
    return np.column_stack([xy, np.full(len(xy), table.height)])


def generate_scene(recipe: SceneRecipe) -> SceneModel:
    """Build the planner input described by ``recipe``; identical recipes give identical scenes."""
    if not recipe.objects:
        raise InvalidRecipeError("Recipe has no objects")
    for obj in recipe.objects:
        _check_rests_on_table(obj, recipe.table)

    rng = np.random.default_rng(recipe.seed)
    target = recipe.objects[recipe.target_index]
    camera = np.asarray(recipe.camera_position)

    surface, normals = sample_shape_surface(target, rng, recipe.object_density)
    visible = np.einsum("ij,ij->i", normals, camera - surface) > 0.0
    object_points = surface[visible]
    if len(object_points) == 0:
        raise InvalidRecipeError(f"Target {target.label or target.shape} has no surface facing the camera")

    environment = [_table_points(recipe.table)]
    for i, obj in enumerate(recipe.objects):
        if i != recipe.target_index:
            environment.append(sample_shape_surface(obj)[0])

    if recipe.clutter_density > 0.0:
        area = recipe.table.extent[0] * recipe.table.extent[1]
        count = int(round(area * recipe.clutter_density))
        xy = np.asarray(recipe.table.center) + rng.uniform(-0.5, 0.5, size=(count, 2)) * np.asarray(recipe.table.extent)
        z = recipe.table.height + rng.uniform(0.0, recipe.clutter_height, count)
        keepout = target.footprint_radius + recipe.clutter_keepout
        far = np.hypot(*(xy - np.asarray(target.pose.position[:2])).T) > keepout
        environment.append(np.column_stack([xy[far], z[far]]))

    environment_points = np.concatenate(environment)
    if recipe.sensor_noise_sigma > 0.0:
        object_points = object_points + rng.normal(0.0, recipe.sensor_noise_sigma, object_points.shape)
        environment_points = environment_points + rng.normal(0.0, recipe.sensor_noise_sigma, environment_points.shape)

    logger.info(
        "Generated scene (seed %d): %d object points, %d environment points",
        recipe.seed, len(object_points), len(environment_points),
    )
    return SceneModel(
        object_cloud=PointCloud(points=object_points, source=np.full(len(object_points), SourceTag.CAMERA.value)),
        environment_cloud=PointCloud(
            points=environment_points, source=np.full(len(environment_points), SourceTag.LIDAR.value)
        ),
        object_label=target.label,
        gripper=recipe.gripper,
        base_pose=recipe.base_pose,
        workspace=recipe.workspace,
    )
