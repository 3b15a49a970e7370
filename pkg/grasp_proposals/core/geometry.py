"""Rigid-body math, point-cloud container and oriented bounding boxes.

World frame convention: right-handed, Z up, X forward from the robot base at
identity. Quaternions are stored scalar-first (w, x, y, z) and canonicalized to
the positive hemisphere.
"""

from __future__ import annotations

import logging
from enum import Enum
from typing import Iterable, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.spatial import ConvexHull, QhullError
from scipy.spatial.transform import Rotation

from grasp_proposals.core.exceptions import DegenerateCloudError, EmptyCloudError, TooFewPointsError

logger = logging.getLogger(__name__)

FIT_TOLERANCE = 1e-6
MAX_FACE_DIRECTIONS = 64

Vector3 = tuple[float, float, float]
Quaternion = tuple[float, float, float, float]


def _canonical_quaternion(values: Sequence[float]) -> Quaternion:
    q = np.asarray(values, dtype=np.float64)
    if q.shape != (4,) or not np.all(np.isfinite(q)):
        raise ValueError(f"Quaternion must be 4 finite numbers, got {values!r}")
    norm = float(np.linalg.norm(q))
    if norm < 1e-12:
        raise ValueError("Quaternion has zero norm")
    q = q / norm
    nonzero = np.flatnonzero(np.abs(q) > 0.0)
    if q[nonzero[0]] < 0.0:
        q = -q
    return float(q[0]), float(q[1]), float(q[2]), float(q[3])


def _to_rotation(q: Quaternion) -> Rotation:
    w, x, y, z = q
    return Rotation.from_quat([x, y, z, w])


def _from_rotation(rotation: Rotation) -> Quaternion:
    x, y, z, w = rotation.as_quat()
    return _canonical_quaternion((w, x, y, z))


def quaternion_distance(a: Quaternion, b: Quaternion) -> float:
    """Distance between two unit quaternions, insensitive to the sign ambiguity."""
    qa = np.asarray(a, dtype=np.float64)
    qb = np.asarray(b, dtype=np.float64)
    return float(min(np.linalg.norm(qa - qb), np.linalg.norm(qa + qb)))


class Pose(BaseModel):
    """Rigid transform: position in meters and a unit quaternion orientation."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    position: Vector3 = Field(default=(0.0, 0.0, 0.0), description="Translation in meters")
    orientation: Quaternion = Field(default=(1.0, 0.0, 0.0, 0.0), description="Unit quaternion (w, x, y, z)")

    @field_validator("position")
    @classmethod
    def _finite_position(cls, value: Vector3) -> Vector3:
        if not all(np.isfinite(value)):
            raise ValueError(f"Position must be finite, got {value!r}")
        return tuple(float(v) for v in value)

    @field_validator("orientation")
    @classmethod
    def _unit_orientation(cls, value: Quaternion) -> Quaternion:
        return _canonical_quaternion(value)

    @classmethod
    def identity(cls) -> Pose:
        return cls()

    @classmethod
    def translate(cls, x: float, y: float, z: float) -> Pose:
        return cls(position=(x, y, z))

    @classmethod
    def from_matrix(cls, rotation: np.ndarray, translation: Iterable[float] | None = None) -> Pose:
        """Build a pose from a 3x3 rotation plus translation, or from a 4x4 homogeneous matrix."""
        rotation = np.asarray(rotation, dtype=np.float64)
        if rotation.shape == (4, 4):
            translation = rotation[:3, 3]
            rotation = rotation[:3, :3]
        position = np.zeros(3) if translation is None else np.asarray(translation, dtype=np.float64)
        return cls(position=tuple(position), orientation=_from_rotation(Rotation.from_matrix(rotation)))

    @classmethod
    def from_axis_angle(cls, axis: Iterable[float], angle: float, position: Iterable[float] = (0.0, 0.0, 0.0)) -> Pose:
        axis = np.asarray(axis, dtype=np.float64)
        axis = axis / np.linalg.norm(axis)
        return cls(position=tuple(position), orientation=_from_rotation(Rotation.from_rotvec(axis * angle)))

    @classmethod
    def from_yaw(cls, yaw: float, position: Iterable[float] = (0.0, 0.0, 0.0)) -> Pose:
        return cls.from_axis_angle((0.0, 0.0, 1.0), yaw, position)

    @property
    def rotation_matrix(self) -> np.ndarray:
        return _to_rotation(self.orientation).as_matrix()

    @property
    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation_matrix
        m[:3, 3] = self.position
        return m

    @property
    def yaw(self) -> float:
        r = self.rotation_matrix
        return float(np.arctan2(r[1, 0], r[0, 0]))

    def axis(self, index: int) -> np.ndarray:
        """Unit vector of frame axis ``index`` (0=X, 1=Y, 2=Z) in the parent frame."""
        return self.rotation_matrix[:, index]

    def inverse(self) -> Pose:
        rotation = _to_rotation(self.orientation).inv()
        position = -rotation.apply(np.asarray(self.position))
        return Pose(position=tuple(position), orientation=_from_rotation(rotation))

    def transform_points(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        return points @ self.rotation_matrix.T + np.asarray(self.position)


def compose(a: Pose, b: Pose) -> Pose:
    """Pose that applies ``b`` first, then ``a``."""
    ra = _to_rotation(a.orientation)
    rb = _to_rotation(b.orientation)
    position = ra.apply(np.asarray(b.position)) + np.asarray(a.position)
    return Pose(position=tuple(position), orientation=_from_rotation(ra * rb))


def inverse(pose: Pose) -> Pose:
    return pose.inverse()


class SourceTag(str, Enum):
    CAMERA = "camera"
    LIDAR = "lidar"
    SYNTHETIC = "synthetic"


_SOURCE_VALUES = np.array([tag.value for tag in SourceTag])


class PointCloud(BaseModel):
    """Ordered set of 3D points in meters with optional per-point source tags.

    Arrays are stored read-only so instances can be shared between threads.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    points: np.ndarray = Field(description="(N, 3) float64 coordinates in meters")
    source: np.ndarray | None = Field(default=None, description="Optional per-point SourceTag values")

    @field_validator("points", mode="before")
    @classmethod
    def _as_points(cls, value) -> np.ndarray:
        points = np.array(value, dtype=np.float64)
        if points.size == 0:
            points = points.reshape(0, 3)
        if points.ndim != 2 or points.shape[1] != 3:
            raise ValueError(f"Points must have shape (N, 3), got {points.shape}")
        if not np.all(np.isfinite(points)):
            raise ValueError("Point coordinates must be finite")
        points.setflags(write=False)
        return points

    @field_validator("source", mode="before")
    @classmethod
    def _as_source(cls, value) -> np.ndarray | None:
        if value is None:
            return None
        items = value.ravel().tolist() if isinstance(value, np.ndarray) else list(value)
        tags = np.array([str(v.value) if isinstance(v, SourceTag) else str(v) for v in items], dtype=str)
        if tags.size and not np.all(np.isin(tags, _SOURCE_VALUES)):
            raise ValueError(f"Unknown source tags: {sorted(set(tags) - set(_SOURCE_VALUES))}")
        tags.setflags(write=False)
        return tags

    @model_validator(mode="after")
    def _source_matches_points(self) -> PointCloud:
        if self.source is not None and len(self.source) != len(self.points):
            raise ValueError(f"Got {len(self.source)} source tags for {len(self.points)} points")
        return self

    @classmethod
    def empty(cls) -> PointCloud:
        return cls(points=np.zeros((0, 3)))

    @classmethod
    def merge(cls, *clouds: PointCloud) -> PointCloud:
        """Concatenate clouds in order; missing tags become ``synthetic`` when any cloud is tagged."""
        points = np.concatenate([c.points for c in clouds]) if clouds else np.zeros((0, 3))
        if not any(c.source is not None for c in clouds):
            return cls(points=points)
        source = np.concatenate(
            [c.source if c.source is not None else np.full(len(c), SourceTag.SYNTHETIC.value) for c in clouds]
        )
        return cls(points=points, source=source)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def is_empty(self) -> bool:
        return len(self.points) == 0

    def centroid(self) -> np.ndarray:
        if self.is_empty:
            raise EmptyCloudError("Centroid of an empty cloud")
        return self.points.mean(axis=0)

    def with_source(self, tag: SourceTag) -> PointCloud:
        return PointCloud(points=self.points, source=np.full(len(self), tag.value))

    def crop(self, lower: Iterable[float], upper: Iterable[float]) -> PointCloud:
        """Keep the points inside the closed axis-aligned box [lower, upper]."""
        mask = np.all((self.points >= np.asarray(lower)) & (self.points <= np.asarray(upper)), axis=1)
        source = None if self.source is None else self.source[mask]
        return PointCloud(points=self.points[mask], source=source)


def transform_cloud(pose: Pose, cloud: PointCloud) -> PointCloud:
    """Rigidly transform every point of ``cloud`` by ``pose``."""
    if cloud.is_empty:
        raise EmptyCloudError("Cannot transform an empty cloud")
    return PointCloud(points=pose.transform_points(cloud.points), source=cloud.source)


class OrientedBoundingBox(BaseModel):
    """Box with arbitrary orientation; the columns of ``axes`` are the box axes in world."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    center: Vector3 = Field(description="Box center in meters")
    rotation: Quaternion = Field(default=(1.0, 0.0, 0.0, 0.0), description="Box frame orientation (w, x, y, z)")
    half_extents: Vector3 = Field(description="Half side lengths, descending, each > 0")

    @field_validator("rotation")
    @classmethod
    def _unit_rotation(cls, value: Quaternion) -> Quaternion:
        return _canonical_quaternion(value)

    @field_validator("half_extents")
    @classmethod
    def _sorted_positive(cls, value: Vector3) -> Vector3:
        if min(value) <= 0.0:
            raise ValueError(f"Half extents must be positive, got {value}")
        if not value[0] >= value[1] >= value[2]:
            raise ValueError(f"Half extents must be sorted in descending order, got {value}")
        return tuple(float(v) for v in value)

    @property
    def axes(self) -> np.ndarray:
        return _to_rotation(self.rotation).as_matrix()

    @property
    def volume(self) -> float:
        return float(8.0 * np.prod(self.half_extents))

    @property
    def pose(self) -> Pose:
        return Pose(position=self.center, orientation=self.rotation)

    def corners(self) -> np.ndarray:
        """The 8 corners, sign patterns enumerated x-major: (-,-,-), (-,-,+), ..., (+,+,+)."""
        signs = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)], dtype=np.float64)
        local = signs * np.asarray(self.half_extents)
        return local @ self.axes.T + np.asarray(self.center)

    def contains(self, points: np.ndarray, tolerance: float = FIT_TOLERANCE) -> np.ndarray:
        local = (np.asarray(points, dtype=np.float64).reshape(-1, 3) - np.asarray(self.center)) @ self.axes
        return np.all(np.abs(local) <= np.asarray(self.half_extents) + tolerance, axis=1)


def fit_obb(cloud: PointCloud, gravity_aligned: bool = True) -> OrientedBoundingBox:
    """Fit an oriented bounding box to ``cloud``.

    Without gravity alignment the axes come from the convex hull: the smallest
    box among the hull-vertex principal axes and, for each of the largest hull
    face directions, that face normal with the minimum-area rectangle of the
    projected hull. Point-covariance axes are the fallback when the hull cannot
    be built. With gravity alignment one axis is world-up and the horizontal
    axes come from the minimum-area rectangle over the convex-hull edge
    directions of the footprint (horizontal PCA when the hull is degenerate).
    """
    count = len(cloud)
    required = 3 if gravity_aligned else 4
    if count < required:
        raise TooFewPointsError(f"fit_obb needs at least {required} points, got {count}")
    axes = _gravity_axes(cloud.points) if gravity_aligned else _hull_axes(cloud.points)
    return _box_from_axes(cloud.points, axes)


def _principal_axes(points: np.ndarray) -> np.ndarray:
    centered = points - points.mean(axis=0)
    covariance = centered.T @ centered / len(points)
    eigenvalues, eigenvectors = np.linalg.eigh(covariance)
    if eigenvalues[-1] <= 0.0 or eigenvalues[0] <= 1e-12 * eigenvalues[-1]:
        raise DegenerateCloudError(f"Rank-deficient covariance, eigenvalues {eigenvalues.tolist()}")
    return eigenvectors[:, ::-1]


def _hull_axes(points: np.ndarray) -> np.ndarray:
    fallback = _principal_axes(points)
    try:
        hull = ConvexHull(points)
    except (QhullError, ValueError):
        return fallback
    vertices = points[hull.vertices]
    candidates = [fallback]
    try:
        candidates.append(_principal_axes(vertices))
    except DegenerateCloudError:
        pass
    candidates.extend(_face_axes(vertices, normal) for normal in _face_normals(points, hull))
    volumes = [np.prod(np.ptp(vertices @ axes, axis=0)) for axes in candidates]
    return candidates[int(np.argmin(volumes))]


def _face_normals(points: np.ndarray, hull: ConvexHull) -> np.ndarray:
    """Distinct hull face directions, largest total facet area first."""
    normals = hull.equations[:, :3].copy()
    dominant = np.argmax(np.abs(normals), axis=1)
    normals *= np.sign(normals[np.arange(len(normals)), dominant])[:, None]
    triangles = points[hull.simplices]
    areas = 0.5 * np.linalg.norm(
        np.cross(triangles[:, 1] - triangles[:, 0], triangles[:, 2] - triangles[:, 0]), axis=1
    )
    directions, group = np.unique(np.round(normals, 6), axis=0, return_inverse=True)
    weights = np.bincount(group.reshape(-1), weights=areas, minlength=len(directions))
    largest = directions[np.argsort(-weights, kind="stable")[:MAX_FACE_DIRECTIONS]]
    return largest / np.linalg.norm(largest, axis=1, keepdims=True)


def _face_axes(vertices: np.ndarray, normal: np.ndarray) -> np.ndarray:
    helper = np.eye(3)[int(np.argmin(np.abs(normal)))]
    u = np.cross(normal, helper)
    u /= np.linalg.norm(u)
    v = np.cross(normal, u)
    angle = _footprint_angle(vertices @ np.stack([u, v], axis=1))
    c, s = np.cos(angle), np.sin(angle)
    return np.stack([c * u + s * v, c * v - s * u, normal], axis=1)


def _gravity_axes(points: np.ndarray) -> np.ndarray:
    angle = _footprint_angle(points[:, :2])
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _footprint_angle(xy: np.ndarray) -> float:
    try:
        hull = ConvexHull(xy)
    except (QhullError, ValueError):
        return _principal_angle(xy)
    ring = xy[hull.vertices]
    edges = np.roll(ring, -1, axis=0) - ring
    angles = np.mod(np.arctan2(edges[:, 1], edges[:, 0]), np.pi / 2)
    u = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    v = np.stack([-np.sin(angles), np.cos(angles)], axis=1)
    areas = np.ptp(ring @ u.T, axis=0) * np.ptp(ring @ v.T, axis=0)
    return float(angles[int(np.argmin(areas))])


def _principal_angle(xy: np.ndarray) -> float:
    centered = xy - xy.mean(axis=0)
    covariance = centered.T @ centered / len(xy)
    if np.trace(covariance) <= 0.0:
        return 0.0
    _, eigenvectors = np.linalg.eigh(covariance)
    major = eigenvectors[:, -1]
    return float(np.arctan2(major[1], major[0]))


def _box_from_axes(points: np.ndarray, axes: np.ndarray) -> OrientedBoundingBox:
    projected = points @ axes
    lower, upper = projected.min(axis=0), projected.max(axis=0)
    half = (upper - lower) / 2.0
    center = axes @ ((upper + lower) / 2.0)

    # canonical frame: descending extents, dominant component positive, right-handed
    order = np.argsort(-half, kind="stable")
    axes = axes[:, order].copy()
    half = np.maximum(half[order], FIT_TOLERANCE)
    for k in (0, 1):
        dominant = int(np.argmax(np.abs(axes[:, k])))
        if axes[dominant, k] < 0.0:
            axes[:, k] = -axes[:, k]
    axes[:, 2] = np.cross(axes[:, 0], axes[:, 1])

    return OrientedBoundingBox(
        center=tuple(center),
        rotation=_from_rotation(Rotation.from_matrix(axes)),
        half_extents=tuple(half),
    )
