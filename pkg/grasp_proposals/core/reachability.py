"""Voxelized reachability map built by Monte-Carlo forward kinematics, and base alignment.

The arm is a simplified serial chain: a yaw joint at the arm base, one pitch
joint per link acting in the vertical plane selected by the yaw, and a
prismatic torso lift. Each voxel keeps a bitmask over approach-direction bins.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from grasp_proposals.core.exceptions import InvalidResolutionError, NoValidBasePoseError
from grasp_proposals.core.geometry import OrientedBoundingBox, Pose
from grasp_proposals.core.spatial_index import KdTree

logger = logging.getLogger(__name__)

MIN_SAMPLES = 10_000
SAMPLES_PER_CHUNK = 50_000
SHORT_CIRCUIT_RATIO = 0.9


class ArmModel(BaseModel):
    """Simplified arm kinematics, expressed in the robot base frame."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    base_offset: Pose = Field(
        default=Pose(position=(0.05, 0.0, 0.8)), description="Arm base (yaw joint) in the robot base frame"
    )
    link_lengths: tuple[float, ...] = Field(default=(0.3, 0.3, 0.15), description="Link lengths (m)")
    joint_limits: tuple[tuple[float, float], ...] | None = Field(
        default=None, description="Yaw limits followed by one pitch range per link (rad); None uses defaults"
    )
    vertical_lift_range: tuple[float, float] = Field(default=(0.0, 0.35), description="Torso lift travel (m)")

    @field_validator("link_lengths")
    @classmethod
    def _positive_links(cls, value: tuple[float, ...]) -> tuple[float, ...]:
        if not value or min(value) <= 0.0:
            raise ValueError(f"Link lengths must be positive, got {value}")
        return value

    @model_validator(mode="before")
    @classmethod
    def _default_limits(cls, data):
        if isinstance(data, dict) and data.get("joint_limits") is None:
            links = data.get("link_lengths", cls.model_fields["link_lengths"].default)
            data = {**data, "joint_limits": ((-math.pi, math.pi),) + ((-2.0, 2.0),) * len(links)}
        return data

    @model_validator(mode="after")
    def _check_limits(self) -> ArmModel:
        if len(self.joint_limits) != len(self.link_lengths) + 1:
            raise ValueError(
                f"Expected {len(self.link_lengths) + 1} joint limits (yaw + one per link), got {len(self.joint_limits)}"
            )
        for low, high in self.joint_limits:
            if not low < high:
                raise ValueError(f"Joint limit min must be below max, got ({low}, {high})")
        low, high = self.vertical_lift_range
        if low > high:
            raise ValueError(f"Lift range min must not exceed max, got {self.vertical_lift_range}")
        return self

    @property
    def max_reach(self) -> float:
        return float(sum(self.link_lengths) + max(abs(v) for v in self.vertical_lift_range))

    def sample_joints(self, rng: np.random.Generator, count: int) -> tuple[np.ndarray, np.ndarray]:
        limits = np.asarray(self.joint_limits)
        joints = rng.uniform(limits[:, 0], limits[:, 1], size=(count, len(limits)))
        lift = rng.uniform(*self.vertical_lift_range, size=count)
        return joints, lift

    def forward_kinematics(self, joints: np.ndarray, lift: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """End-effector positions and approach directions in the robot base frame."""
        joints = np.atleast_2d(joints)
        yaw = joints[:, 0]
        headings = np.cumsum(joints[:, 1:], axis=1)
        lengths = np.asarray(self.link_lengths)
        radial = (lengths * np.cos(headings)).sum(axis=1)
        height = (lengths * np.sin(headings)).sum(axis=1) + np.asarray(lift)
        local = np.stack([radial * np.cos(yaw), radial * np.sin(yaw), height], axis=1)
        last = headings[:, -1]
        direction = np.stack([np.cos(last) * np.cos(yaw), np.cos(last) * np.sin(yaw), np.sin(last)], axis=1)
        rotation = self.base_offset.rotation_matrix
        return self.base_offset.transform_points(local), direction @ rotation.T


class WorkspaceBounds(BaseModel):
    """Axis-aligned box in the robot base frame delimiting valid end-effector positions."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    min: tuple[float, float, float] = Field(default=(0.2, -0.6, 0.5), description="Lower corner (m)")
    max: tuple[float, float, float] = Field(default=(1.0, 0.6, 1.4), description="Upper corner (m)")

    @model_validator(mode="after")
    def _ordered(self) -> WorkspaceBounds:
        if not all(lo < hi for lo, hi in zip(self.min, self.max)):
            raise ValueError(f"Workspace min must be below max on every axis, got {self.min} / {self.max}")
        return self

    def margin(self, positions: np.ndarray) -> np.ndarray:
        """Signed distance to the nearest boundary face; negative outside."""
        positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
        return np.minimum(positions - np.asarray(self.min), np.asarray(self.max) - positions).min(axis=1)

    def contains(self, positions: np.ndarray) -> np.ndarray:
        return self.margin(positions) >= 0.0


@lru_cache(maxsize=8)
def direction_bins(count: int = 26) -> np.ndarray:
    """Unit approach directions: 6 faces, 14 faces+corners, or 26 faces+edges+corners of a cube."""
    steps = (-1, 0, 1)
    offsets = np.array([(i, j, k) for i in steps for j in steps for k in steps if (i, j, k) != (0, 0, 0)])
    nonzero = np.abs(offsets).sum(axis=1)
    if count == 6:
        offsets = offsets[nonzero == 1]
    elif count == 14:
        offsets = offsets[(nonzero == 1) | (nonzero == 3)]
    elif count != 26:
        raise ValueError(f"Direction bin count must be 6, 14 or 26, got {count}")
    bins = offsets / np.linalg.norm(offsets, axis=1, keepdims=True)
    bins.setflags(write=False)
    return bins


def direction_bin(vectors: np.ndarray, count: int = 26) -> np.ndarray | int:
    """Index of the closest bin direction (largest dot product, lowest index on ties)."""
    vectors = np.asarray(vectors, dtype=np.float64)
    scores = vectors.reshape(-1, 3) @ direction_bins(count).T
    best = np.argmax(scores, axis=1)
    return int(best[0]) if vectors.ndim == 1 else best


def popcount(values: np.ndarray) -> np.ndarray:
    raw = np.ascontiguousarray(values, dtype=np.uint32).reshape(-1, 1).view(np.uint8)
    return np.unpackbits(raw, axis=1).sum(axis=1).reshape(np.shape(values))


class ReachabilityMap(BaseModel):
    """Voxel grid in the robot base frame; each cell is a bitmask over direction bins."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    voxel_size: float = Field(gt=0.0, description="Voxel edge length (m)")
    lower: tuple[float, float, float] = Field(description="Grid origin, lower corner of voxel (0, 0, 0)")
    direction_count: int = Field(default=26, description="Number of approach-direction bins")
    cells: np.ndarray = Field(description="uint32 bitmask per voxel, shape (nx, ny, nz)")

    @field_validator("cells", mode="before")
    @classmethod
    def _as_cells(cls, value) -> np.ndarray:
        cells = np.array(value, dtype=np.uint32)
        if cells.ndim != 3:
            raise ValueError(f"Cells must be a 3D grid, got shape {cells.shape}")
        cells.setflags(write=False)
        return cells

    @property
    def shape(self) -> tuple[int, int, int]:
        return tuple(int(v) for v in self.cells.shape)

    @property
    def upper(self) -> tuple[float, float, float]:
        return tuple(float(lo + n * self.voxel_size) for lo, n in zip(self.lower, self.shape))

    def voxel_indices(self, positions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
        index = np.floor((positions - np.asarray(self.lower)) / self.voxel_size).astype(np.int64)
        inside = np.all((index >= 0) & (index < np.asarray(self.shape)), axis=1)
        return index, inside

    def voxel_centers(self, index: np.ndarray) -> np.ndarray:
        return np.asarray(self.lower) + (np.asarray(index) + 0.5) * self.voxel_size

    def masks_at(self, positions: np.ndarray) -> np.ndarray:
        index, inside = self.voxel_indices(positions)
        masks = np.zeros(len(index), dtype=np.uint32)
        hit = index[inside]
        masks[inside] = self.cells[hit[:, 0], hit[:, 1], hit[:, 2]]
        return masks

    def bins_at(self, position) -> int:
        """Bitmask of reachable direction bins at ``position``; 0 outside the grid."""
        return int(self.masks_at(np.asarray(position))[0])

    def reachable_many(self, positions: np.ndarray, directions: np.ndarray) -> np.ndarray:
        bins = np.atleast_1d(direction_bin(np.asarray(directions).reshape(-1, 3), self.direction_count))
        masks = self.masks_at(positions)
        return (masks >> bins.astype(np.uint32)) & np.uint32(1) == 1

    def reachable_fraction(self) -> float:
        return float(np.count_nonzero(self.cells) / self.cells.size)

    def score_at(self, position) -> int:
        return int(popcount(np.uint32(self.bins_at(position))))


def map_grid(arm: ArmModel, resolution: float) -> tuple[np.ndarray, tuple[int, int, int]]:
    base = np.asarray(arm.base_offset.position)
    reach = arm.max_reach
    lower = np.floor((base - reach) / resolution) * resolution
    shape = np.ceil((base + reach - lower) / resolution).astype(int)
    return lower, tuple(int(v) for v in shape)


def _mark_chunk(
    arm: ArmModel, lower: np.ndarray, shape: tuple[int, int, int], resolution: float, bins: int,
    seed: np.random.SeedSequence, count: int,
) -> np.ndarray:
    rng = np.random.default_rng(seed)
    joints, lift = arm.sample_joints(rng, count)
    positions, directions = arm.forward_kinematics(joints, lift)
    index = np.floor((positions - lower) / resolution).astype(np.int64)
    index = np.clip(index, 0, np.asarray(shape) - 1)
    flat = np.ravel_multi_index(index.T, shape)
    bits = np.left_shift(np.uint32(1), direction_bin(directions, bins).astype(np.uint32))
    cells = np.zeros(int(np.prod(shape)), dtype=np.uint32)
    np.bitwise_or.at(cells, flat, bits)
    return cells


def build_reachability_map(
    arm: ArmModel,
    resolution: float = 0.05,
    direction_bins_count: int = 26,
    samples: int = 1_000_000,
    seed: int = 0,
    jobs: int = 1,
) -> ReachabilityMap:
    """Sample joint configurations and mark each end-effector voxel with its approach-direction bin.

    Samples are split into fixed-size chunks seeded from one ``SeedSequence``;
    chunk masks are OR-merged, so the map is identical for any ``jobs``.
    """
    if not resolution > 0.0:
        raise InvalidResolutionError(f"Resolution must be > 0, got {resolution}")
    if samples < MIN_SAMPLES:
        raise ValueError(f"Need at least {MIN_SAMPLES} samples, got {samples}")
    direction_bins(direction_bins_count)

    lower, shape = map_grid(arm, resolution)
    chunk_sizes = [SAMPLES_PER_CHUNK] * (samples // SAMPLES_PER_CHUNK)
    if samples % SAMPLES_PER_CHUNK:
        chunk_sizes.append(samples % SAMPLES_PER_CHUNK)
    seeds = np.random.SeedSequence(seed).spawn(len(chunk_sizes))
    logger.info(
        "Building reachability map: grid %s at %.3f m, %d samples in %d chunks, %d jobs",
        shape, resolution, samples, len(chunk_sizes), jobs,
    )

    def run(args: tuple[np.random.SeedSequence, int]) -> np.ndarray:
        return _mark_chunk(arm, lower, shape, resolution, direction_bins_count, *args)

    cells = np.zeros(int(np.prod(shape)), dtype=np.uint32)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as executor:
            for chunk in executor.map(run, zip(seeds, chunk_sizes)):
                cells |= chunk
    else:
        for args in zip(seeds, chunk_sizes):
            cells |= run(args)
    cells = cells.reshape(shape)

    marked = np.argwhere(cells != 0)
    centers = lower + (marked + 0.5) * resolution
    limit = arm.max_reach + math.sqrt(3.0) * resolution / 2.0
    distances = np.linalg.norm(centers - np.asarray(arm.base_offset.position), axis=1)
    assert np.all(distances <= limit + 1e-9), "Marked voxel beyond the arm's maximum reach"

    result = ReachabilityMap(
        voxel_size=resolution, lower=tuple(lower), direction_count=direction_bins_count, cells=cells
    )
    logger.info("Reachability map built: %.2f%% of voxels reachable", 100.0 * result.reachable_fraction())
    return result


def is_reachable(reach_map: ReachabilityMap, pose: Pose) -> bool:
    """Whether the voxel of ``pose`` (robot base frame) has the bin of its approach axis (X) set."""
    return bool(reach_map.reachable_many(np.asarray(pose.position), pose.axis(0))[0])


class BaseAlignmentParams(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    radii: tuple[float, ...] = Field(default=(0.55, 0.65, 0.75), description="Candidate circle radii (m)")
    headings: int = Field(default=16, ge=1, description="Candidate base positions per radius")
    footprint_radius: float = Field(default=0.27, gt=0.0, description="Base footprint cylinder radius (m)")
    footprint_height: tuple[float, float] = Field(
        default=(0.02, 0.35), description="Footprint cylinder z range above the base (m)"
    )


def _footprint_blocked(env: KdTree | None, base: Pose, params: BaseAlignmentParams) -> bool:
    if env is None:
        return False
    z_low, z_high = (base.position[2] + h for h in params.footprint_height)
    center = np.array([base.position[0], base.position[1], (z_low + z_high) / 2.0])
    radius = math.hypot(params.footprint_radius, (z_high - z_low) / 2.0)
    near = env.points[env.radius_query(center, radius)]
    if len(near) == 0:
        return False
    planar = np.hypot(near[:, 0] - center[0], near[:, 1] - center[1])
    inside = (planar <= params.footprint_radius) & (near[:, 2] >= z_low) & (near[:, 2] <= z_high)
    return bool(np.any(inside))


def _base_score(reach_map: ReachabilityMap, base: Pose, target: np.ndarray) -> int:
    return reach_map.score_at(base.inverse().transform_points(target)[0])


def align_base(
    object_obb: OrientedBoundingBox,
    reach_map: ReachabilityMap,
    env: KdTree | None,
    current_base: Pose,
    candidates: int | None = None,
    params: BaseAlignmentParams | None = None,
) -> Pose:
    """Choose a base pose around the object that maximizes reachable direction bins at its center.

    Candidates sit on circles around the object center, face it, and start from
    the direction perpendicular to the object's principal horizontal axis. The
    current base is kept when its footprint is clear and it already scores at
    least 90% of the best candidate.
    """
    params = params or BaseAlignmentParams()
    headings = params.headings if candidates is None else candidates
    if headings < 1:
        raise ValueError(f"Need at least one candidate heading, got {headings}")

    target = np.asarray(object_obb.center)
    principal = object_obb.axes[:, 0]
    if math.hypot(principal[0], principal[1]) < 1e-9:
        principal = object_obb.axes[:, 1]
    first_angle = math.atan2(principal[1], principal[0]) + math.pi / 2.0

    best: tuple[int, float, int] | None = None
    best_pose: Pose | None = None
    index = 0
    for radius in params.radii:
        for k in range(headings):
            angle = first_angle + 2.0 * math.pi * k / headings
            position = (
                target[0] - radius * math.cos(angle),
                target[1] - radius * math.sin(angle),
                current_base.position[2],
            )
            candidate = Pose.from_yaw(angle, position)
            if _footprint_blocked(env, candidate, params):
                logger.debug("Base candidate %d blocked by the environment", index)
                index += 1
                continue
            score = _base_score(reach_map, candidate, target)
            if score > 0:
                displacement = math.hypot(
                    position[0] - current_base.position[0], position[1] - current_base.position[1]
                )
                key = (-score, displacement, index)
                if best is None or key < best:
                    best, best_pose = key, candidate
            index += 1

    if best is None or best_pose is None:
        raise NoValidBasePoseError(f"None of {index} base candidates is collision-free with a reachable object")

    best_score = -best[0]
    current_score = _base_score(reach_map, current_base, target)
    if _footprint_blocked(env, current_base, params):
        logger.info("Current base footprint is blocked by the environment")
    elif current_score >= SHORT_CIRCUIT_RATIO * best_score:
        logger.info("Current base kept: score %d vs best candidate %d", current_score, best_score)
        return current_base
    logger.info("Base aligned: score %d, heading %.1f deg", best_score, math.degrees(best_pose.yaw))
    return best_pose
