"""Domain records shared by the planner, the supervisor, the harness and the file formats."""

import math
from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from grasp_proposals.core.geometry import Pose, PointCloud
from grasp_proposals.core.reachability import WorkspaceBounds


MIN_PROBES = 8


class CollisionProbe(BaseModel):
    """Sphere in the end-effector frame used for collision lookups."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    center: tuple[float, float, float] = Field(description="Probe center in the end-effector frame (m)")
    radius: float = Field(gt=0.0, description="Probe radius (m)")


def _line_samples(start: float, stop: float, spacing: float) -> np.ndarray:
    count = max(int(math.ceil((stop - start) / spacing - 1e-9)) + 1, 2)
    return np.linspace(start, stop, count)


class GripperSpec(BaseModel):
    """Parallel-jaw gripper geometry.

    End-effector frame: origin at the wrist, X forward (approach), Y along the
    closing direction, Z along the finger axis. The palm occupies
    x in [0, palm_depth], the fingers x in [palm_depth, palm_depth + finger_length].
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    max_opening: float = Field(default=0.08, gt=0.0, description="Maximum finger opening (m)")
    finger_length: float = Field(default=0.05, gt=0.0, description="Finger length along the approach axis (m)")
    finger_thickness: float = Field(default=0.01, gt=0.0, description="Finger thickness along the closing axis (m)")
    palm_width: float = Field(default=0.10, gt=0.0, description="Palm width along the closing axis (m)")
    palm_depth: float = Field(default=0.06, gt=0.0, description="Palm depth along the approach axis (m)")
    collision_probes: tuple[CollisionProbe, ...] = Field(
        default=(), description="Explicit probes; derived from the dimensions when empty"
    )

    @field_validator("collision_probes")
    @classmethod
    def _enough_probes(cls, value: tuple[CollisionProbe, ...]) -> tuple[CollisionProbe, ...]:
        if value and len(value) < MIN_PROBES:
            raise ValueError(f"Need at least {MIN_PROBES} collision probes to cover fingers and palm, got {len(value)}")
        return value

    @property
    def reach(self) -> float:
        """Distance from the wrist to the finger tips."""
        return self.palm_depth + self.finger_length

    def default_probes(self) -> tuple[CollisionProbe, ...]:
        """Probe spheres along both fingers and over the palm, spaced at most one radius apart."""
        probes: list[CollisionProbe] = []
        finger_radius = self.finger_thickness / 2.0
        finger_y = self.max_opening / 2.0 + finger_radius
        for x in _line_samples(self.palm_depth, self.reach, finger_radius):
            for y in (-finger_y, finger_y):
                probes.append(CollisionProbe(center=(float(x), float(y), 0.0), radius=finger_radius))

        palm_radius = min(self.palm_depth, self.palm_width) / 4.0
        half_width = self.palm_width / 2.0
        for x in _line_samples(0.0, self.palm_depth, palm_radius):
            for y in _line_samples(-half_width, half_width, palm_radius):
                probes.append(CollisionProbe(center=(float(x), float(y), 0.0), radius=palm_radius))
        return tuple(probes)

    @property
    def probes(self) -> tuple[CollisionProbe, ...]:
        return self.collision_probes or self.default_probes()

    def probe_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        probes = self.probes
        centers = np.array([p.center for p in probes], dtype=np.float64)
        radii = np.array([p.radius for p in probes], dtype=np.float64)
        return centers, radii


class GraspStatus(str, Enum):
    PENDING = "pending"
    REJECTED_COLLISION = "rejected_collision"
    REJECTED_APPROACH = "rejected_approach"
    REJECTED_WIDTH = "rejected_width"
    REJECTED_UNREACHABLE = "rejected_unreachable"
    FEASIBLE = "feasible"


class CostTerms(BaseModel):
    model_config = ConfigDict(frozen=True)

    pregrasp_availability: float = Field(ge=0.0, le=1.0, description="Fraction of available neighbor pre-grasps")
    obstacle_clearance: float = Field(ge=0.0, description="Distance from the grasp position to the environment (m)")
    workspace_margin: float = Field(description="Signed distance to the nearest workspace face (m)")


class GraspCandidate(BaseModel):
    """One sampled grasp with its filter status and, once scored, its cost."""

    model_config = ConfigDict(validate_assignment=True)

    index: int = Field(ge=0, description="Sample index, the deterministic tie-breaker")
    polar_index: int = Field(ge=0, description="Row on the sampling sphere, 0 = lowest elevation")
    azimuth_index: int = Field(ge=0, description="Column on the sampling sphere")
    twist_index: int = Field(ge=0, description="Position in the twist-angle list")
    elevation: float = Field(description="Approach elevation above horizontal (rad)")
    azimuth: float = Field(description="World azimuth of the candidate position around the CoM (rad)")
    twist_angle: float = Field(description="Rotation about the approach axis (rad)")
    grasp_pose: Pose
    pre_grasp_pose: Pose
    approach_path: list[Pose] = Field(default_factory=list, description="Pre-grasp to grasp waypoints")
    status: GraspStatus = GraspStatus.PENDING
    closing_extent: float | None = Field(default=None, description="Object extent along the closing axis (m)")
    cost_terms: CostTerms | None = None
    total_cost: float | None = None

    @property
    def grid_key(self) -> tuple[int, int, int]:
        return self.polar_index, self.azimuth_index, self.twist_index

    def __str__(self):
        cost = "-" if self.total_cost is None else f"{self.total_cost:.4f}"
        return f"#{self.index} ({self.status.value}, cost {cost})"


class SceneModel(BaseModel):
    """Complete planner input.

    The environment cloud must not contain object points; the segmentation mask
    applied at ingestion is responsible for that. ``environment_cloud=None`` is
    the explicit empty-environment variant.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    object_cloud: PointCloud
    environment_cloud: PointCloud | None = None
    object_label: str | None = None
    gripper: GripperSpec = Field(default_factory=GripperSpec)
    base_pose: Pose = Field(default_factory=Pose.identity)
    workspace: WorkspaceBounds = Field(default_factory=WorkspaceBounds)

    @field_validator("object_cloud")
    @classmethod
    def _object_not_empty(cls, value: PointCloud) -> PointCloud:
        if value.is_empty:
            raise ValueError("Object cloud must not be empty")
        return value

    @field_validator("environment_cloud")
    @classmethod
    def _empty_environment_is_none(cls, value: PointCloud | None) -> PointCloud | None:
        return None if value is None or value.is_empty else value


class SamplingParams(BaseModel):
    """Quadrant-sphere sampling grid."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    n_polar: int = Field(default=4, ge=1, description="Elevation rows from horizontal to top-down")
    n_azimuth: int = Field(default=9, ge=1, description="Azimuth columns across the robot-facing half")
    twist_angles_deg: tuple[float, ...] = Field(
        default=(-90.0, -45.0, 0.0, 45.0, 90.0), description="Rotations about the approach axis (deg)"
    )
    standoff: float | None = Field(
        default=None, gt=0.0, description="Sphere radius (m); None = max OBB half-extent + palm depth + margin"
    )
    standoff_margin: float = Field(default=0.02, ge=0.0, description="Added to the automatic standoff (m)")
    pregrasp_offset: float = Field(default=0.10, ge=0.0, description="Pre-grasp distance behind the grasp (m)")
    approach_step: float = Field(default=0.01, gt=0.0, description="Approach path discretization (m)")
    seed: int | None = Field(
        default=None, description="Seeds a random sub-cell offset of the sphere grid; None keeps the cell centers"
    )

    @field_validator("twist_angles_deg")
    @classmethod
    def _twists_present(cls, value: tuple[float, ...]) -> tuple[float, ...]:
        if not value:
            raise ValueError("At least one twist angle is required")
        return value

    @property
    def twist_angles(self) -> list[float]:
        return [math.radians(a) for a in self.twist_angles_deg]


class ScoreWeights(BaseModel):
    """Cost weights and decay scales of the affordability heuristic."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    w_pregrasp: float = Field(default=1.0, ge=0.0)
    w_clearance: float = Field(default=1.0, ge=0.0)
    w_margin: float = Field(default=0.5, ge=0.0)
    sigma_clearance: float = Field(default=0.05, gt=0.0, description="Clearance decay scale (m)")
    sigma_margin: float = Field(default=0.10, gt=0.0, description="Workspace margin decay scale (m)")

    def scaled(self, factor: float) -> "ScoreWeights":
        return self.model_copy(
            update={
                "w_pregrasp": self.w_pregrasp * factor,
                "w_clearance": self.w_clearance * factor,
                "w_margin": self.w_margin * factor,
            }
        )


class PlannerConfig(BaseModel):
    """Planner settings as read from the ``planner`` section of the config file."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    sampling: SamplingParams = Field(default_factory=SamplingParams)
    weights: ScoreWeights = Field(default_factory=ScoreWeights)
    closing_clearance: float = Field(default=0.01, ge=0.0, description="Subtracted from max_opening (m)")
    gravity_aligned: bool = Field(default=True, description="Fit the object box with one axis vertical")
    use_registration: bool = Field(default=True, description="Complete the object cloud with a library model")
    align_base: bool = Field(default=False, description="Re-align the base with the reachability map first")
    jobs: int = Field(default=1, ge=1, description="Worker threads for per-candidate checks")
