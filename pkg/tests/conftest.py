import numpy as np
import pytest

from grasp_proposals.core.geometry import PointCloud, Pose
from grasp_proposals.core.reachability import ArmModel, build_reachability_map
from grasp_proposals.harness import cube_on_table, generate_scene, oversized, tight_box


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_pose(rng: np.random.Generator, max_shift: float = 1.0) -> Pose:
    quaternion = rng.normal(size=4)
    return Pose(position=tuple(rng.uniform(-max_shift, max_shift, 3)), orientation=tuple(quaternion))


def box_surface(rng: np.random.Generator, size=(0.3, 0.2, 0.1), count: int = 2000) -> np.ndarray:
    """Uniform random points on the six faces of an axis-aligned box centered at the origin."""
    half = np.asarray(size) / 2.0
    points = rng.uniform(-half, half, size=(count, 3))
    face_axis = rng.integers(0, 3, count)
    face_sign = rng.choice([-1.0, 1.0], count)
    points[np.arange(count), face_axis] = face_sign * half[face_axis]
    return points


def random_solid(rng: np.random.Generator, size=(0.2, 0.12, 0.06), count: int = 500) -> PointCloud:
    """Asymmetric random volume cloud: a box with a heavier corner lump."""
    half = np.asarray(size) / 2.0
    body = rng.uniform(-half, half, size=(count - count // 5, 3))
    lump = rng.uniform(half * 0.3, half, size=(count // 5, 3))
    return PointCloud(points=np.vstack([body, lump]))


@pytest.fixture
def make_pose():
    return random_pose


@pytest.fixture
def make_box_surface():
    return box_surface


@pytest.fixture
def make_solid():
    return random_solid


@pytest.fixture(scope="session")
def cube_scene():
    return generate_scene(cube_on_table(seed=0))


@pytest.fixture(scope="session")
def tight_box_scene():
    return generate_scene(tight_box(seed=0))


@pytest.fixture(scope="session")
def oversized_scene():
    return generate_scene(oversized(seed=0))


@pytest.fixture(scope="session")
def small_reach_map():
    return build_reachability_map(ArmModel(), resolution=0.1, samples=20_000, seed=0)
