"""Recipes for the reference scenes: open table, tight box, oversized object."""

from grasp_proposals.core.geometry import Pose
from grasp_proposals.core.models import GripperSpec
from grasp_proposals.harness.scene_generation import ObjectSpec, SceneRecipe, TableSpec

TABLE_HEIGHT = 0.75
CUBE_SIZE = 0.06
CUBE_XY = (0.6, 0.0)
BOX_INNER_HALF = 0.04
BOX_WALL = 0.002
BOX_HEIGHT = 0.10

# Thin fingers that fit between the cube and the box walls.
TIGHT_BOX_GRIPPER = GripperSpec(
    max_opening=0.072, finger_length=0.05, finger_thickness=0.003, palm_width=0.05, palm_depth=0.04
)


def _cube(size: float, label: str) -> ObjectSpec:
    return ObjectSpec(
        shape="box",
        dimensions=(size, size, size),
        pose=Pose.translate(CUBE_XY[0], CUBE_XY[1], TABLE_HEIGHT + size / 2.0),
        label=label,
        target=True,
    )


def cube_on_table(seed: int = 0) -> SceneRecipe:
    return SceneRecipe(seed=seed, table=TableSpec(height=TABLE_HEIGHT), objects=[_cube(CUBE_SIZE, "cube")])


def tight_box(seed: int = 0) -> SceneRecipe:
    """The cube inside an open-top box whose inner faces are 1 cm from each cube side."""
    offset = BOX_INNER_HALF + BOX_WALL / 2.0
    length = 2.0 * (BOX_INNER_HALF + BOX_WALL)
    z = TABLE_HEIGHT + BOX_HEIGHT / 2.0
    x, y = CUBE_XY
    walls = [
        ObjectSpec(shape="box", dimensions=(BOX_WALL, length, BOX_HEIGHT), pose=Pose.translate(x - offset, y, z)),
        ObjectSpec(shape="box", dimensions=(BOX_WALL, length, BOX_HEIGHT), pose=Pose.translate(x + offset, y, z)),
        ObjectSpec(shape="box", dimensions=(length, BOX_WALL, BOX_HEIGHT), pose=Pose.translate(x, y - offset, z)),
        ObjectSpec(shape="box", dimensions=(length, BOX_WALL, BOX_HEIGHT), pose=Pose.translate(x, y + offset, z)),
    ]
    walls = [wall.model_copy(update={"label": "wall", "spacing": 0.001}) for wall in walls]
    return SceneRecipe(
        seed=seed,
        table=TableSpec(height=TABLE_HEIGHT),
        objects=[_cube(CUBE_SIZE, "cube"), *walls],
        gripper=TIGHT_BOX_GRIPPER,
    )


def oversized(seed: int = 0) -> SceneRecipe:
    """A 20 cm cube: wider than the default gripper opening in every direction."""
    return SceneRecipe(seed=seed, table=TableSpec(height=TABLE_HEIGHT), objects=[_cube(0.20, "crate")])


FIXTURES = {
    "cube_on_table": cube_on_table,
    "tight_box": tight_box,
    "oversized": oversized,
}
