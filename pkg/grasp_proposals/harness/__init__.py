from grasp_proposals.harness.fixtures import FIXTURES, cube_on_table, oversized, tight_box
from grasp_proposals.harness.oracles import (
    oracle_approach_collision,
    oracle_clearance,
    oracle_closing_extent,
    oracle_collision,
    oracle_width_rejected,
    oracle_workspace_margin,
)
from grasp_proposals.harness.scene_generation import ObjectSpec, SceneRecipe, TableSpec, generate_scene, model_cloud

__all__ = [
    "FIXTURES",
    "ObjectSpec",
    "SceneRecipe",
    "TableSpec",
    "cube_on_table",
    "generate_scene",
    "model_cloud",
    "oracle_approach_collision",
    "oracle_clearance",
    "oracle_closing_extent",
    "oracle_collision",
    "oracle_width_rejected",
    "oracle_workspace_margin",
    "oversized",
    "tight_box",
]
