"""File formats: point clouds, scenes, reachability maps, reports."""

from grasp_proposals.io.model_library import ModelLibrary
from grasp_proposals.io.point_cloud_io import LoadedCloud, load_point_cloud, read_point_cloud, write_point_cloud
from grasp_proposals.io.reachmap_file import load_reachability_map, save_reachability_map
from grasp_proposals.io.report import GraspReport, build_report, write_debug_export, write_report
from grasp_proposals.io.scene_file import LoadedScene, SceneFile, load_scene, write_scene

__all__ = [
    "GraspReport",
    "LoadedCloud",
    "LoadedScene",
    "ModelLibrary",
    "SceneFile",
    "build_report",
    "load_point_cloud",
    "load_reachability_map",
    "load_scene",
    "read_point_cloud",
    "save_reachability_map",
    "write_debug_export",
    "write_point_cloud",
    "write_report",
    "write_scene",
]
