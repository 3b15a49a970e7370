"""
Grasp Proposals - grasp pose planning for parallel-jaw grippers

Samples grasp candidates around a segmented object, filters them against the
environment point cloud and selects the most affordable one.
"""

__version__ = "0.1.0"
__author__ = "grasp-proposals-team"


__all__ = [
    "__version__",
    "__author__",
]
