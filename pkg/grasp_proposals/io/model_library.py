"""Object models keyed by class label: one point-cloud file per label."""

import logging
from pathlib import Path

from grasp_proposals.core.geometry import PointCloud
from grasp_proposals.io.point_cloud_io import load_point_cloud

logger = logging.getLogger(__name__)

MODEL_SUFFIXES = (".ply", ".xyz", ".txt")


class ModelLibrary:
    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        if not self.directory.is_dir():
            raise FileNotFoundError(f"Model directory not found: {self.directory}")
        self._cache: dict[str, PointCloud] = {}

    def labels(self) -> list[str]:
        return sorted({p.stem for p in self.directory.iterdir() if p.suffix.lower() in MODEL_SUFFIXES})

    def path_for(self, label: str) -> Path | None:
        for suffix in MODEL_SUFFIXES:
            candidate = self.directory / f"{label}{suffix}"
            if candidate.is_file():
                return candidate
        return None

    def get(self, label: str | None) -> PointCloud | None:
        """Model cloud for ``label``, or None when the library has no model for it."""
        if not label:
            return None
        if label not in self._cache:
            path = self.path_for(label)
            if path is None:
                logger.info("No model for label '%s' in %s, registration skipped", label, self.directory)
                return None
            self._cache[label] = load_point_cloud(path)
        return self._cache[label]
