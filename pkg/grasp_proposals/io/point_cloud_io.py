"""Point-cloud files: PLY (ASCII or binary little-endian) and plain 3-column text."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
from plyfile import PlyData, PlyElement
from pydantic import BaseModel, ConfigDict

from grasp_proposals.core.exceptions import EmptyAfterFilteringError, MalformedFileError
from grasp_proposals.core.geometry import PointCloud

logger = logging.getLogger(__name__)

PLY_MAGIC = b"ply"


class LoadedCloud(BaseModel):
    """A parsed cloud plus how many non-finite points were dropped."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    cloud: PointCloud
    dropped: int = 0
    path: str


def _read_ply(path: Path) -> np.ndarray:
    try:
        data = PlyData.read(str(path))
    except Exception as e:
        raise MalformedFileError(f"Invalid PLY: {e}", path=path, line=getattr(e, "line", None)) from e
    if "vertex" not in data:
        raise MalformedFileError("PLY has no vertex element", path=path)
    vertex = data["vertex"].data
    missing = [name for name in ("x", "y", "z") if name not in vertex.dtype.names]
    if missing:
        raise MalformedFileError(f"PLY vertex element lacks properties {missing}", path=path)
    return np.column_stack([vertex["x"], vertex["y"], vertex["z"]]).astype(np.float64)


def _read_text(path: Path) -> np.ndarray:
    rows: list[list[float]] = []
    with open(path, "r", encoding="utf-8") as f:
        for number, line in enumerate(f, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            fields = stripped.replace(",", " ").split()
            if len(fields) != 3:
                raise MalformedFileError(f"Expected 3 columns, got {len(fields)}", path=path, line=number)
            try:
                rows.append([float(v) for v in fields])
            except ValueError as e:
                raise MalformedFileError(f"Non-numeric value: {e}", path=path, line=number) from e
    return np.array(rows, dtype=np.float64).reshape(-1, 3)


def read_point_cloud(path: str | Path) -> LoadedCloud:
    """Parse ``path`` and drop non-finite points, keeping their count."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Point cloud file not found: {path}")
    with open(path, "rb") as f:
        is_ply = f.read(len(PLY_MAGIC)) == PLY_MAGIC
    points = _read_ply(path) if is_ply else _read_text(path)

    finite = np.all(np.isfinite(points), axis=1)
    dropped = int(len(points) - finite.sum())
    if dropped:
        logger.warning("%s: dropped %d non-finite points", path, dropped)
    if not finite.any():
        raise EmptyAfterFilteringError(f"{path}: no finite points ({len(points)} read, {dropped} dropped)")
    return LoadedCloud(cloud=PointCloud(points=points[finite]), dropped=dropped, path=str(path))


def load_point_cloud(path: str | Path) -> PointCloud:
    return read_point_cloud(path).cloud


def write_point_cloud(
    path: str | Path,
    points: PointCloud | np.ndarray,
    colors: np.ndarray | None = None,
    binary: bool = True,
) -> Path:
    """Write vertices as 32-bit floats, with optional 8-bit RGB."""
    path = Path(path)
    xyz = points.points if isinstance(points, PointCloud) else np.asarray(points, dtype=np.float64).reshape(-1, 3)
    fields = [("x", "<f4"), ("y", "<f4"), ("z", "<f4")]
    if colors is not None:
        fields += [("red", "u1"), ("green", "u1"), ("blue", "u1")]
    vertex = np.empty(len(xyz), dtype=fields)
    vertex["x"], vertex["y"], vertex["z"] = xyz[:, 0], xyz[:, 1], xyz[:, 2]
    if colors is not None:
        colors = np.asarray(colors, dtype=np.uint8).reshape(-1, 3)
        vertex["red"], vertex["green"], vertex["blue"] = colors[:, 0], colors[:, 1], colors[:, 2]

    path.parent.mkdir(parents=True, exist_ok=True)
    PlyData([PlyElement.describe(vertex, "vertex")], text=not binary, byte_order="<").write(str(path))
    logger.debug("Wrote %d points to %s", len(xyz), path)
    return path
