"""Versioned binary reachability map file.

Layout, little-endian: 8-byte magic, u16 version, u16 direction-bin count,
f64 voxel size, 3 x f64 lower bound, 3 x f64 upper bound, 3 x u32 grid shape,
then one u32 bitmask per voxel in C order.
"""

import logging
import struct
from pathlib import Path

import numpy as np

from grasp_proposals.core.exceptions import ReachabilityMapFormatError
from grasp_proposals.core.reachability import ReachabilityMap

logger = logging.getLogger(__name__)

MAGIC = b"GRSPRMAP"
VERSION = 1
HEADER = struct.Struct("<8sHHd3d3d3I")


def save_reachability_map(path: str | Path, reach_map: ReachabilityMap) -> Path:
    path = Path(path)
    header = HEADER.pack(
        MAGIC, VERSION, reach_map.direction_count, reach_map.voxel_size, *reach_map.lower, *reach_map.upper,
        *reach_map.shape,
    )
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(header)
        f.write(np.ascontiguousarray(reach_map.cells, dtype="<u4").tobytes())
    logger.info("Saved reachability map %s to %s", reach_map.shape, path)
    return path


def load_reachability_map(path: str | Path) -> ReachabilityMap:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Reachability map not found: {path}")
    raw = path.read_bytes()
    if len(raw) < HEADER.size:
        raise ReachabilityMapFormatError(f"{path}: file shorter than the header")
    magic, version, bins, voxel, *rest = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ReachabilityMapFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise ReachabilityMapFormatError(f"{path}: unsupported version {version}")
    lower, upper, shape = tuple(rest[0:3]), tuple(rest[3:6]), tuple(rest[6:9])

    expected = int(np.prod(shape)) * 4
    body = raw[HEADER.size :]
    if len(body) != expected:
        raise ReachabilityMapFormatError(f"{path}: body has {len(body)} bytes, expected {expected}")
    if not np.allclose(np.asarray(lower) + np.asarray(shape) * voxel, upper, atol=1e-9):
        raise ReachabilityMapFormatError(f"{path}: bounds do not match grid shape and voxel size")

    cells = np.frombuffer(body, dtype="<u4").reshape(shape)
    return ReachabilityMap(voxel_size=voxel, lower=lower, direction_count=bins, cells=cells)
