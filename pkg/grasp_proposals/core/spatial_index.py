"""Static KD-tree over a point cloud with exact radius and nearest-neighbor queries.

Queries are evaluated in batches: every (query, node) pair on the current
frontier is tested against the node's bounding box with numpy, pruned pairs are
dropped and surviving internal nodes are expanded into their children. Leaves
store point indices in ascending order, so per-query results are sorted.
"""

from __future__ import annotations

import logging

import numpy as np

from grasp_proposals.core.exceptions import EmptyCloudError
from grasp_proposals.core.geometry import PointCloud

logger = logging.getLogger(__name__)

DEFAULT_LEAF_SIZE = 16


def _squared_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return ((a - b) ** 2).sum(axis=-1)


def _leaf_ranges(starts: np.ndarray, ends: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Expand per-leaf [start, end) ranges into flat positions plus the owning row of each position."""
    counts = ends - starts
    owner = np.repeat(np.arange(len(counts)), counts)
    offsets = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    return starts[owner] + offsets, owner


class KdTree:
    """Immutable balanced 3D tree built by median splits on the widest-spread axis.

    Safe to query from several threads once built.
    """

    def __init__(self, cloud: PointCloud, leaf_size: int = DEFAULT_LEAF_SIZE):
        if cloud.is_empty:
            raise EmptyCloudError("Cannot build a KD-tree over an empty cloud")
        if leaf_size < 1:
            raise ValueError(f"leaf_size must be >= 1, got {leaf_size}")
        self.points = cloud.points
        self.leaf_size = leaf_size
        self._build()

    def _build(self) -> None:
        points = self.points
        order = np.arange(len(points))
        lows: list[np.ndarray] = []
        highs: list[np.ndarray] = []
        left: list[int] = []
        right: list[int] = []
        starts: list[int] = []
        ends: list[int] = []
        split_dims: list[int] = []
        split_values: list[float] = []

        def new_node(start: int, end: int) -> int:
            starts.append(start)
            ends.append(end)
            lows.append(np.zeros(3))
            highs.append(np.zeros(3))
            left.append(-1)
            right.append(-1)
            split_dims.append(0)
            split_values.append(0.0)
            return len(starts) - 1

        max_depth = 0
        stack = [(new_node(0, len(points)), 0)]
        while stack:
            node, depth = stack.pop()
            max_depth = max(max_depth, depth)
            start, end = starts[node], ends[node]
            members = order[start:end]
            block = points[members]
            low, high = block.min(axis=0), block.max(axis=0)
            lows[node], highs[node] = low, high

            spread = high - low
            if end - start <= self.leaf_size or not np.any(spread > 0.0):
                order[start:end] = np.sort(members)
                continue

            dim = int(np.argmax(spread))
            half = (end - start) // 2
            partition = np.argpartition(block[:, dim], half)
            order[start:end] = members[partition]
            split_dims[node] = dim
            split_values[node] = float(block[partition[half], dim])

            left_child = new_node(start, start + half)
            right_child = new_node(start + half, end)
            left[node], right[node] = left_child, right_child
            stack.append((right_child, depth + 1))
            stack.append((left_child, depth + 1))

        self._order = order
        self._low = np.array(lows)
        self._high = np.array(highs)
        self._left = np.array(left, dtype=np.int64)
        self._right = np.array(right, dtype=np.int64)
        self._start = np.array(starts, dtype=np.int64)
        self._end = np.array(ends, dtype=np.int64)
        self._split_dim = np.array(split_dims, dtype=np.int64)
        self._split_value = np.array(split_values)
        self._depth = max_depth
        logger.debug("Built KD-tree over %d points: %d nodes, depth %d", len(points), len(starts), max_depth)

    @property
    def size(self) -> int:
        return len(self.points)

    @property
    def depth(self) -> int:
        return self._depth

    @property
    def node_count(self) -> int:
        return len(self._start)

    def leaf_indices(self) -> list[np.ndarray]:
        """Point indices held by each leaf, in node order."""
        leaves = np.flatnonzero(self._left < 0)
        return [self._order[self._start[n] : self._end[n]] for n in leaves]

    def _box_distances(self, queries: np.ndarray, nodes: np.ndarray) -> np.ndarray:
        below = np.maximum(self._low[nodes] - queries, 0.0)
        above = np.maximum(queries - self._high[nodes], 0.0)
        return (below**2).sum(axis=-1) + (above**2).sum(axis=-1)

    def _expand(self, query_ids: np.ndarray, nodes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return (
            np.concatenate([query_ids, query_ids]),
            np.concatenate([self._left[nodes], self._right[nodes]]),
        )

    def _leaf_candidates(self, query_ids: np.ndarray, leaves: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        positions, owner = _leaf_ranges(self._start[leaves], self._end[leaves])
        return query_ids[owner], self._order[positions]

    def radius_query_many(self, centers: np.ndarray, radii: np.ndarray | float) -> list[np.ndarray]:
        """Indices within the closed ball around each center, ascending per center."""
        centers = np.asarray(centers, dtype=np.float64).reshape(-1, 3)
        radii = np.broadcast_to(np.asarray(radii, dtype=np.float64), (len(centers),))
        if np.any(radii < 0.0):
            raise ValueError("Radius must be >= 0")
        bound = radii**2

        found_queries: list[np.ndarray] = []
        found_points: list[np.ndarray] = []
        query_ids = np.arange(len(centers))
        nodes = np.zeros(len(centers), dtype=np.int64)
        while query_ids.size:
            keep = self._box_distances(centers[query_ids], nodes) <= bound[query_ids]
            query_ids, nodes = query_ids[keep], nodes[keep]
            is_leaf = self._left[nodes] < 0
            if np.any(is_leaf):
                owners, candidates = self._leaf_candidates(query_ids[is_leaf], nodes[is_leaf])
                hit = _squared_distances(self.points[candidates], centers[owners]) <= bound[owners]
                found_queries.append(owners[hit])
                found_points.append(candidates[hit])
            query_ids, nodes = self._expand(query_ids[~is_leaf], nodes[~is_leaf])

        if not found_queries:
            return [np.zeros(0, dtype=np.int64) for _ in range(len(centers))]
        owners = np.concatenate(found_queries)
        indices = np.concatenate(found_points)
        ordering = np.lexsort((indices, owners))
        owners, indices = owners[ordering], indices[ordering]
        bounds = np.searchsorted(owners, np.arange(len(centers) + 1))
        return [indices[bounds[i] : bounds[i + 1]] for i in range(len(centers))]

    def any_within(self, centers: np.ndarray, radii: np.ndarray | float) -> np.ndarray:
        """True for each center that has at least one point within its closed ball."""
        centers = np.asarray(centers, dtype=np.float64).reshape(-1, 3)
        radii = np.broadcast_to(np.asarray(radii, dtype=np.float64), (len(centers),))
        bound = radii**2
        hit = np.zeros(len(centers), dtype=bool)

        query_ids = np.arange(len(centers))
        nodes = np.zeros(len(centers), dtype=np.int64)
        while query_ids.size:
            keep = ~hit[query_ids]
            query_ids, nodes = query_ids[keep], nodes[keep]
            keep = self._box_distances(centers[query_ids], nodes) <= bound[query_ids]
            query_ids, nodes = query_ids[keep], nodes[keep]
            is_leaf = self._left[nodes] < 0
            if np.any(is_leaf):
                owners, candidates = self._leaf_candidates(query_ids[is_leaf], nodes[is_leaf])
                inside = _squared_distances(self.points[candidates], centers[owners]) <= bound[owners]
                hit[owners[inside]] = True
            query_ids, nodes = self._expand(query_ids[~is_leaf], nodes[~is_leaf])
        return hit

    def _descend(self, queries: np.ndarray) -> np.ndarray:
        nodes = np.zeros(len(queries), dtype=np.int64)
        rows = np.arange(len(queries))
        internal = self._left[nodes] >= 0
        while np.any(internal):
            active = nodes[internal]
            go_left = queries[rows[internal], self._split_dim[active]] < self._split_value[active]
            nodes[internal] = np.where(go_left, self._left[active], self._right[active])
            internal = self._left[nodes] >= 0
        return nodes

    def nearest_many(self, queries: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Nearest point index and Euclidean distance per query; equal distances resolve to the lowest index."""
        queries = np.asarray(queries, dtype=np.float64).reshape(-1, 3)
        count = len(queries)
        best_index = np.full(count, np.iinfo(np.int64).max, dtype=np.int64)
        best_d2 = np.full(count, np.inf)

        def absorb(owners: np.ndarray, candidates: np.ndarray) -> None:
            d2 = _squared_distances(self.points[candidates], queries[owners])
            ordering = np.lexsort((candidates, d2, owners))
            owners, candidates, d2 = owners[ordering], candidates[ordering], d2[ordering]
            first = np.ones(len(owners), dtype=bool)
            first[1:] = owners[1:] != owners[:-1]
            owners, candidates, d2 = owners[first], candidates[first], d2[first]
            better = (d2 < best_d2[owners]) | ((d2 == best_d2[owners]) & (candidates < best_index[owners]))
            best_d2[owners[better]] = d2[better]
            best_index[owners[better]] = candidates[better]

        rows = np.arange(count)
        absorb(*self._leaf_candidates(rows, self._descend(queries)))

        query_ids = rows
        nodes = np.zeros(count, dtype=np.int64)
        while query_ids.size:
            keep = self._box_distances(queries[query_ids], nodes) <= best_d2[query_ids]
            query_ids, nodes = query_ids[keep], nodes[keep]
            is_leaf = self._left[nodes] < 0
            if np.any(is_leaf):
                absorb(*self._leaf_candidates(query_ids[is_leaf], nodes[is_leaf]))
            query_ids, nodes = self._expand(query_ids[~is_leaf], nodes[~is_leaf])
        return best_index, np.sqrt(best_d2)

    def radius_query(self, center, radius: float) -> list[int]:
        return self.radius_query_many(np.asarray(center, dtype=np.float64), radius)[0].tolist()

    def nearest(self, query) -> tuple[int, float]:
        index, distance = self.nearest_many(np.asarray(query, dtype=np.float64))
        return int(index[0]), float(distance[0])


def build(cloud: PointCloud, leaf_size: int = DEFAULT_LEAF_SIZE) -> KdTree:
    return KdTree(cloud, leaf_size=leaf_size)


def radius_query(tree: KdTree, center, radius: float) -> list[int]:
    return tree.radius_query(center, radius)


def nearest(tree: KdTree, query) -> tuple[int, float]:
    return tree.nearest(query)
