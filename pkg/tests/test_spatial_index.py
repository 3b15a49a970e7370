import math

import numpy as np
import pytest

from grasp_proposals.core.exceptions import EmptyCloudError
from grasp_proposals.core.geometry import PointCloud
from grasp_proposals.core.spatial_index import KdTree, build, nearest, radius_query


def brute_radius(points: np.ndarray, center: np.ndarray, radius: float) -> list[int]:
    return np.flatnonzero(((points - center) ** 2).sum(axis=-1) <= radius * radius).tolist()


def brute_nearest(points: np.ndarray, query: np.ndarray) -> tuple[int, float]:
    d2 = ((points - query) ** 2).sum(axis=-1)
    index = int(np.argmin(d2))
    return index, math.sqrt(d2[index])


def test_empty_cloud_raises():
    with pytest.raises(EmptyCloudError):
        KdTree(PointCloud.empty())


def test_single_point_tree():
    tree = build(PointCloud(points=[[1.0, 2.0, 3.0]]))
    assert tree.size == 1
    assert radius_query(tree, (1.0, 2.0, 3.0), 0.0) == [0]
    assert nearest(tree, (0.0, 0.0, 0.0)) == (0, pytest.approx(math.sqrt(14.0)))


def test_duplicates_are_kept():
    tree = KdTree(PointCloud(points=np.ones((40, 3))))
    assert tree.size == 40
    assert tree.radius_query((1.0, 1.0, 1.0), 0.0) == list(range(40))


def test_leaves_partition_the_points(rng):
    tree = KdTree(PointCloud(points=rng.uniform(size=(1000, 3))), leaf_size=8)
    leaves = tree.leaf_indices()
    assert all(len(leaf) <= 8 for leaf in leaves)
    assert sorted(np.concatenate(leaves).tolist()) == list(range(1000))


@pytest.mark.slow
def test_depth_is_logarithmic(rng):
    tree = KdTree(PointCloud(points=rng.uniform(size=(100_000, 3))))
    assert tree.depth <= math.ceil(math.log2(100_000 / tree.leaf_size)) + 1


def test_radius_zero_matches_exact_point_only(rng):
    points = rng.uniform(size=(200, 3))
    tree = KdTree(PointCloud(points=points))
    assert tree.radius_query(points[17], 0.0) == [17]


def test_radius_query_far_from_the_cloud_is_empty(rng):
    tree = KdTree(PointCloud(points=rng.uniform(size=(200, 3))))
    assert tree.radius_query((10.0, 10.0, 10.0), 0.5) == []


def test_negative_radius_raises(rng):
    tree = KdTree(PointCloud(points=rng.uniform(size=(20, 3))))
    with pytest.raises(ValueError):
        tree.radius_query((0.0, 0.0, 0.0), -0.1)


@pytest.mark.parametrize("size", [10, 100, 1000, 5000])
def test_radius_query_matches_brute_force(rng, size):
    points = rng.uniform(size=(size, 3))
    tree = KdTree(PointCloud(points=points))
    centers = rng.uniform(-0.1, 1.1, size=(100, 3))
    radii = rng.uniform(0.0, 0.3, size=100)
    for center, radius, found in zip(centers, radii, tree.radius_query_many(centers, radii)):
        assert found.tolist() == brute_radius(points, center, radius)


@pytest.mark.parametrize("size", [10, 100, 1000, 5000])
def test_any_within_matches_brute_force(rng, size):
    points = rng.uniform(size=(size, 3))
    tree = KdTree(PointCloud(points=points))
    centers = rng.uniform(-0.1, 1.1, size=(200, 3))
    radii = rng.uniform(0.0, 0.1, size=200)
    expected = [bool(brute_radius(points, c, r)) for c, r in zip(centers, radii)]
    assert tree.any_within(centers, radii).tolist() == expected


@pytest.mark.parametrize("size", [1, 10, 1000, 5000])
def test_nearest_matches_brute_force(rng, size):
    points = rng.uniform(size=(size, 3))
    tree = KdTree(PointCloud(points=points))
    queries = rng.uniform(-0.5, 1.5, size=(100, 3))
    indices, distances = tree.nearest_many(queries)
    for query, index, distance in zip(queries, indices, distances):
        expected_index, expected_distance = brute_nearest(points, query)
        assert index == expected_index
        assert distance == pytest.approx(expected_distance, abs=1e-12)


def test_nearest_tie_goes_to_lowest_index():
    tree = KdTree(PointCloud(points=[[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))
    assert tree.nearest((0.0, 0.0, 0.0))[0] == 0


def test_nearest_tie_between_duplicates_across_leaves(rng):
    points = np.vstack([rng.uniform(2.0, 3.0, size=(300, 3)), [[0.5, 0.5, 0.5]], rng.uniform(2.0, 3.0, size=(300, 3))])
    points = np.vstack([points, [[0.5, 0.5, 0.5]]])
    tree = KdTree(PointCloud(points=points), leaf_size=4)
    assert tree.nearest((0.5, 0.5, 0.4))[0] == 300


def test_queries_match_across_leaf_sizes(rng):
    points = rng.normal(size=(2000, 3))
    queries = rng.normal(size=(50, 3))
    small = KdTree(PointCloud(points=points), leaf_size=1)
    large = KdTree(PointCloud(points=points), leaf_size=64)
    assert np.array_equal(small.nearest_many(queries)[0], large.nearest_many(queries)[0])
    for a, b in zip(small.radius_query_many(queries, 0.4), large.radius_query_many(queries, 0.4)):
        assert np.array_equal(a, b)
