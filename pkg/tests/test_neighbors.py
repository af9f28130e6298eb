import numpy as np
import pytest

from vbdiffusion import neighbors, pointcloud
from vbdiffusion.errors import KTooLarge


def _brute_reference(pts, k):
    # independent of the kd-tree path: full distance matrix, same tie rule
    # (sort by distance then index), self forced to the front
    n = pts.shape[0]
    d2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=2)
    idx = np.empty((n, k), dtype=int)
    dist = np.empty((n, k))
    for i in range(n):
        order = sorted(range(n), key=lambda j: (d2[i, j], j))
        order.remove(i)
        row = [i] + order[: k - 1]
        idx[i] = row
        dist[i] = np.sqrt(d2[i, row])
    dist[:, 0] = 0.0
    return idx, dist


def test_knn_matches_brute_force_reference():
    rng = np.random.default_rng(11)
    pts = rng.standard_normal((60, 3))
    cloud = pointcloud.PointCloud(pts)
    g = neighbors.knn(cloud, 7)
    ref_idx, ref_dist = _brute_reference(pts, 7)
    np.testing.assert_array_equal(g.indices, ref_idx)
    np.testing.assert_allclose(g.distances, ref_dist, atol=1e-12)


def test_knn_tie_break_prefers_smaller_index():
    # integer coordinates so the equidistant pairs are exact in floats
    pts = np.array([[0.0], [1.0], [-1.0], [2.0], [-2.0]])
    g = neighbors.knn(pointcloud.PointCloud(pts), 5)
    assert list(g.indices[0]) == [0, 1, 2, 3, 4]
    assert list(g.indices[1]) == [1, 0, 3, 2, 4]


def test_knn_self_is_first_with_zero_distance():
    cloud = pointcloud.PointCloud(np.random.default_rng(0).standard_normal((30, 2)))
    g = neighbors.knn(cloud, 4)
    np.testing.assert_array_equal(g.indices[:, 0], np.arange(30))
    assert np.all(g.distances[:, 0] == 0.0)
    assert np.all(np.diff(g.distances, axis=1) >= 0)


def test_knn_handles_duplicate_points():
    # a pair of coincident points: each must still list itself first
    pts = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    g = neighbors.knn(pointcloud.PointCloud(pts), 2)
    np.testing.assert_array_equal(g.indices[:, 0], np.arange(4))
    assert g.indices[0, 1] == 1 and g.indices[1, 1] == 0
    assert g.distances[0, 1] == 0.0


def test_knn_rejects_k_above_n():
    cloud = pointcloud.gen_circle_uniform(5)
    with pytest.raises(KTooLarge):
        neighbors.knn(cloud, 6)


def test_knn_k_equals_one():
    cloud = pointcloud.gen_circle_uniform(5)
    g = neighbors.knn(cloud, 1)
    assert g.indices.shape == (5, 1)
    np.testing.assert_array_equal(g.indices[:, 0], np.arange(5))


def test_brute_path_agrees_with_kdtree_path():
    pts = np.random.default_rng(5).standard_normal((50, 2))
    cloud = pointcloud.PointCloud(pts)
    g = neighbors.knn(cloud, 6)
    bd, bi = neighbors._knn_brute(pts, 6)
    np.testing.assert_array_equal(g.indices, bi)
    np.testing.assert_allclose(g.distances, bd, atol=1e-12)


def test_pair_sq_dists_chunked():
    pts = np.random.default_rng(2).standard_normal((40, 3))
    rows = np.repeat(np.arange(40), 3)
    cols = np.tile(np.arange(3), 40)
    ref = np.sum((pts[rows] - pts[cols]) ** 2, axis=1)
    np.testing.assert_allclose(neighbors.pair_sq_dists(pts, rows, cols, chunk=17),
                               ref, atol=1e-12)


def test_symmetrized_support_is_union_with_diagonal():
    # directed edges i -> j; the support must contain both (i, j) and (j, i)
    pts = np.array([[0.0], [0.1], [0.2], [5.0]])
    g = neighbors.knn(pointcloud.PointCloud(pts), 2)
    sup = neighbors.symmetrized_support(g)
    dense = sup.toarray()
    assert dense.dtype == bool
    np.testing.assert_array_equal(dense, dense.T)
    assert np.all(np.diag(dense))
    directed = set()
    for i in range(4):
        for j in g.indices[i]:
            directed.add((i, int(j)))
    expected = directed | {(j, i) for i, j in directed}
    got = {(i, j) for i, j in zip(*np.nonzero(dense))}
    assert got == expected


def test_save_csv_layout(tmp_path):
    cloud = pointcloud.gen_circle_uniform(6)
    g = neighbors.knn(cloud, 2)
    path = tmp_path / "edges.csv"
    neighbors.save_csv(g, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "i,j,distance"
    assert len(lines) == 1 + 6 * 2
    first = lines[1].split(",")
    assert first[0] == "0" and first[1] == "0" and float(first[2]) == 0.0
