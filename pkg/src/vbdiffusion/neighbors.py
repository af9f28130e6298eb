"""Exact k-nearest-neighbor queries and sparse support patterns.

Rows of a :class:`NeighborGraph` always start with the point itself at
distance zero and are sorted by (distance, index) so that results are
reproducible even in the presence of exact ties.
"""

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.spatial import cKDTree

from .errors import KTooLarge

# kd-trees stop paying off in high ambient dimension; everything in this
# package lives in R^4 or lower, so the brute-force path is for completeness
_KDTREE_MAX_DIM = 16


@dataclass(frozen=True)
class NeighborGraph:
    """k nearest neighbors of every point, self included first."""

    k: int
    indices: np.ndarray
    distances: np.ndarray

    def __post_init__(self):
        if self.indices.shape != self.distances.shape:
            raise ValueError("indices and distances must have the same shape")
        if self.indices.shape[1] != self.k:
            raise ValueError("row length must equal k")


def knn(cloud, k):
    """Exact k nearest neighbors (the point itself counts as the first).

    Ties at equal distance are broken toward the smaller index; the self
    entry is always listed first regardless.
    """
    pts = cloud.points
    n = pts.shape[0]
    if k > n:
        raise KTooLarge(k, n)
    if pts.shape[1] <= _KDTREE_MAX_DIM:
        dist, idx = cKDTree(pts).query(pts, k=k, workers=-1)
        if k == 1:
            dist, idx = dist[:, None], idx[:, None]
    else:
        dist, idx = _knn_brute(pts, k)
    rows = np.arange(n)
    # with more than k coincident points the query may drop the self entry
    missing = ~np.any(idx == rows[:, None], axis=1)
    if np.any(missing):
        idx[missing, -1] = rows[missing]
        dist[missing, -1] = 0.0
    order = np.lexsort((idx, dist), axis=1)
    idx = np.take_along_axis(idx, order, axis=1)
    dist = np.take_along_axis(dist, order, axis=1)
    self_pos = np.argmax(idx == rows[:, None], axis=1)
    if np.any(self_pos > 0):
        cols = np.arange(k)[None, :]
        sp = self_pos[:, None]
        perm = np.where(cols == 0, sp, np.where(cols <= sp, cols - 1, cols))
        idx = np.take_along_axis(idx, perm, axis=1)
        dist = np.take_along_axis(dist, perm, axis=1)
    dist[:, 0] = 0.0
    return NeighborGraph(k=k, indices=idx.astype(np.int32), distances=dist)


def _knn_brute(pts, k, block=512):
    n = pts.shape[0]
    sq = np.einsum("ij,ij->i", pts, pts)
    idx = np.empty((n, k), dtype=np.int64)
    dist = np.empty((n, k))
    for start in range(0, n, block):
        stop = min(start + block, n)
        d2 = sq[start:stop, None] + sq[None, :] - 2.0 * pts[start:stop] @ pts.T
        np.maximum(d2, 0.0, out=d2)
        # the expansion leaves O(eps) residue on the diagonal, which sqrt
        # would amplify to ~1e-8; the self distance is zero by definition
        d2[np.arange(stop - start), np.arange(start, stop)] = 0.0
        part = np.argpartition(d2, k - 1, axis=1)[:, :k]
        pd = np.take_along_axis(d2, part, axis=1)
        order = np.lexsort((part, pd), axis=1)
        idx[start:stop] = np.take_along_axis(part, order, axis=1)
        dist[start:stop] = np.sqrt(np.take_along_axis(pd, order, axis=1))
    return dist, idx


def pair_sq_dists(points, rows, cols, chunk=4_000_000):
    """Squared distances ||points[rows] - points[cols]||^2, computed in chunks."""
    out = np.empty(rows.shape[0])
    for start in range(0, rows.shape[0], chunk):
        stop = min(start + chunk, rows.shape[0])
        diff = points[rows[start:stop]] - points[cols[start:stop]]
        out[start:stop] = np.einsum("ij,ij->i", diff, diff)
    return out


def symmetrized_support(graph):
    """Union of the directed kNN edge set with its transpose, as a boolean CSR.

    The diagonal is always present because every row contains its own point.
    """
    n, k = graph.indices.shape
    rows = np.repeat(np.arange(n, dtype=np.int32), k)
    cols = graph.indices.ravel().astype(np.int32)
    pattern = coo_matrix((np.ones(n * k, dtype=np.int8), (rows, cols)), shape=(n, n))
    sym = (pattern + pattern.T).tocsr()
    sym.data = np.ones_like(sym.data)
    return sym.astype(bool)


def save_csv(graph, path):
    """Write directed edges as (i, j, distance) triples."""
    n, k = graph.indices.shape
    rows = np.repeat(np.arange(n), k)
    out = np.column_stack([rows, graph.indices.ravel(), graph.distances.ravel()])
    np.savetxt(path, out, fmt=["%d", "%d", "%.17g"], delimiter=",",
               header="i,j,distance", comments="")
