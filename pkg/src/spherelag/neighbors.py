"""Nearest-neighbor and ball queries on the sphere.

A kd-tree over the R^3 coordinates does the searching; chordal and geodesic
distances are monotonically related (|a - b| = 2 sin(d/2)), so chordal ranking
is geodesic ranking. Results are re-ranked by (squared chord, node index) so
ties resolve deterministically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .geom import NodeSet, geodesic_distance

LEAF_SIZE = 16

# Extra candidates fetched beyond k so boundary ties cannot drop a true neighbor.
_TIE_PAD = 16


@dataclass
class NeighborIndex:
    points: np.ndarray
    tree: cKDTree

    def __len__(self):
        return self.points.shape[0]


def build_index(nodes):
    """Build a kd-tree index over a NodeSet or raw (N, 3) array."""
    pts = nodes.points if isinstance(nodes, NodeSet) else np.asarray(nodes, dtype=np.float64)
    return NeighborIndex(pts, cKDTree(pts, leafsize=LEAF_SIZE, balanced_tree=True))


def _rank(points, center, candidates):
    """Order candidate indices by (squared chord to center, index)."""
    diff = points[candidates] - center
    d2 = np.einsum("ij,ij->i", diff, diff)
    return candidates[np.lexsort((candidates, d2))]


def knn(index, center_idx, k):
    """Indices of the k nearest nodes to node center_idx, the node itself first.

    Ascending geodesic distance, ties broken by ascending node index.
    """
    n = len(index)
    k = int(k)
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    center = index.points[center_idx]
    if k + _TIE_PAD >= n:
        cand = np.arange(n)
    else:
        _, cand = index.tree.query(center, k=k + _TIE_PAD)
    return _rank(index.points, center, np.asarray(cand, dtype=np.int64))[:k]


def knn_all(index, k):
    """Row i holds knn(index, i, k); one vectorized tree query for all centers."""
    n = len(index)
    k = int(k)
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    kq = min(n, k + _TIE_PAD)
    _, cand = index.tree.query(index.points, k=kq)
    cand = np.asarray(cand, dtype=np.int64)
    if cand.ndim == 1:
        cand = cand[:, None]
    out = np.empty((n, k), dtype=np.int64)
    pts = index.points
    for i in range(n):
        row = cand[i]
        diff = pts[row] - pts[i]
        d2 = np.einsum("ij,ij->i", diff, diff)
        out[i] = row[np.lexsort((row, d2))[:k]]
    return out


def ball(index, center, r):
    """Indices of all nodes with geodesic distance <= r from the point `center`.

    Ascending distance, ties broken by index. The kd-tree pre-filters by chord
    radius; the boundary decision uses the package geodesic distance so results
    match a linear scan exactly.
    """
    r = float(r)
    if r < 0.0:
        raise ValueError("radius must be >= 0")
    center = np.asarray(center, dtype=np.float64)
    if r >= np.pi:
        cand = np.arange(len(index), dtype=np.int64)
    else:
        chord = 2.0 * np.sin(r / 2.0)
        cand = np.asarray(
            index.tree.query_ball_point(center, chord * (1.0 + 1e-12) + 1e-15),
            dtype=np.int64,
        )
    if cand.size == 0:
        return cand
    d = geodesic_distance(center, index.points[cand])
    keep = d <= r
    cand, d = cand[keep], d[keep]
    return cand[np.lexsort((cand, d))]
