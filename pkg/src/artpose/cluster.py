"""Instance extraction: semantic argmax, centroid shifting and per-class DBSCAN."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .core import (
    PartClass,
    PartInstance,
    PerPointPrediction,
    PointCloud,
    ValidationError,
    as_points,
)
from .npcs import decode_distribution

NOISE = -1


@dataclass(frozen=True)
class ClusterParams:
    eps: float = 0.03
    min_pts: int = 8
    min_instance_points: int = 30

    def __post_init__(self):
        if not self.eps > 0:
            raise ValidationError("cluster.eps must be positive")
        if self.min_pts < 1:
            raise ValidationError("cluster.min_pts must be >= 1")
        if self.min_instance_points < self.min_pts:
            raise ValidationError("cluster.min_instance_points must be >= min_pts")


def semantic_argmax(pred: PerPointPrediction) -> np.ndarray:
    """Per-point class ids; ties resolve to the lowest id."""
    return np.argmax(pred.semantic, axis=1)


def shift_to_centroids(cloud: PointCloud, pred: PerPointPrediction) -> np.ndarray:
    pred.check_matches(cloud)
    return cloud.points + pred.offsets


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        parent = self.parent
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            if ra < rb:
                self.parent[rb] = ra
            else:
                self.parent[ra] = rb


# Cell side keeps every pair inside one cell within eps.
_CELL_SHRINK = 1.0 - 1e-9
_NEIGHBOUR_OFFSETS = [
    off for off in itertools.product(range(-2, 3), repeat=3) if off > (0, 0, 0)
]


def dbscan(points, params: ClusterParams) -> np.ndarray:
    """Density-based clustering with deterministic scan-order semantics.

    A point is core when at least ``min_pts`` points (itself included) lie
    within ``eps`` (inclusive).  Clusters are connected components of core
    points, numbered by their lowest core index.  A border point joins the
    lowest-numbered cluster that owns a core point within ``eps``; this is
    exactly what the sequential index-order algorithm produces.

    Returns one cluster id per point, ``-1`` for noise.
    """
    pts = as_points(points) if len(points) else np.zeros((0, 3))
    n = pts.shape[0]
    labels = np.full(n, NOISE, dtype=np.int64)
    if n == 0:
        return labels
    eps = float(params.eps)
    h = eps / np.sqrt(3.0) * _CELL_SHRINK

    cells = np.floor((pts - pts.min(axis=0)) / h).astype(np.int64)
    _, cell_of, cell_count = np.unique(cells, axis=0, return_inverse=True, return_counts=True)
    cell_of = cell_of.reshape(-1)

    core = cell_count[cell_of] >= params.min_pts
    sparse = np.flatnonzero(~core)
    tree = cKDTree(pts)
    if sparse.size:
        counts = tree.query_ball_point(pts[sparse], r=eps, return_length=True)
        core[sparse] = counts >= params.min_pts
    core_idx = np.flatnonzero(core)
    if core_idx.size == 0:
        return labels

    # Group core points by cell; all core points of one cell are mutually connected.
    core_cells = cell_of[core_idx]
    order = np.argsort(core_cells, kind="stable")
    sorted_cells = core_cells[order]
    starts = np.flatnonzero(np.r_[True, sorted_cells[1:] != sorted_cells[:-1]])
    groups = np.split(core_idx[order], starts[1:])
    cell_keys = [tuple(cells[g[0]]) for g in groups]
    key_to_group = {key: gi for gi, key in enumerate(cell_keys)}

    uf = _UnionFind(len(groups))
    group_trees: dict[int, cKDTree] = {}

    def tree_of(gi: int) -> cKDTree:
        t = group_trees.get(gi)
        if t is None:
            t = group_trees[gi] = cKDTree(pts[groups[gi]])
        return t

    for gi, key in enumerate(cell_keys):
        for off in _NEIGHBOUR_OFFSETS:
            gj = key_to_group.get((key[0] + off[0], key[1] + off[1], key[2] + off[2]))
            if gj is None or uf.find(gi) == uf.find(gj):
                continue
            a, b = groups[gi], groups[gj]
            if a.size > b.size:
                a, gj_tree = b, tree_of(gi)
            else:
                gj_tree = tree_of(gj)
            d, _ = gj_tree.query(pts[a], k=1, distance_upper_bound=eps * (1 + 1e-12))
            if np.any(d <= eps):
                uf.union(gi, gj)

    # Number components by their lowest core index.
    roots = np.array([uf.find(gi) for gi in range(len(groups))])
    comp_min: dict[int, int] = {}
    for gi, g in enumerate(groups):
        r = roots[gi]
        m = int(g.min())
        if r not in comp_min or m < comp_min[r]:
            comp_min[r] = m
    ranked = sorted(comp_min, key=comp_min.__getitem__)
    cluster_of_root = {r: cid for cid, r in enumerate(ranked)}
    for gi, g in enumerate(groups):
        labels[g] = cluster_of_root[roots[gi]]

    border = np.flatnonzero(~core)
    if border.size:
        core_tree = cKDTree(pts[core_idx])
        for i, nbrs in zip(border, core_tree.query_ball_point(pts[border], r=eps)):
            if nbrs:
                labels[i] = labels[core_idx[nbrs]].min()
    return labels


def extract_instances(
    cloud: PointCloud, pred: PerPointPrediction, params: ClusterParams = ClusterParams()
) -> list[PartInstance]:
    """Group foreground points into part instances.

    DBSCAN runs separately within each predicted class on the centroid-shifted
    points.  Output is ordered by (class id, lowest member index).
    """
    pred.check_matches(cloud)
    labels = semantic_argmax(pred)
    shifted = shift_to_centroids(cloud, pred)
    decoded = decode_distribution(pred.npcs_bins)
    instances = []
    for cls in np.unique(labels):
        if cls == PartClass.BACKGROUND:
            continue
        idx = np.flatnonzero(labels == cls)
        cluster_ids = dbscan(shifted[idx], params)
        for cid in range(cluster_ids.max() + 1):
            members = idx[cluster_ids == cid]
            if members.size < params.min_instance_points:
                continue
            conf = float(np.clip(pred.semantic[members, cls].mean(), 0.0, 1.0))
            instances.append(
                PartInstance(PartClass(int(cls)), members, conf, decoded[members])
            )
    instances.sort(key=lambda inst: (int(inst.part_class), int(inst.point_indices[0])))
    return instances
