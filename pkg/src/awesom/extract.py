"""Cluster extraction from a trained lattice.

The pipeline is: U-matrix (mean feature-space distance to the 8 lattice
neighbors, optionally Gaussian-smoothed) -> steepest-descent centroid per
node -> ridge-based centroid merging -> per-point labels through the BMU
assignment.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ._unionfind import UnionFind
from .data import ClusterMap
from .errors import DimensionMismatch
from .som import Lattice

# 8-neighborhood offsets in (drow, dcol) lexicographic order, which is also
# ascending linear-index order for any fixed center node; argmin over this
# axis therefore breaks ties toward the lowest linear index.
_OFFSETS = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


@dataclass
class UMatrix:
    """Per-node neighbor-distance field over an x-by-y lattice."""

    x: int
    y: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.shape != (self.x * self.y,):
            raise DimensionMismatch("umatrix values must be flat with x*y entries")
        if not np.isfinite(self.values).all() or (self.values < 0).any():
            raise ValueError("umatrix values must be finite and non-negative")

    @property
    def grid(self) -> np.ndarray:
        """(y, x) view, row-major."""
        return self.values.reshape(self.y, self.x)


@dataclass
class NodeLabels:
    """Cluster id per lattice node, compact in [0, n_clusters)."""

    labels: np.ndarray
    n_clusters: int

    def __post_init__(self):
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int32)
        if self.labels.min() < 0 or self.labels.max() >= self.n_clusters:
            raise ValueError("node labels out of range [0, n_clusters)")


def compute_umatrix(lattice: Lattice, bandwidth: float = 1.5) -> UMatrix:
    """Mean feature-space distance from each node to its lattice neighbors.

    Edge nodes average over the neighbors that exist; an isolated 1x1 lattice
    gets 0. With bandwidth > 0 the raw field is convolved with a truncated
    Gaussian (radius ceil(3*bandwidth) lattice units) whose mass is
    renormalized at the boundary, so smoothing never leaks zeros in from
    outside the grid.
    """
    if bandwidth < 0:
        raise ValueError("bandwidth must be non-negative")
    w = lattice.weights.reshape(lattice.y, lattice.x, lattice.f)
    acc = np.zeros((lattice.y, lattice.x))
    cnt = np.zeros((lattice.y, lattice.x))
    for dr, dc in _OFFSETS:
        r_lo, r_hi = max(0, -dr), lattice.y - max(0, dr)
        c_lo, c_hi = max(0, -dc), lattice.x - max(0, dc)
        if r_lo >= r_hi or c_lo >= c_hi:
            continue
        here = w[r_lo:r_hi, c_lo:c_hi]
        there = w[r_lo + dr : r_hi + dr, c_lo + dc : c_hi + dc]
        dist = np.sqrt(((here - there) ** 2).sum(axis=-1))
        acc[r_lo:r_hi, c_lo:c_hi] += dist
        cnt[r_lo:r_hi, c_lo:c_hi] += 1.0
    raw = np.divide(acc, cnt, out=np.zeros_like(acc), where=cnt > 0)
    if bandwidth > 0:
        raw = _smooth(raw, bandwidth)
    return UMatrix(x=lattice.x, y=lattice.y, values=raw.ravel())


def _smooth(grid: np.ndarray, bandwidth: float) -> np.ndarray:
    radius = math.ceil(3.0 * bandwidth)
    ax = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(ax[:, None] ** 2 + ax[None, :] ** 2) / (2.0 * bandwidth**2))
    num = ndimage.correlate(grid, kernel, mode="constant", cval=0.0)
    den = ndimage.correlate(np.ones_like(grid), kernel, mode="constant", cval=0.0)
    return num / den


def find_centroids(umatrix: UMatrix) -> np.ndarray:
    """Steepest-descent fixed point for every node.

    From each node, move to the 8-neighbor with the smallest U-matrix value
    (lowest linear index on ties) as long as that value is strictly below the
    current one; the value strictly decreases along every move, so each path
    ends at a local minimum. Returns that minimum's linear index per node.
    """
    x, y = umatrix.x, umatrix.y
    grid = umatrix.grid
    padded = np.full((y + 2, x + 2), np.inf)
    padded[1:-1, 1:-1] = grid
    stacked = np.stack(
        [padded[1 + dr : 1 + dr + y, 1 + dc : 1 + dc + x] for dr, dc in _OFFSETS]
    )
    best = stacked.argmin(axis=0)
    best_val = np.take_along_axis(stacked, best[None], axis=0)[0]
    lin = np.arange(x * y).reshape(y, x)
    deltas = np.array([dr * x + dc for dr, dc in _OFFSETS])
    nxt = np.where(best_val < grid, lin + deltas[best], lin).ravel()
    while True:
        hop = nxt[nxt]
        if np.array_equal(hop, nxt):
            return hop
        nxt = hop


def merge_centroids(umatrix: UMatrix, centroids: np.ndarray, merge_range: float = 0.25) -> NodeLabels:
    """Fuse centroids whose connecting ridge stays low, then label every node.

    Two distinct centroids merge when the maximum U-matrix value along the
    Bresenham segment between them (traced from the lower to the higher
    linear index) is at most umat_min + merge_range * (umat_max - umat_min).
    Final clusters are the connected components of that relation; component
    ids ascend with each component's lowest centroid index.
    """
    if not 0.0 <= merge_range <= 1.0:
        raise ValueError("merge_range must lie in [0, 1]")
    values = umatrix.values
    tau = values.min() + merge_range * (values.max() - values.min())
    uniq = np.unique(centroids)
    uf = UnionFind(len(uniq))
    for i in range(len(uniq)):
        for j in range(i + 1, len(uniq)):
            if _segment_max(umatrix, int(uniq[i]), int(uniq[j])) <= tau:
                uf.union(i, j)
    roots = [uf.find(i) for i in range(len(uniq))]
    component_label: dict[int, int] = {}
    for root in roots:  # uniq is ascending, so first sight = lowest centroid
        if root not in component_label:
            component_label[root] = len(component_label)
    centroid_label = {int(c): component_label[r] for c, r in zip(uniq, roots)}
    labels = np.fromiter(
        (centroid_label[int(c)] for c in centroids), dtype=np.int32, count=len(centroids)
    )
    return NodeLabels(labels=labels, n_clusters=len(component_label))


def _segment_max(umatrix: UMatrix, a: int, b: int) -> float:
    """Max U-matrix value on the Bresenham segment between nodes a and b."""
    if a > b:
        a, b = b, a
    r0, c0 = divmod(a, umatrix.x)
    r1, c1 = divmod(b, umatrix.x)
    grid = umatrix.grid
    dc = abs(c1 - c0)
    dr = -abs(r1 - r0)
    sc = 1 if c0 < c1 else -1
    sr = 1 if r0 < r1 else -1
    err = dc + dr
    peak = grid[r0, c0]
    while (r0, c0) != (r1, c1):
        e2 = 2 * err
        if e2 >= dr:
            err += dr
            c0 += sc
        if e2 <= dc:
            err += dc
            r0 += sr
        peak = max(peak, grid[r0, c0])
    return float(peak)


def label_data(node_labels: NodeLabels, bmus: np.ndarray) -> ClusterMap:
    """Carry node labels to the points mapped onto them.

    Labels absent from the BMU image are dropped and the survivors relabeled
    compactly, preserving their order.
    """
    bmus = np.asarray(bmus)
    if bmus.size == 0:
        raise DimensionMismatch("bmus must be non-empty")
    if bmus.min() < 0 or bmus.max() >= node_labels.labels.shape[0]:
        raise IndexError("BMU index out of lattice range")
    gathered = node_labels.labels[bmus]
    present, compact = np.unique(gathered, return_inverse=True)
    return ClusterMap(labels=compact.astype(np.int32), n_clusters=len(present))
