"""Statistically combined ensemble: stack R independent clusterings into one
consensus segmentation.

Cluster masks from different realizations are compared with the spatial
similarity index g = |a AND b| / |a OR b|; pairs at or above g_min become
edges, connected components of the resulting graph become vote groups, and
each point takes the group with the most covering masks provided the count
reaches v_min.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._unionfind import UnionFind
from .data import ClusterMap
from .errors import DimensionMismatch

Owner = tuple[int, int]  # (realization id, cluster id)


@dataclass
class Realization:
    """One complete clustering of the shared point set."""

    id: int
    map: ClusterMap


@dataclass
class ClusterMask:
    """Boolean membership of one cluster of one realization."""

    owner: Owner
    bits: np.ndarray

    def __post_init__(self):
        self.bits = np.ascontiguousarray(self.bits, dtype=bool)
        if not self.bits.any():
            raise ValueError("cluster mask must cover at least one point")


@dataclass
class SimilarityEdge:
    """A retained cross-realization similarity; a.realization < b.realization."""

    a: Owner
    b: Owner
    g: float


@dataclass
class SceConfig:
    """Thresholds for the stacker.

    ``v_min`` left as None means ceil(R/2), resolved once R is known.
    """

    g_min: float = 0.3
    v_min: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.g_min <= 1.0:
            raise ValueError("g_min must lie in [0, 1]")
        if self.v_min is not None and self.v_min < 0:
            raise ValueError("v_min must be non-negative")

    def resolved(self, r: int) -> "SceConfig":
        """Fill the v_min default for an ensemble of r realizations."""
        v_min = self.v_min if self.v_min is not None else math.ceil(r / 2)
        return SceConfig(g_min=self.g_min, v_min=v_min)


@dataclass
class StackedVotes:
    """Per-point vote counts for each similarity group."""

    groups: int
    votes: np.ndarray


@dataclass
class FinalMap:
    """Consensus labels (-1 marks points with no group at v_min votes)."""

    labels: np.ndarray
    strengths: np.ndarray


def masks_from_map(real: Realization) -> list[ClusterMask]:
    """One boolean mask per cluster id; together they partition the points."""
    labels = real.map.labels
    if labels.size == 0:
        raise ValueError("empty cluster map")
    return [
        ClusterMask(owner=(real.id, c), bits=labels == c)
        for c in range(real.map.n_clusters)
    ]


def similarity_g(a: ClusterMask, b: ClusterMask) -> float:
    """Intersection over union of two masks; symmetric, in [0, 1]."""
    if a.bits.shape != b.bits.shape:
        raise DimensionMismatch("masks cover different point counts")
    inter = int(np.count_nonzero(a.bits & b.bits))
    union = int(np.count_nonzero(a.bits | b.bits))
    return inter / union


def pair_similarity_matrix(a: ClusterMap, b: ClusterMap) -> np.ndarray:
    """g for every (cluster of a) x (cluster of b) pair, via the contingency
    table of the two labelings."""
    if a.n != b.n:
        raise DimensionMismatch("realizations cover different point counts")
    ca, cb = a.n_clusters, b.n_clusters
    joint = np.bincount(
        a.labels.astype(np.int64) * cb + b.labels, minlength=ca * cb
    ).reshape(ca, cb)
    size_a = np.bincount(a.labels, minlength=ca)
    size_b = np.bincount(b.labels, minlength=cb)
    union = size_a[:, None] + size_b[None, :] - joint
    return joint / union


def build_similarity_edges(
    realizations: list[Realization], cfg: SceConfig
) -> list[SimilarityEdge]:
    """Compare every cross-realization cluster pair and keep those with
    g >= g_min, sorted canonically by owner ids.

    Masks within one realization are never compared, so the comparison count
    is exactly sum over r < s of N_C(r) * N_C(s).
    """
    if len(realizations) < 2:
        raise ValueError("need at least two realizations")
    n = realizations[0].map.n
    for real in realizations:
        if real.map.n != n:
            raise DimensionMismatch("realizations cover different point counts")
    edges = []
    for i, ra in enumerate(realizations):
        for rb in realizations[i + 1 :]:
            g = pair_similarity_matrix(ra.map, rb.map)
            for ca, cb in zip(*np.nonzero(g >= cfg.g_min)):
                edges.append(
                    SimilarityEdge(
                        a=(ra.id, int(ca)), b=(rb.id, int(cb)), g=float(g[ca, cb])
                    )
                )
    edges.sort(key=lambda e: (e.a, e.b))
    return edges


def comparison_count(realizations: list[Realization]) -> int:
    """Number of cross-realization mask pairs build_similarity_edges examines."""
    counts = [real.map.n_clusters for real in realizations]
    total = 0
    for i in range(len(counts)):
        for j in range(i + 1, len(counts)):
            total += counts[i] * counts[j]
    return total


def group_clusters(
    edges: list[SimilarityEdge], masks: list[ClusterMask]
) -> dict[Owner, int]:
    """Connected components over all masks under the retained edges.

    Group ids ascend with each component's lowest (realization, cluster)
    owner; isolated masks form singleton groups.
    """
    owners = sorted(mask.owner for mask in masks)
    index = {owner: i for i, owner in enumerate(owners)}
    uf = UnionFind(len(owners))
    for edge in edges:
        uf.union(index[edge.a], index[edge.b])
    group_of_root: dict[int, int] = {}
    assignment: dict[Owner, int] = {}
    for owner in owners:  # ascending, so each component is numbered at its lowest owner
        root = uf.find(index[owner])
        if root not in group_of_root:
            group_of_root[root] = len(group_of_root)
        assignment[owner] = group_of_root[root]
    return assignment


def stack_votes(groups: dict[Owner, int], masks: list[ClusterMask]) -> StackedVotes:
    """votes[i][k] = number of masks in group k that cover point i."""
    n_groups = max(groups.values()) + 1
    n = masks[0].bits.shape[0]
    votes = np.zeros((n, n_groups), dtype=np.int32)
    for mask in masks:
        votes[:, groups[mask.owner]] += mask.bits
    return StackedVotes(groups=n_groups, votes=votes)


def assign_final(votes: StackedVotes, cfg: SceConfig) -> FinalMap:
    """Pick each point's strongest group, or -1 when the peak misses v_min.

    Ties go to the lowest group id; strengths hold the winning counts and 0
    for unassigned points.
    """
    if cfg.v_min is None:
        raise ValueError("v_min is unresolved; call SceConfig.resolved(r) first")
    winner = votes.votes.argmax(axis=1).astype(np.int32)
    strength = votes.votes[np.arange(votes.votes.shape[0]), winner].astype(np.int32)
    labels = np.where(strength >= cfg.v_min, winner, np.int32(-1))
    strengths = np.where(strength >= cfg.v_min, strength, np.int32(0))
    return FinalMap(labels=labels, strengths=strengths)


def stack(realizations: list[Realization], cfg: SceConfig) -> FinalMap:
    """Full stacking pipeline: masks -> edges -> groups -> votes -> labels."""
    cfg = cfg.resolved(len(realizations))
    masks = [m for real in realizations for m in masks_from_map(real)]
    edges = build_similarity_edges(realizations, cfg)
    groups = group_clusters(edges, masks)
    votes = stack_votes(groups, masks)
    return assign_final(votes, cfg)
