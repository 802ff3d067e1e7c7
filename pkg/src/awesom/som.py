"""Lattice initialization, stochastic training, and data-to-node mapping.

A lattice is an x-by-y grid of f-dimensional weight vectors stored as one
(x*y, f) float64 matrix. Linear node index i sits at column i % x and
row i // x. Lattices and datasets are treated as immutable: training copies
its input and returns a new lattice.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._kernels import bmu_scan_all, bmu_scan_one, train_loop
from .data import Dataset
from .errors import DimensionMismatch


@dataclass
class Lattice:
    """A 2-D grid of weight vectors (x columns, y rows)."""

    x: int
    y: int
    weights: np.ndarray

    def __post_init__(self):
        if self.x < 1 or self.y < 1:
            raise ValueError("lattice dimensions must be at least 1x1")
        self.weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 2 or self.weights.shape[0] != self.x * self.y:
            raise DimensionMismatch("weights must have shape (x*y, f)")
        if not np.isfinite(self.weights).all():
            raise ValueError("lattice weights must be finite")

    @property
    def f(self) -> int:
        return self.weights.shape[1]

    @property
    def n_nodes(self) -> int:
        return self.x * self.y

    def node_coords(self, index: int) -> tuple[int, int]:
        """(row, col) of a linear node index."""
        return index // self.x, index % self.x


@dataclass
class TrainConfig:
    """Hyperparameters for one training run.

    ``radius0`` defaults to max(x, y) of the lattice being trained when left
    as None. ``steps`` counts weight updates, one sampled row each.
    """

    steps: int
    alpha: float = 0.3
    radius0: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.steps < 0:
            raise ValueError("steps must be non-negative")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        if self.radius0 is not None and self.radius0 < 1:
            raise ValueError("radius0 must be at least 1")


def default_steps(n: int) -> int:
    """Training length used when the caller does not pick one."""
    return 10 * min(n, 100_000)


def init_lattice(data: Dataset, x: int, y: int, seed: int = 0) -> Lattice:
    """Draw each weight component uniformly from its feature's data range.

    Deterministic for a fixed seed; a constant feature pins the corresponding
    weight component to that constant.
    """
    if x < 1 or y < 1:
        raise ValueError("lattice dimensions must be at least 1x1")
    mins = data.values.min(axis=0)
    maxs = data.values.max(axis=0)
    rng = np.random.default_rng(seed)
    weights = mins + rng.random((x * y, data.f)) * (maxs - mins)
    return Lattice(x=x, y=y, weights=weights)


def _check_dims(lattice: Lattice, f: int) -> None:
    if lattice.f != f:
        raise DimensionMismatch(
            f"lattice has {lattice.f} features, input has {f}"
        )


def best_matching_unit(lattice: Lattice, sample: np.ndarray) -> int:
    """Index of the node nearest to ``sample`` (squared Euclidean, lowest
    linear index on ties)."""
    sample = np.ascontiguousarray(sample, dtype=np.float64)
    if sample.ndim != 1:
        raise DimensionMismatch("sample must be a 1-D vector")
    _check_dims(lattice, sample.shape[0])
    idx, _ = bmu_scan_one(lattice.weights, sample)
    return int(idx)


def train(lattice: Lattice, data: Dataset, cfg: TrainConfig) -> Lattice:
    """Run ``cfg.steps`` stochastic updates and return the evolved lattice.

    Each step draws one data row uniformly at random from the seeded
    generator (index = floor(u * n)), finds its BMU, and pulls every node
    within the current lattice radius toward the row by ``cfg.alpha``. The
    radius decays linearly from radius0 to 1. The input lattice is left
    untouched.
    """
    _check_dims(lattice, data.f)
    weights = lattice.weights.copy()
    if cfg.steps > 0:
        radius0 = float(cfg.radius0 if cfg.radius0 is not None else max(lattice.x, lattice.y))
        rng = np.random.default_rng(cfg.seed)
        u = rng.random(cfg.steps)
        sample_idx = np.minimum(np.floor(u * data.n).astype(np.int64), data.n - 1)
        train_loop(weights, data.values, sample_idx, cfg.alpha, radius0, lattice.x)
    return Lattice(x=lattice.x, y=lattice.y, weights=weights)


def map_to_bmus(lattice: Lattice, data: Dataset) -> np.ndarray:
    """BMU index for every data row; parallel over rows, order-independent."""
    _check_dims(lattice, data.f)
    idx, _ = bmu_scan_all(lattice.weights, data.values)
    return idx


def quantization_error(lattice: Lattice, data: Dataset) -> float:
    """Mean Euclidean distance from each row to its BMU's weight vector."""
    _check_dims(lattice, data.f)
    _, sq = bmu_scan_all(lattice.weights, data.values)
    return float(np.mean(np.sqrt(sq)))


def map_with_error(lattice: Lattice, data: Dataset) -> tuple[np.ndarray, float]:
    """One fused scan returning (BMU indices, quantization error)."""
    _check_dims(lattice, data.f)
    idx, sq = bmu_scan_all(lattice.weights, data.values)
    return idx, float(np.mean(np.sqrt(sq)))
