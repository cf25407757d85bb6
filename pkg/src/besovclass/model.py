"""Data model for binary classification on [0,1]^d: labeled datasets,
synthetic ground truths, the Bernoulli log-likelihood, and L1 error
metrics on dyadic grids.

The covariate factor mu_X is omitted from the log-likelihood: it is
constant under the Uniform design used throughout and cancels in every
Metropolis ratio.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, xlogy

from .wavelets import ConfigurationError, GridFunction, evaluate_at, grid_points

__all__ = [
    "Dataset",
    "GroundTruth",
    "LikelihoodEvaluator",
    "TRUTH_KINDS",
    "truth_eval",
    "generate_data",
    "log_likelihood",
    "l1_error",
    "stream",
    "write_dataset_csv",
    "read_dataset_csv",
]

TRUTH_KINDS = ("sigmoid1d", "step1d", "skewnormal2d", "block2d", "customgrid")
_TRUTH_DIM = {"sigmoid1d": 1, "step1d": 1, "skewnormal2d": 2, "block2d": 2}

# skew-normal surface parameters: location, scale matrix 0.05*I, skew (3,-2)
_SN_LOC = np.array([0.4, 0.6])
_SN_VAR = 0.05
_SN_SKEW = np.array([3.0, -2.0])

# block extremes and height
_BLOCK_B = np.array([0.1, 0.1])
_BLOCK_C = np.array([0.5, 0.5])
_BLOCK_V = 0.4


def stream(master_seed: int, *key: int) -> np.random.Generator:
    """Independent counter-based RNG stream for a (master seed, index key)
    pair; bit-reproducible under any parallel schedule."""
    ss = np.random.SeedSequence(master_seed, spawn_key=tuple(key))
    return np.random.Generator(np.random.Philox(ss))


@dataclass
class GroundTruth:
    """Synthetic probability response surface.

    ``customgrid`` evaluates a supplied GridFunction by nearest node;
    ``block_literal`` switches block2d to the unnormalized product form
    (value 6.4 inside the block) for auditing.
    """

    kind: str
    grid: GridFunction | None = None
    block_literal: bool = False

    def __post_init__(self):
        if self.kind not in TRUTH_KINDS:
            raise ConfigurationError(f"unknown truth kind {self.kind!r}")
        if self.kind == "customgrid" and self.grid is None:
            raise ConfigurationError("customgrid truth requires a grid")

    @property
    def dimension(self) -> int:
        if self.kind == "customgrid":
            return self.grid.dimension
        return _TRUTH_DIM[self.kind]


def truth_eval(t: GroundTruth, x: np.ndarray) -> np.ndarray:
    """Ground-truth probability at points of [0,1]^d."""
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    if pts.shape[1] != t.dimension:
        raise ConfigurationError(
            f"{t.kind} expects d={t.dimension}, got points of dimension {pts.shape[1]}"
        )
    if t.kind == "sigmoid1d":
        return 1.0 / (1.0 + np.exp(-(9.0 * pts[:, 0] - 5.0)))
    if t.kind == "step1d":
        x0 = pts[:, 0]
        return np.where(x0 < 0.4, 0.9, np.where(x0 < 0.7, 0.2, 0.5))
    if t.kind == "skewnormal2d":
        diff = pts - _SN_LOC
        phi2 = np.exp(-np.sum(diff * diff, axis=1) / (2.0 * _SN_VAR)) / (
            2.0 * np.pi * _SN_VAR
        )
        skew_arg = (diff @ _SN_SKEW) / np.sqrt(_SN_VAR)
        return np.clip(0.25 * 2.0 * phi2 * ndtr(skew_arg), 0.0, 1.0)
    if t.kind == "block2d":
        half_in = (1.0 + np.sign(pts - _BLOCK_B)) * (1.0 - np.sign(pts - _BLOCK_C))
        if t.block_literal:
            return _BLOCK_V * np.prod(half_in, axis=1)
        return _BLOCK_V * np.prod(half_in / 4.0, axis=1)
    return evaluate_at(t.grid, pts, mode="nearest")


@dataclass
class Dataset:
    """Labeled pairs (X_i, Y_i) with X in [0,1]^d and Y in {0,1}."""

    X: np.ndarray
    Y: np.ndarray
    truth_kind: str = ""
    seed: int = 0

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.Y = np.asarray(self.Y, dtype=np.int64)
        if self.X.shape[0] != self.Y.shape[0]:
            raise ValueError("X and Y lengths differ")
        if self.n and (np.min(self.X) < 0.0 or np.max(self.X) > 1.0):
            raise ValueError("covariates must lie in [0,1]^d")
        if self.n and not np.all((self.Y == 0) | (self.Y == 1)):
            raise ValueError("labels must be 0 or 1")

    @property
    def n(self) -> int:
        return self.Y.shape[0]

    @property
    def dimension(self) -> int:
        return self.X.shape[1]

    @classmethod
    def empty(cls, dimension: int) -> "Dataset":
        return cls(np.empty((0, dimension)), np.empty(0, dtype=np.int64))


def generate_data(t: GroundTruth, n: int, rng_seed) -> Dataset:
    """n iid pairs: X ~ Uniform([0,1]^d), Y | X ~ Bernoulli(p0(X))."""
    rng = (
        rng_seed
        if isinstance(rng_seed, np.random.Generator)
        else stream(int(rng_seed))
    )
    d = t.dimension
    X = rng.random((n, d))
    if n == 0:
        return Dataset(np.empty((0, d)), np.empty(0, dtype=np.int64), t.kind)
    p = truth_eval(t, X)
    Y = (rng.random(n) < p).astype(np.int64)
    seed = int(rng_seed) if isinstance(rng_seed, (int, np.integer)) else 0
    return Dataset(X, Y, t.kind, seed)


def log_likelihood(
    p: GridFunction, data: Dataset, eval_mode: str = "nearest"
) -> float:
    """sum_i Y_i log p(X_i) + (1-Y_i) log(1-p(X_i)); -inf when a label
    has probability zero."""
    if data.n == 0:
        return 0.0
    vals = p.values
    if np.min(vals) < 0.0 or np.max(vals) > 1.0:
        raise ValueError("probability surface leaves [0,1]")
    pi = evaluate_at(p, data.X, mode=eval_mode)
    with np.errstate(divide="ignore"):
        terms = xlogy(data.Y, pi) + xlogy(1 - data.Y, 1.0 - pi)
    return float(np.sum(terms))


class LikelihoodEvaluator:
    """Bernoulli log-likelihood of a latent field on a fixed dyadic grid,
    with data point lookups precomputed.

    Works in field space: log H(w) = -log(1+e^-w), log(1-H(w)) =
    -log(1+e^w), which agrees with log_likelihood(link(w), data) but
    stays accurate for large |w|.
    """

    def __init__(self, data: Dataset, dimension: int, max_level: int):
        self.n = data.n
        m = 2 ** max_level
        if data.n:
            idx = np.clip(np.floor(data.X * m).astype(np.int64), 0, m - 1)
            flat = idx[:, 0] if dimension == 1 else idx[:, 0] * m + idx[:, 1]
            self.idx1 = flat[data.Y == 1]
            self.idx0 = flat[data.Y == 0]
        else:
            self.idx1 = np.empty(0, dtype=np.int64)
            self.idx0 = np.empty(0, dtype=np.int64)

    def loglik(self, w_grid: np.ndarray) -> float:
        if self.n == 0:
            return 0.0
        return -float(
            np.logaddexp(0.0, -w_grid[self.idx1]).sum()
            + np.logaddexp(0.0, w_grid[self.idx0]).sum()
        )


def l1_error(estimate: GridFunction, truth: GroundTruth):
    """Riemann-sum L1 distance to the truth on the estimate's own grid.

    Returns (absolute, relative); relative is None when ||p0||_1 = 0.
    """
    if estimate.dimension != truth.dimension:
        raise ConfigurationError(
            f"estimate is d={estimate.dimension}, truth is d={truth.dimension}"
        )
    nodes = grid_points(estimate.dimension, estimate.max_level)
    t = truth_eval(truth, nodes)
    absolute = float(np.mean(np.abs(estimate.values - t)))
    norm = float(np.mean(np.abs(t)))
    if norm == 0.0:
        return absolute, None
    return absolute, absolute / norm


# -- dataset CSV --------------------------------------------------------------

def write_dataset_csv(data: Dataset, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"# truth={data.truth_kind or 'unknown'} n={data.n} seed={data.seed}\n")
        cols = ",".join(f"x{k+1}" for k in range(data.dimension))
        fh.write(f"{cols},y\n")
        for xi, yi in zip(data.X, data.Y):
            fh.write(",".join(repr(float(v)) for v in xi) + f",{int(yi)}\n")


def read_dataset_csv(path) -> Dataset:
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("#"):
            raise ValueError(f"missing dataset header in {path}")
        meta = dict(tok.split("=") for tok in header[1:].split())
        fh.readline()  # column names
        rows = [line.strip().split(",") for line in fh if line.strip()]
    if rows:
        X = np.array([[float(v) for v in r[:-1]] for r in rows])
        Y = np.array([int(r[-1]) for r in rows])
    else:
        X = np.empty((0, 1))
        Y = np.empty(0, dtype=np.int64)
    return Dataset(X, Y, meta.get("truth", ""), int(meta.get("seed", 0)))
