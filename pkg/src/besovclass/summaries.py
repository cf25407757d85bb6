"""Posterior summarization: pointwise means, credible bands, and a
streaming accumulator for memory-constrained runs.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .wavelets import GridFunction

__all__ = [
    "PosteriorSummary",
    "posterior_summary",
    "P2QuantileArray",
    "StreamingAccumulator",
    "StoredDrawsAccumulator",
]


@dataclass
class PosteriorSummary:
    """Posterior mean of the latent field (and its link image) plus
    pointwise 95% credible bands of the probability surface."""

    mean_w: GridFunction
    mean_p: GridFunction
    band_low: GridFunction
    band_high: GridFunction
    n_draws: int
    alpha_trace: np.ndarray = field(default_factory=lambda: np.empty(0))
    accept_hyper: float = float("nan")
    accept_field: float = float("nan")
    approximate_bands: bool = False


def posterior_summary(
    w_draws: np.ndarray, dimension: int, max_level: int
) -> PosteriorSummary:
    """Summarize stored draws of the latent field w on the grid.

    The posterior mean surface is H(mean of w-draws); bands are the
    empirical 2.5/97.5 percentiles of the p-draws H(w) with linear
    (type-7) interpolation.
    """
    w_draws = np.atleast_2d(np.asarray(w_draws, dtype=float))
    if w_draws.shape[0] < 1:
        raise ValueError("posterior_summary needs at least one draw")
    mean_w = w_draws.mean(axis=0)
    p_draws = expit(w_draws)
    lo, hi = np.percentile(p_draws, [2.5, 97.5], axis=0, method="linear")
    mk = lambda v, unit=False: GridFunction(v, dimension, max_level, value_range_unit=unit)
    return PosteriorSummary(
        mean_w=mk(mean_w),
        mean_p=mk(expit(mean_w), unit=True),
        band_low=mk(lo, unit=True),
        band_high=mk(hi, unit=True),
        n_draws=w_draws.shape[0],
    )


class StoredDrawsAccumulator:
    """Exact summary path: keep every thinned post-burn-in draw."""

    def __init__(self, n_draws: int, grid_size: int):
        self._draws = np.empty((n_draws, grid_size))
        self._k = 0

    def add(self, w_grid: np.ndarray) -> None:
        self._draws[self._k] = w_grid
        self._k += 1

    def summarize(self, dimension: int, max_level: int) -> PosteriorSummary:
        return posterior_summary(self._draws[: self._k], dimension, max_level)


class P2QuantileArray:
    """Jain-Chlamtac P-squared running quantile, vectorized over many
    independent scalar streams; approximate by construction."""

    def __init__(self, q: float, size: int):
        self.q = q
        self.size = size
        self._seen = 0
        self._first = np.empty((5, size))
        self.heights = None
        self.pos = None
        self.desired = None
        self._incr = np.array([0.0, q / 2.0, q, (1.0 + q) / 2.0, 1.0])

    def add(self, x: np.ndarray) -> None:
        if self._seen < 5:
            self._first[self._seen] = x
            self._seen += 1
            if self._seen == 5:
                self.heights = np.sort(self._first, axis=0)
                self.pos = np.tile(np.arange(1.0, 6.0)[:, None], (1, self.size))
                self.desired = 1.0 + np.array(
                    [0.0, 2 * self.q, 4 * self.q, 2 + 2 * self.q, 4.0]
                )[:, None] * np.ones((1, self.size))
            return
        h = self.heights
        # clamp extremes and locate the containing segment per stream
        below = x < h[0]
        h[0] = np.where(below, x, h[0])
        above = x > h[4]
        h[4] = np.where(above, x, h[4])
        k = (x[None, :] >= h[:4]).sum(axis=0)  # in 1..4
        k = np.clip(k, 1, 4)
        grow = np.arange(1, 6)[:, None] > k[None, :]
        self.pos += grow
        self.desired += self._incr[:, None]
        for i in (1, 2, 3):
            d = self.desired[i] - self.pos[i]
            up = (d >= 1.0) & (self.pos[i + 1] - self.pos[i] > 1.0)
            dn = (d <= -1.0) & (self.pos[i - 1] - self.pos[i] < -1.0)
            s = np.where(up, 1.0, np.where(dn, -1.0, 0.0))
            move = s != 0.0
            if not move.any():
                continue
            hp = h[i] + (s / (self.pos[i + 1] - self.pos[i - 1])) * (
                (self.pos[i] - self.pos[i - 1] + s)
                * (h[i + 1] - h[i])
                / (self.pos[i + 1] - self.pos[i])
                + (self.pos[i + 1] - self.pos[i] - s)
                * (h[i] - h[i - 1])
                / (self.pos[i] - self.pos[i - 1])
            )
            bad = (hp <= h[i - 1]) | (hp >= h[i + 1])
            idx = np.where(s > 0, i + 1, i - 1)
            lin = h[i] + s * (h[idx, np.arange(self.size)] - h[i]) / (
                self.pos[idx, np.arange(self.size)] - self.pos[i]
            )
            h[i] = np.where(move, np.where(bad, lin, hp), h[i])
            self.pos[i] = np.where(move, self.pos[i] + s, self.pos[i])
        self._seen += 1

    def value(self) -> np.ndarray:
        if self.heights is None:
            return np.quantile(self._first[: self._seen], self.q, axis=0)
        return self.heights[2].copy()


class StreamingAccumulator:
    """Running mean of w plus P-squared 2.5/97.5 percentiles of p = H(w);
    bands are approximate."""

    def __init__(self, grid_size: int):
        self._sum = np.zeros(grid_size)
        self._k = 0
        self._lo = P2QuantileArray(0.025, grid_size)
        self._hi = P2QuantileArray(0.975, grid_size)

    def add(self, w_grid: np.ndarray) -> None:
        self._sum += w_grid
        self._k += 1
        p = expit(w_grid)
        self._lo.add(p)
        self._hi.add(p)

    def summarize(self, dimension: int, max_level: int) -> PosteriorSummary:
        mean_w = self._sum / self._k
        mk = lambda v, unit=False: GridFunction(
            v, dimension, max_level, value_range_unit=unit
        )
        return PosteriorSummary(
            mean_w=mk(mean_w),
            mean_p=mk(expit(mean_w), unit=True),
            band_low=mk(np.clip(self._lo.value(), 0.0, 1.0), unit=True),
            band_high=mk(np.clip(self._hi.value(), 0.0, 1.0), unit=True),
            n_draws=self._k,
            approximate_bands=True,
        )
